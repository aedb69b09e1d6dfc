#include "riskminer/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "riskminer/errors.hpp"
#include "riskminer/expression.hpp"

namespace riskminer {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("expected a number");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer");
  }
  return v;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

std::string join(const std::vector<std::size_t>& items) {
  std::string out;
  for (std::size_t v : items) out += (out.empty() ? "" : ", ") + std::to_string(v);
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_u64(item));
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const AppConfig&)> get;
  std::function<void(AppConfig&, const std::string&)> set;
};

#define RM_DOUBLE(sec, name, member)                                          \
  Field {                                                                     \
    sec, name, [](const AppConfig& c) { return fmt(c.member); },              \
        [](AppConfig& c, const std::string& v) { c.member = to_double(v); } \
  }
#define RM_SIZE(sec, name, member)                                                       \
  Field {                                                                                \
    sec, name, [](const AppConfig& c) { return std::to_string(c.member); },              \
        [](AppConfig& c, const std::string& v) {                                         \
          c.member = static_cast<decltype(c.member)>(to_u64(v));                         \
        }                                                                                \
  }
#define RM_STRING(sec, name, member)                                          \
  Field {                                                                     \
    sec, name, [](const AppConfig& c) { return c.member; },                   \
        [](AppConfig& c, const std::string& v) { c.member = v; }              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RM_STRING("data", "csv", data.csv),
      RM_SIZE("data", "synthetic_stocks", data.synthetic_stocks),
      RM_SIZE("data", "synthetic_days", data.synthetic_days),
      RM_SIZE("data", "synthetic_seed", data.synthetic_seed),
      RM_STRING("data", "planted", data.planted),
      RM_DOUBLE("data", "planted_weight", data.planted_weight),

      RM_STRING("split", "train_end", split.train_end),
      RM_STRING("split", "valid_end", split.valid_end),
      RM_DOUBLE("split", "train_fraction", split.train_fraction),
      RM_DOUBLE("split", "valid_fraction", split.valid_fraction),

      RM_SIZE("run", "pool_size", run.pool_size),
      RM_DOUBLE("run", "lambda", run.lambda),
      RM_SIZE("run", "max_episode_len", run.max_episode_len),
      RM_SIZE("run", "cycles_per_iteration", run.cycles_per_iteration),
      RM_SIZE("run", "iterations", run.iterations),
      RM_DOUBLE("run", "quantile_level", run.quantile_level),
      RM_DOUBLE("run", "beta", run.beta),
      RM_DOUBLE("run", "policy_lr", run.policy_lr),
      RM_DOUBLE("run", "discount", run.discount),
      RM_DOUBLE("run", "c_puct", run.c_puct),
      RM_SIZE("run", "seed", run.seed),
      Field{"run", "horizon", [](const AppConfig& c) { return std::to_string(c.run.horizon); },
            [](AppConfig& c, const std::string& v) {
              const auto h = to_u64(v);
              if (h != 5 && h != 10) throw ConfigError("horizon must be 5 or 10");
              c.run.horizon = static_cast<int>(h);
            }},
      Field{"run", "vocabulary", [](const AppConfig& c) { return join(c.run.vocabulary); },
            [](AppConfig& c, const std::string& v) { c.run.vocabulary = split_list(v); }},
      RM_DOUBLE("run", "fit_lr", run.fit.lr),
      Field{"run", "fit_max_iters",
            [](const AppConfig& c) { return std::to_string(c.run.fit.max_iters); },
            [](AppConfig& c, const std::string& v) {
              c.run.fit.max_iters = static_cast<int>(to_u64(v));
            }},
      RM_DOUBLE("run", "fit_tol", run.fit.tol),
      RM_SIZE("run", "embed_dim", run.policy.embed_dim),
      RM_SIZE("run", "hidden_dim", run.policy.hidden_dim),
      RM_SIZE("run", "layers", run.policy.layers),
      Field{"run", "head_dims", [](const AppConfig& c) { return join(c.run.policy.head_dims); },
            [](AppConfig& c, const std::string& v) { c.run.policy.head_dims = to_sizes(v); }},
      Field{"run", "update_mode",
            [](const AppConfig& c) {
              return std::string(c.run.update_mode == UpdateMode::Batch ? "batch"
                                                                        : "per_trajectory");
            },
            [](AppConfig& c, const std::string& v) {
              if (v == "batch") {
                c.run.update_mode = UpdateMode::Batch;
              } else if (v == "per_trajectory") {
                c.run.update_mode = UpdateMode::PerTrajectory;
              } else {
                throw ConfigError("expected per_trajectory or batch");
              }
            }},
      RM_SIZE("run", "patience", run.patience),

      RM_SIZE("backtest", "k", backtest.k),
      RM_SIZE("backtest", "rebalance_every", backtest.rebalance_every),
      RM_DOUBLE("backtest", "cost_bps", backtest.cost_bps),
      Field{"backtest", "k_grid", [](const AppConfig& c) { return join(c.k_grid); },
            [](AppConfig& c, const std::string& v) { c.k_grid = to_sizes(v); }},

      RM_STRING("output", "dir", output.dir),
  };
  return table;
}

#undef RM_DOUBLE
#undef RM_SIZE
#undef RM_STRING

}  // namespace

void set_config_value(AppConfig& config, const std::string& section, const std::string& key,
                      const std::string& value) {
  for (const auto& f : fields()) {
    if (section == f.section && key == f.key) {
      try {
        f.set(config, value);
      } catch (const ConfigError& e) {
        throw ConfigError(section + "." + key + ": " + e.what() + " (got '" + value + "')");
      }
      return;
    }
  }
  throw ConfigError("unknown key " + section + "." + key);
}

AppConfig parse_config(std::string_view text, const std::string& source) {
  AppConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      bool known = false;
      for (const auto& f : fields()) known = known || section == f.section;
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    try {
      set_config_value(config, section, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return config;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

void apply_override(AppConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw ConfigError("override '" + std::string(assignment) + "' is not section.key=value");
  }
  set_config_value(config, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
                   trim(assignment.substr(eq + 1)));
}

std::string dump_config(const AppConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      section = f.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

std::shared_ptr<const Panel> make_panel(const DataConfig& data) {
  if (!data.csv.empty()) return std::make_shared<const Panel>(load_csv(data.csv));
  if (data.planted.empty()) {
    return std::make_shared<const Panel>(
        synth_panel(data.synthetic_stocks, data.synthetic_days, data.synthetic_seed));
  }
  const Expression planted = parse(data.planted);
  return std::make_shared<const Panel>(synth_panel(data.synthetic_stocks, data.synthetic_days,
                                                   data.synthetic_seed,
                                                   PlantedAlpha{&planted, data.planted_weight}));
}

SplitSpec make_split(const SplitConfig& split, const Panel& panel) {
  SplitSpec spec;
  if (!split.train_end.empty() || !split.valid_end.empty()) {
    if (split.train_end.empty() || split.valid_end.empty()) {
      throw ConfigError("split.train_end and split.valid_end must be set together");
    }
    spec = SplitSpec::by_dates(panel, split.train_end, split.valid_end);
  } else {
    spec = SplitSpec::by_fraction(panel.n_days(), split.train_fraction, split.valid_fraction);
  }
  spec.validate(panel.n_days());
  return spec;
}

}  // namespace riskminer
