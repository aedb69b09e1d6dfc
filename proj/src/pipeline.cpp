#include "riskminer/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "riskminer/errors.hpp"
#include "riskminer/metrics.hpp"

namespace riskminer {

namespace {

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw CheckpointError("bad number '" + s + "'");
  return v;
}

std::uint64_t policy_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 1; }

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(pool_size >= 1, "pool_size must be at least 1");
  require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be a non-negative number");
  require(max_episode_len >= 3, "max_episode_len must be at least 3");
  require(cycles_per_iteration >= 1, "cycles_per_iteration must be at least 1");
  require(quantile_level > 0.0 && quantile_level < 1.0, "quantile_level must lie in (0, 1)");
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive");
  require(policy_lr >= 0.0 && std::isfinite(policy_lr), "policy_lr must be non-negative");
  require(discount > 0.0 && discount <= 1.0, "discount must lie in (0, 1]");
  require(c_puct > 0.0 && std::isfinite(c_puct), "c_puct must be positive");
  require(horizon == 5 || horizon == 10, "horizon must be 5 or 10");
  require(fit.lr > 0.0 && fit.max_iters >= 1 && fit.tol >= 0.0, "invalid fit settings");
  require(policy.embed_dim >= 1 && policy.hidden_dim >= 1 && policy.layers >= 1,
          "policy dimensions must be positive");
  (void)alphabet();
}

std::vector<Token> RunConfig::alphabet() const {
  if (vocabulary.empty()) {
    auto all = token_vocabulary();
    return {all.begin(), all.end()};
  }
  std::vector<Token> out;
  for (const auto& name : vocabulary) {
    const auto tok = find_token(name);
    if (!tok) throw ConfigError("unknown token '" + name + "' in vocabulary");
    out.push_back(*tok);
  }
  const Grammar g(out);
  if (g.min_completion({}) == Grammar::kUnreachable) {
    throw ConfigError("vocabulary cannot form any expression");
  }
  return out;
}

void write_report_csv(const std::vector<IterationReport>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,train_ic,valid_ic,pool_size,quantile,mean_return\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << fmt(r.train_ic) << ',' << fmt(r.valid_ic) << ',' << r.pool_size
        << ',' << fmt(r.quantile) << ',' << fmt(r.mean_return) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Matrix training_target(const Panel& panel, const SplitSpec& split, int horizon) {
  return restrict_target(panel.forward_returns(horizon), split.train, horizon);
}

double composite_ic_on(const AlphaPool& pool, DateRange range, int horizon) {
  if (pool.empty() || range.empty()) return 0.0;
  const Panel& panel = *pool.panel();
  const Matrix target = restrict_target(panel.forward_returns(horizon), range, horizon);
  try {
    return compute_ic(pool.composite(range), target, range, panel.tradable_mask()).ic;
  } catch (const EmptyOverlap&) {
    return 0.0;
  }
}

Miner::Miner(std::shared_ptr<const Panel> panel, SplitSpec split, RunConfig config)
    : panel_(std::move(panel)),
      split_(split),
      config_(std::move(config)),
      rng_(config_.seed),
      policy_(config_.policy, policy_seed(config_.seed)) {
  config_.validate();
  split_.validate(panel_->n_days());
  pool_ = std::make_unique<AlphaPool>(panel_, training_target(*panel_, split_, config_.horizon),
                                      split_.train, config_.pool_size, config_.fit);
  EnvConfig env_config;
  env_config.lambda = config_.lambda;
  env_config.max_episode_len = config_.max_episode_len;
  env_ = std::make_unique<AlphaMiningEnv>(*pool_, Grammar(config_.alphabet()), env_config, rng_);
  tracker_.level = config_.quantile_level;
  tracker_.beta = config_.beta;
}

double Miner::valid_ic() const { return composite_ic_on(*pool_, split_.valid, config_.horizon); }

bool Miner::finished() const noexcept {
  if (iteration_ >= config_.iterations) return true;
  return config_.patience > 0 && stall_ >= config_.patience;
}

IterationReport Miner::run_iteration() {
  SearchTree tree;
  ReplayBuffer buffer(config_.cycles_per_iteration);
  MctsConfig mcts;
  mcts.c_puct = config_.c_puct;
  mcts.discount = config_.discount;
  double total_return = 0.0;
  const CachedPolicyPrior prior(policy_);
  for (std::size_t c = 0; c < config_.cycles_per_iteration; ++c) {
    const Trajectory tau = search_cycle(tree, prior, *env_, buffer, rng_, mcts);
    total_return += tau.cumulative_reward();
  }
  train_epoch(policy_, buffer, tracker_, config_.policy_lr, config_.update_mode);

  ++iteration_;
  IterationReport row;
  row.iteration = iteration_;
  row.train_ic = pool_->composite_ic();
  row.valid_ic = valid_ic();
  row.pool_size = pool_->size();
  row.quantile = tracker_.q;
  row.mean_return = total_return / static_cast<double>(config_.cycles_per_iteration);
  if (row.valid_ic > best_valid_) {
    best_valid_ = row.valid_ic;
    stall_ = 0;
  } else {
    ++stall_;
  }
  report_.push_back(row);
  return row;
}

void Miner::run(const std::filesystem::path& checkpoint_dir,
                const std::function<void(const IterationReport&)>& on_iteration) {
  while (!finished()) {
    const IterationReport row = run_iteration();
    if (!checkpoint_dir.empty()) save_checkpoint(checkpoint_dir);
    if (on_iteration) on_iteration(row);
  }
}

void Miner::save_checkpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  // Write to temporaries first so an interrupted save keeps the previous state.
  const auto tmp = [&](const char* name) { return dir / (std::string(name) + ".tmp"); };
  pool_->save(tmp("pool.txt"));
  policy_.save(tmp("policy.bin"));
  write_report_csv(report_, tmp("report.csv"));
  {
    std::ofstream out(tmp("state.txt"));
    if (!out) throw IoError("cannot write " + tmp("state.txt").string());
    out << "riskminer-state 1\n";
    out << "iteration " << iteration_ << '\n';
    out << "quantile " << hex(tracker_.q) << '\n';
    out << "best_valid " << hex(best_valid_) << '\n';
    out << "stall " << stall_ << '\n';
    out << "rng " << rng_.serialize() << '\n';
    out << "report " << report_.size() << '\n';
    for (const auto& r : report_) {
      out << r.iteration << ' ' << hex(r.train_ic) << ' ' << hex(r.valid_ic) << ' ' << r.pool_size
          << ' ' << hex(r.quantile) << ' ' << hex(r.mean_return) << '\n';
    }
    if (!out) throw IoError("failed writing state");
  }
  for (const char* name : {"pool.txt", "policy.bin", "report.csv", "state.txt"}) {
    std::filesystem::rename(tmp(name), dir / name);
  }
}

void Miner::load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "state.txt");
  if (!in) throw IoError("cannot open " + (dir / "state.txt").string());
  auto expect = [&](const char* key) {
    std::string word;
    if (!(in >> word) || word != key) {
      throw CheckpointError("state.txt: expected '" + std::string(key) + "'");
    }
  };
  auto read_word = [&]() {
    std::string w;
    if (!(in >> w)) throw CheckpointError("state.txt: truncated");
    return w;
  };
  std::string magic = read_word();
  if (magic != "riskminer-state" || read_word() != "1") {
    throw CheckpointError("state.txt: not a miner state file");
  }
  expect("iteration");
  const std::size_t iteration = std::stoul(read_word());
  expect("quantile");
  const double q = parse_hex(read_word());
  expect("best_valid");
  const double best = parse_hex(read_word());
  expect("stall");
  const std::size_t stall = std::stoul(read_word());
  expect("rng");
  std::string rng_state;
  std::getline(in >> std::ws, rng_state);
  expect("report");
  const std::size_t n = std::stoul(read_word());
  std::vector<IterationReport> rows(n);
  for (auto& r : rows) {
    r.iteration = std::stoul(read_word());
    r.train_ic = parse_hex(read_word());
    r.valid_ic = parse_hex(read_word());
    r.pool_size = std::stoul(read_word());
    r.quantile = parse_hex(read_word());
    r.mean_return = parse_hex(read_word());
  }

  auto pool = std::make_unique<AlphaPool>(AlphaPool::load(
      dir / "pool.txt", panel_, training_target(*panel_, split_, config_.horizon), config_.fit));
  if (pool->train_range() != split_.train || pool->capacity() != config_.pool_size) {
    throw CheckpointError("pool checkpoint does not match the run configuration");
  }
  Policy policy = Policy::load(dir / "policy.bin");
  if (!(policy.config() == config_.policy)) {
    throw CheckpointError("policy checkpoint does not match the run configuration");
  }
  rng_.deserialize(rng_state);

  pool_ = std::move(pool);
  EnvConfig env_config;
  env_config.lambda = config_.lambda;
  env_config.max_episode_len = config_.max_episode_len;
  env_ = std::make_unique<AlphaMiningEnv>(*pool_, Grammar(config_.alphabet()), env_config, rng_);
  policy_ = std::move(policy);
  tracker_.q = q;
  best_valid_ = best;
  stall_ = stall;
  iteration_ = iteration;
  report_ = std::move(rows);
}

std::vector<SweepRow> quantile_sweep(std::shared_ptr<const Panel> panel, const SplitSpec& split,
                                     const RunConfig& config, const std::vector<double>& levels) {
  if (levels.empty()) throw ArgumentError("quantile sweep needs at least one level");
  for (double l : levels) {
    if (!(l > 0.0 && l < 1.0)) throw ArgumentError("quantile levels must lie in (0, 1)");
  }
  std::vector<SweepRow> rows;
  for (double level : levels) {
    RunConfig c = config;
    c.quantile_level = level;
    Miner miner(panel, split, c);
    miner.run();
    SweepRow row;
    row.level = level;
    row.train_ic = miner.pool().empty() ? 0.0 : miner.pool().composite_ic();
    row.valid_ic = miner.valid_ic();
    row.best_valid_ic = miner.report().empty() ? row.valid_ic : miner.best_valid_ic();
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "level,train_ic,valid_ic,best_valid_ic\n";
  for (const auto& r : rows) {
    out << fmt(r.level) << ',' << fmt(r.train_ic) << ',' << fmt(r.valid_ic) << ','
        << fmt(r.best_valid_ic) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace riskminer
