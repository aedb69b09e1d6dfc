#include "riskminer/panel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "riskminer/errors.hpp"
#include "riskminer/expression.hpp"
#include "riskminer/rng.hpp"

namespace riskminer {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

std::string format_day(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::vector<std::string> business_days(std::size_t n) {
  using namespace std::chrono;
  std::vector<std::string> out;
  out.reserve(n);
  sys_days d = year{2020} / January / 2;
  while (out.size() < n) {
    const weekday wd{d};
    if (wd != Saturday && wd != Sunday) out.push_back(format_day(d));
    d += days{1};
  }
  return out;
}

void zscore_by_day(Matrix& m, std::span<const std::uint8_t> tradable) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double v = m(r, c);
      if (is_missing(v) || !tradable[r * m.cols() + c]) continue;
      sum += v;
      ++n;
    }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double v = m(r, c);
      if (is_missing(v) || !tradable[r * m.cols() + c]) continue;
      sq += (v - mean) * (v - mean);
    }
    const double sd = n >= 2 ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double& v = m(r, c);
      if (sd <= 0.0 || is_missing(v) || !tradable[r * m.cols() + c]) {
        v = kMissing;
      } else {
        v = (v - mean) / sd;
      }
    }
  }
}

}  // namespace

// ------------------------------------------------------------------- Panel

Panel::Panel(std::vector<std::string> symbols, std::vector<std::string> dates,
             std::array<Matrix, kFeatureCount> features, std::vector<std::uint8_t> tradable)
    : symbols_(std::move(symbols)),
      dates_(std::move(dates)),
      features_(std::move(features)),
      tradable_(std::move(tradable)) {
  const std::size_t n = symbols_.size();
  const std::size_t t = dates_.size();
  for (const auto& f : features_) {
    if (f.rows() != n || f.cols() != t) throw DataError("feature matrix shape mismatch");
  }
  if (tradable_.size() != n * t) throw DataError("tradable mask shape mismatch");
  for (std::size_t i = 1; i < dates_.size(); ++i) {
    if (!(dates_[i - 1] < dates_[i])) {
      throw DataError("dates not strictly increasing at " + dates_[i]);
    }
  }
  std::vector<std::string> sorted = symbols_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DataError("duplicate symbol in panel");
  }
  const Matrix& close = feature(Feature::Close);
  returns5_ = compute_forward_returns(close, 5);
  returns10_ = compute_forward_returns(close, 10);
}

const Matrix& Panel::forward_returns(int horizon) const {
  if (horizon == 5) return returns5_;
  if (horizon == 10) return returns10_;
  throw ArgumentError("forward-return horizon must be 5 or 10, got " + std::to_string(horizon));
}

void Panel::set_forward_returns(int horizon, Matrix returns) {
  if (returns.rows() != n_stocks() || returns.cols() != n_days()) {
    throw DataError("forward-return matrix shape mismatch");
  }
  if (horizon == 5) {
    returns5_ = std::move(returns);
  } else if (horizon == 10) {
    returns10_ = std::move(returns);
  } else {
    throw ArgumentError("forward-return horizon must be 5 or 10");
  }
}

std::optional<std::size_t> Panel::day_index(const std::string& date) const {
  const auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
  if (it == dates_.end() || *it != date) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

bool operator==(const Panel& a, const Panel& b) {
  if (a.symbols_ != b.symbols_ || a.dates_ != b.dates_ || a.tradable_ != b.tradable_) return false;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!bitwise_equal(a.features_[i], b.features_[i])) return false;
  }
  return bitwise_equal(a.returns5_, b.returns5_) && bitwise_equal(a.returns10_, b.returns10_);
}

Matrix compute_forward_returns(const Matrix& close, int horizon) {
  Matrix out(close.rows(), close.cols());
  const std::size_t h = static_cast<std::size_t>(horizon);
  for (std::size_t r = 0; r < close.rows(); ++r) {
    for (std::size_t c = 0; c + h < close.cols(); ++c) {
      const double now = close(r, c);
      const double later = close(r, c + h);
      if (is_missing(now) || is_missing(later) || now == 0.0) continue;
      out(r, c) = later / now - 1.0;
    }
  }
  return out;
}

Matrix restrict_target(const Matrix& target, DateRange range, int horizon) {
  Matrix out = target;
  const std::size_t h = static_cast<std::size_t>(horizon);
  const std::size_t first = range.end >= range.begin + h ? range.end - h : range.begin;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = first; c < out.cols(); ++c) out(r, c) = kMissing;
  }
  return out;
}

// --------------------------------------------------------------- SplitSpec

SplitSpec SplitSpec::by_fraction(std::size_t n_days, double train_fraction, double valid_fraction) {
  if (!(train_fraction > 0.0) || !(valid_fraction >= 0.0) || train_fraction + valid_fraction >= 1.0) {
    throw ArgumentError("split fractions must satisfy train > 0, valid >= 0, train + valid < 1");
  }
  const auto train_end = static_cast<std::size_t>(std::floor(static_cast<double>(n_days) * train_fraction));
  const auto valid_end = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_days) * (train_fraction + valid_fraction)));
  SplitSpec s{{0, train_end}, {train_end, valid_end}, {valid_end, n_days}};
  s.validate(n_days);
  return s;
}

SplitSpec SplitSpec::by_dates(const Panel& panel, const std::string& train_end,
                              const std::string& valid_end) {
  const auto& dates = panel.dates();
  const auto upper = [&](const std::string& d) {
    return static_cast<std::size_t>(std::upper_bound(dates.begin(), dates.end(), d) - dates.begin());
  };
  const std::size_t t = upper(train_end);
  const std::size_t v = upper(valid_end);
  SplitSpec s{{0, t}, {t, v}, {v, panel.n_days()}};
  s.validate(panel.n_days());
  return s;
}

void SplitSpec::validate(std::size_t n_days) const {
  if (train.empty() || valid.empty() || test.empty()) {
    throw ArgumentError("every split must contain at least one day");
  }
  if (!(train.end <= valid.begin && valid.end <= test.begin && test.end <= n_days)) {
    throw ArgumentError("splits must be disjoint and ordered train < valid < test");
  }
}

DateRange SplitSpec::by_name(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw ArgumentError("unknown split '" + name + "' (expected train, valid or test)");
}

// --------------------------------------------------------------------- CSV

Panel load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const std::array<std::string, 8> required = {"date", "symbol", "open", "high",
                                               "low",  "close",  "volume", "vwap"};
  for (const auto& name : required) {
    if (!col.count(name)) throw SchemaError(path.string() + ": missing column '" + name + "'");
  }
  const auto tradable_col = col.find("tradable");

  struct Row {
    std::string date, symbol;
    std::array<double, kFeatureCount> values{};
    bool tradable = true;
    std::size_t line = 0;
  };
  std::vector<Row> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    Row row;
    row.line = line_no;
    row.date = fields[col["date"]];
    row.symbol = fields[col["symbol"]];
    if (!is_iso_date(row.date)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": date '" + row.date +
                      "' is not YYYY-MM-DD");
    }
    if (row.symbol.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty symbol");
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const std::string name(feature_name(static_cast<Feature>(f)));
      const std::string& text = fields[col[name]];
      if (text.empty()) {
        row.values[f] = kMissing;
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end != text.c_str() + text.size() || !std::isfinite(v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": cannot parse " + name +
                        " value '" + text + "'");
      }
      row.values[f] = v;
    }
    if (tradable_col != col.end()) {
      const std::string& t = fields[tradable_col->second];
      if (t == "1" || t == "true" || t.empty()) {
        row.tradable = true;
      } else if (t == "0" || t == "false") {
        row.tradable = false;
      } else {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": cannot parse tradable '" +
                        t + "'");
      }
    }
    const auto [it, inserted] = seen.emplace(std::make_pair(row.date, row.symbol), line_no);
    if (!inserted) {
      throw DataError(path.string() + ": duplicate (date, symbol) = (" + row.date + ", " +
                      row.symbol + ") on lines " + std::to_string(it->second) + " and " +
                      std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");

  std::vector<std::string> dates, symbols;
  for (const auto& r : rows) {
    dates.push_back(r.date);
    symbols.push_back(r.symbol);
  }
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());

  const std::size_t n = symbols.size();
  const std::size_t t = dates.size();
  std::array<Matrix, kFeatureCount> features;
  for (auto& f : features) f = Matrix(n, t);
  std::vector<std::uint8_t> tradable(n * t, 0);
  for (const auto& r : rows) {
    const auto si = static_cast<std::size_t>(
        std::lower_bound(symbols.begin(), symbols.end(), r.symbol) - symbols.begin());
    const auto di = static_cast<std::size_t>(
        std::lower_bound(dates.begin(), dates.end(), r.date) - dates.begin());
    for (std::size_t f = 0; f < kFeatureCount; ++f) features[f](si, di) = r.values[f];
    tradable[si * t + di] = r.tradable ? 1 : 0;
  }
  return Panel(std::move(symbols), std::move(dates), std::move(features), std::move(tradable));
}

void write_csv(const Panel& panel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "date,symbol,open,high,low,close,volume,vwap,tradable\n";
  char buf[64];
  for (std::size_t d = 0; d < panel.n_days(); ++d) {
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      out << panel.dates()[d] << ',' << panel.symbols()[s];
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const double v = panel.feature(static_cast<Feature>(f))(s, d);
        out << ',';
        if (!is_missing(v)) {
          std::snprintf(buf, sizeof(buf), "%.17g", v);
          out << buf;
        }
      }
      out << ',' << (panel.tradable(s, d) ? 1 : 0) << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// --------------------------------------------------------------- synthetic

Panel synth_panel(std::size_t n_stocks, std::size_t n_days, std::uint64_t seed,
                  std::optional<PlantedAlpha> planted) {
  if (n_stocks < 2 || n_days < 70) {
    throw ArgumentError("synth_panel needs n_stocks >= 2 and n_days >= 70");
  }
  if (planted && (!planted->expression || !(std::abs(planted->weight) <= 1.0))) {
    throw ArgumentError("planted alpha needs an expression and |weight| <= 1");
  }
  Rng rng(seed);

  std::vector<std::string> symbols;
  for (std::size_t i = 0; i < n_stocks; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "S%03zu", i);
    symbols.emplace_back(buf);
  }
  std::vector<std::string> dates = business_days(n_days);

  std::array<Matrix, kFeatureCount> f;
  for (auto& m : f) m = Matrix(n_stocks, n_days);
  std::vector<std::uint8_t> tradable(n_stocks * n_days, 1);

  std::vector<double> market(n_days);
  for (auto& m : market) m = 0.01 * rng.normal();

  auto& open = f[static_cast<std::size_t>(Feature::Open)];
  auto& high = f[static_cast<std::size_t>(Feature::High)];
  auto& low = f[static_cast<std::size_t>(Feature::Low)];
  auto& close = f[static_cast<std::size_t>(Feature::Close)];
  auto& volume = f[static_cast<std::size_t>(Feature::Volume)];
  auto& vwap = f[static_cast<std::size_t>(Feature::Vwap)];

  for (std::size_t i = 0; i < n_stocks; ++i) {
    const double sigma = rng.uniform(0.01, 0.03);
    const double drift = 0.0005 * rng.normal();
    const double beta = rng.uniform(0.5, 1.5);
    const double volume_scale = std::exp(rng.uniform(std::log(1e5), std::log(1e7)));
    double prev = std::exp(rng.uniform(std::log(5.0), std::log(100.0)));
    for (std::size_t d = 0; d < n_days; ++d) {
      const double o = prev * std::exp(0.3 * sigma * rng.normal());
      const double c = prev * std::exp(drift + beta * market[d] + sigma * rng.normal());
      const double h = std::max(o, c) * std::exp(0.5 * sigma * std::abs(rng.normal()));
      const double l = std::min(o, c) * std::exp(-0.5 * sigma * std::abs(rng.normal()));
      open(i, d) = o;
      close(i, d) = c;
      high(i, d) = h;
      low(i, d) = l;
      vwap(i, d) = 0.25 * (o + h + l + c);
      volume(i, d) = volume_scale * std::exp(0.5 * rng.normal());
      if (rng.uniform() < 0.01) tradable[i * n_days + d] = 0;
      prev = c;
    }
  }

  Panel panel(std::move(symbols), std::move(dates), std::move(f), std::move(tradable));
  if (!planted) return panel;

  Matrix signal = evaluate(*planted->expression, panel);
  zscore_by_day(signal, panel.tradable_mask());
  Matrix returns = panel.forward_returns(5);
  const double w = planted->weight;
  const double noise = std::sqrt(1.0 - w * w);
  constexpr double kScale = 0.05;
  for (std::size_t i = 0; i < n_stocks; ++i) {
    for (std::size_t d = 0; d < n_days; ++d) {
      const double eps = rng.normal();
      if (is_missing(signal(i, d)) || is_missing(returns(i, d))) continue;
      returns(i, d) = kScale * (w * signal(i, d) + noise * eps);
    }
  }
  panel.set_forward_returns(5, std::move(returns));
  return panel;
}

}  // namespace riskminer
