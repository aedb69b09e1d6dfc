#include "riskminer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "riskminer/errors.hpp"

namespace riskminer {

namespace {

void check_shapes(const Matrix& a, const Matrix& b, DateRange range,
                  std::span<const std::uint8_t> tradable) {
  if (!a.same_shape(b)) throw ArgumentError("metric inputs have different shapes");
  if (range.end > a.cols()) throw ArgumentError("date range exceeds matrix width");
  if (!tradable.empty() && tradable.size() != a.rows() * a.cols()) {
    throw ArgumentError("tradable mask shape mismatch");
  }
}

// Gathers the jointly present (and tradable) cells of one day.
void gather_day(const Matrix& a, const Matrix& b, std::size_t day,
                std::span<const std::uint8_t> tradable, std::vector<double>& xs,
                std::vector<double>& ys) {
  xs.clear();
  ys.clear();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double x = a(r, day);
    const double y = b(r, day);
    if (is_missing(x) || is_missing(y)) continue;
    if (!tradable.empty() && !tradable[r * a.cols() + day]) continue;
    xs.push_back(x);
    ys.push_back(y);
  }
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double ratio_to_std(const std::vector<double>& v) {
  const double m = mean_of(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  const double sd = std::sqrt(sq / static_cast<double>(v.size()));
  return sd > 0.0 ? m / sd : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || n != y.size()) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

MetricReport compute_ic(const Matrix& alpha, const Matrix& target, DateRange range,
                        std::span<const std::uint8_t> tradable) {
  check_shapes(alpha, target, range, tradable);
  MetricReport report;
  std::vector<double> xs, ys;
  for (std::size_t d = range.begin; d < range.end; ++d) {
    gather_day(alpha, target, d, tradable, xs, ys);
    const double ic = pearson(xs, ys);
    if (std::isnan(ic)) continue;
    const double rank_ic = pearson(average_ranks(xs), average_ranks(ys));
    report.per_day.push_back({d, ic, rank_ic});
  }
  if (report.per_day.empty()) throw EmptyOverlap("no day has two or more comparable cells");

  std::vector<double> ics, rank_ics;
  for (const auto& m : report.per_day) {
    ics.push_back(m.ic);
    rank_ics.push_back(m.rank_ic);
  }
  report.ic = mean_of(ics);
  report.rank_ic = mean_of(rank_ics);
  report.icir = ratio_to_std(ics);
  report.rank_icir = ratio_to_std(rank_ics);
  return report;
}

double compute_mut_ic(const Matrix& a, const Matrix& b, DateRange range,
                      std::span<const std::uint8_t> tradable) {
  check_shapes(a, b, range, tradable);
  std::vector<double> xs, ys;
  double sum = 0.0;
  std::size_t days = 0;
  for (std::size_t d = range.begin; d < range.end; ++d) {
    gather_day(a, b, d, tradable, xs, ys);
    const double c = pearson(xs, ys);
    if (std::isnan(c)) continue;
    sum += c;
    ++days;
  }
  if (days == 0) throw EmptyOverlap("no day has two or more comparable cells");
  return sum / static_cast<double>(days);
}

void write_metric_csv(const MetricReport& report, const std::vector<std::string>& dates,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "date,ic,rank_ic\n";
  char buf[96];
  for (const auto& m : report.per_day) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", m.ic, m.rank_ic);
    out << dates.at(m.day) << ',' << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string metric_summary_json(const MetricReport& report) {
  auto finite_or_null = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["ic"] = finite_or_null(report.ic);
  j["icir"] = finite_or_null(report.icir);
  j["rank_ic"] = finite_or_null(report.rank_ic);
  j["rank_icir"] = finite_or_null(report.rank_icir);
  j["days"] = report.per_day.size();
  return j.dump();
}

}  // namespace riskminer
