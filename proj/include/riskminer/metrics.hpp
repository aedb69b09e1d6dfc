#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "riskminer/matrix.hpp"
#include "riskminer/panel.hpp"

namespace riskminer {

struct DailyMetric {
  std::size_t day = 0;
  double ic = 0.0;       // cross-sectional Pearson
  double rank_ic = 0.0;  // cross-sectional Spearman
};

/// Signal quality over a date range. IC and RankIC are time averages of the
/// daily cross-sectional correlations; the IR figures divide them by the
/// population standard deviation of the daily values (NaN when it is 0).
struct MetricReport {
  double ic = 0.0;
  double icir = 0.0;
  double rank_ic = 0.0;
  double rank_icir = 0.0;
  std::vector<DailyMetric> per_day;
};

/// Pearson correlation; NaN when fewer than two points or a side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Ranks 1..n with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Daily IC / RankIC of `alpha` against `target` over `range`. Only cells
/// where both are present and the stock is tradable (when `tradable` is
/// non-empty) take part. Days with fewer than two such cells, or with a
/// constant side, are skipped. Throws EmptyOverlap if no day qualifies.
MetricReport compute_ic(const Matrix& alpha, const Matrix& target, DateRange range,
                        std::span<const std::uint8_t> tradable = {});

/// Mean daily cross-sectional Pearson between two alphas (mutual IC).
/// Symmetric in its arguments. Throws EmptyOverlap if no day qualifies.
double compute_mut_ic(const Matrix& a, const Matrix& b, DateRange range,
                      std::span<const std::uint8_t> tradable = {});

/// One row per scored day: date,ic,rank_ic.
void write_metric_csv(const MetricReport& report, const std::vector<std::string>& dates,
                      const std::filesystem::path& path);

/// {"ic":..,"icir":..,"rank_ic":..,"rank_icir":..,"days":..} on one line.
std::string metric_summary_json(const MetricReport& report);

}  // namespace riskminer
