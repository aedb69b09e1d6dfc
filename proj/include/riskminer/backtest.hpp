#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "riskminer/matrix.hpp"
#include "riskminer/panel.hpp"

namespace riskminer {

struct StrategyConfig {
  std::size_t k = 40;
  std::size_t rebalance_every = 5;  // trading days
  double cost_bps = 0.0;            // one-way, charged on traded weight
  /// Throw InsufficientUniverse instead of holding every tradable stock when
  /// fewer than k are available on a rebalance day.
  bool strict = false;

  /// Throws ArgumentError unless k >= 1, rebalance_every >= 1, cost_bps >= 0.
  void validate() const;
};

struct Rebalance {
  std::size_t day = 0;                // panel day index
  std::vector<std::size_t> holdings;  // stock indices, best score first
  double turnover = 0.0;              // sum |w_new - w_drifted|
  bool short_universe = false;        // fewer than k candidates were available
};

/// Daily mark-to-market of the strategy. values[0] = 1 at the close of the
/// first day; values[i] is the value at the close of dates[i].
struct EquityCurve {
  std::vector<std::string> dates;
  std::vector<double> values;
  std::vector<double> turnover;  // traded weight per day (0 off rebalance days)
  std::vector<Rebalance> rebalances;
};

/// Top-k equal-weight long-only strategy. On every `rebalance_every`-th day
/// of `range` (starting with its first day, excluding its last) the stocks
/// that are tradable and have a score are ranked by score, highest first,
/// ties broken by symbol; the top k are bought in equal weight at that day's
/// close and held, drifting with prices, until the next rebalance. Value
/// moves with close-to-close returns; a missing close carries the last one.
/// With no candidates the book is held in cash.
EquityCurve run_backtest(const Matrix& scores, const Panel& panel, const StrategyConfig& config,
                         DateRange range);

/// values.back() / values.front() - 1.
double cumulative_return(const EquityCurve& curve);

struct GridPoint {
  std::size_t k = 0;
  double cumulative_return = 0.0;
};

/// run_backtest for each k in `ks` (other settings from `config`).
std::vector<GridPoint> grid_search_k(const Matrix& scores, const Panel& panel,
                                     const StrategyConfig& config, DateRange range,
                                     const std::vector<std::size_t>& ks);

/// k with the highest cumulative return; the smallest such k on ties.
std::size_t best_k(const std::vector<GridPoint>& grid);

/// Columns: date,value,turnover.
void write_equity_csv(const EquityCurve& curve, const std::filesystem::path& path);
/// Columns: date,symbol,weight; one row per holding at each rebalance.
void write_holdings_csv(const EquityCurve& curve, const Panel& panel,
                        const std::filesystem::path& path);

}  // namespace riskminer
