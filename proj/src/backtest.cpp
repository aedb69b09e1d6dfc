#include "riskminer/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "riskminer/errors.hpp"

namespace riskminer {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void StrategyConfig::validate() const {
  if (k < 1) throw ArgumentError("k must be at least 1");
  if (rebalance_every < 1) throw ArgumentError("rebalance_every must be at least 1");
  if (!(cost_bps >= 0.0) || !std::isfinite(cost_bps)) {
    throw ArgumentError("cost_bps must be a non-negative number");
  }
}

EquityCurve run_backtest(const Matrix& scores, const Panel& panel, const StrategyConfig& config,
                         DateRange range) {
  config.validate();
  const std::size_t n = panel.n_stocks();
  if (scores.rows() != n || scores.cols() != panel.n_days()) {
    throw ArgumentError("score matrix does not match the panel shape");
  }
  if (range.empty() || range.end > panel.n_days()) throw ArgumentError("invalid backtest range");

  const Matrix& close = panel.feature(Feature::Close);
  // Last known close per stock, carried over missing days.
  std::vector<double> price(n, kMissing);
  auto refresh_prices = [&](std::size_t day) {
    for (std::size_t i = 0; i < n; ++i) {
      const double c = close(i, day);
      if (!is_missing(c) && c > 0.0) price[i] = c;
    }
  };

  // Stock order for tie-breaking: by symbol.
  std::vector<std::size_t> by_symbol(n);
  std::iota(by_symbol.begin(), by_symbol.end(), 0);
  std::stable_sort(by_symbol.begin(), by_symbol.end(), [&](std::size_t a, std::size_t b) {
    return panel.symbols()[a] < panel.symbols()[b];
  });

  EquityCurve curve;
  std::vector<double> shares(n, 0.0);
  double cash = 1.0;
  const double cost_rate = config.cost_bps * 1e-4;

  for (std::size_t day = range.begin; day < range.end; ++day) {
    refresh_prices(day);
    double value = cash;
    for (std::size_t i = 0; i < n; ++i) {
      if (shares[i] != 0.0) value += shares[i] * price[i];
    }
    double turnover = 0.0;

    const std::size_t offset = day - range.begin;
    if (offset % config.rebalance_every == 0 && day + 1 < range.end) {
      std::vector<std::size_t> candidates;
      for (std::size_t i : by_symbol) {
        if (panel.tradable(i, day) && !is_missing(scores(i, day)) && !is_missing(price[i]) &&
            !is_missing(close(i, day))) {
          candidates.push_back(i);
        }
      }
      std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return scores(a, day) > scores(b, day);
      });
      Rebalance reb;
      reb.day = day;
      reb.short_universe = candidates.size() < config.k;
      if (reb.short_universe && config.strict) {
        throw InsufficientUniverse("only " + std::to_string(candidates.size()) +
                                   " tradable stocks on " + panel.dates()[day]);
      }
      if (candidates.size() > config.k) candidates.resize(config.k);
      reb.holdings = candidates;

      std::vector<double> target(n, 0.0);
      const double m = static_cast<double>(candidates.size());
      for (std::size_t i : candidates) target[i] = 1.0 / m;
      for (std::size_t i = 0; i < n; ++i) {
        const double held = shares[i] != 0.0 ? shares[i] * price[i] / value : 0.0;
        turnover += std::abs(target[i] - held);
      }
      value *= 1.0 - cost_rate * turnover;
      std::fill(shares.begin(), shares.end(), 0.0);
      cash = 0.0;
      if (candidates.empty()) {
        cash = value;
      } else {
        for (std::size_t i : candidates) shares[i] = value * target[i] / price[i];
      }
      reb.turnover = turnover;
      curve.rebalances.push_back(std::move(reb));
    }

    curve.dates.push_back(panel.dates()[day]);
    curve.values.push_back(value);
    curve.turnover.push_back(turnover);
  }
  return curve;
}

double cumulative_return(const EquityCurve& curve) {
  if (curve.values.empty()) throw ArgumentError("empty equity curve");
  return curve.values.back() / curve.values.front() - 1.0;
}

std::vector<GridPoint> grid_search_k(const Matrix& scores, const Panel& panel,
                                     const StrategyConfig& config, DateRange range,
                                     const std::vector<std::size_t>& ks) {
  std::vector<GridPoint> out;
  for (std::size_t k : ks) {
    StrategyConfig c = config;
    c.k = k;
    out.push_back({k, cumulative_return(run_backtest(scores, panel, c, range))});
  }
  return out;
}

std::size_t best_k(const std::vector<GridPoint>& grid) {
  if (grid.empty()) throw ArgumentError("empty grid");
  const GridPoint* best = &grid.front();
  for (const auto& g : grid) {
    if (g.cumulative_return > best->cumulative_return ||
        (g.cumulative_return == best->cumulative_return && g.k < best->k)) {
      best = &g;
    }
  }
  return best->k;
}

void write_equity_csv(const EquityCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "date,value,turnover\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    out << curve.dates[i] << ',' << fmt(curve.values[i]) << ',' << fmt(curve.turnover[i]) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_holdings_csv(const EquityCurve& curve, const Panel& panel,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "date,symbol,weight\n";
  for (const auto& r : curve.rebalances) {
    const double w = r.holdings.empty() ? 0.0 : 1.0 / static_cast<double>(r.holdings.size());
    for (std::size_t i : r.holdings) {
      out << panel.dates()[r.day] << ',' << panel.symbols()[i] << ',' << fmt(w) << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace riskminer
