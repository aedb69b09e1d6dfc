#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "riskminer/backtest.hpp"
#include "riskminer/errors.hpp"
#include "test_support.hpp"

using namespace riskminer;

namespace {

const std::filesystem::path kData = RISKMINER_TEST_DATA;

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Matrix random_scores(const Panel& p, Rng& rng) {
  Matrix s(p.n_stocks(), p.n_days());
  for (double& v : s.data()) v = rng.normal();
  return s;
}

DateRange all_days(const Panel& p) { return {0, p.n_days()}; }

}  // namespace

TEST_CASE("golden three-stock ledger") {
  const Panel panel = load_csv(kData / "backtest_panel.csv");
  Matrix scores(panel.n_stocks(), panel.n_days());
  for (const auto& r : read_rows(kData / "backtest_scores.csv")) {
    const auto d = std::find(panel.dates().begin(), panel.dates().end(), r[0]) - panel.dates().begin();
    const auto s = std::find(panel.symbols().begin(), panel.symbols().end(), r[1]) - panel.symbols().begin();
    scores(static_cast<std::size_t>(s), static_cast<std::size_t>(d)) = std::stod(r[2]);
  }
  const StrategyConfig config{2, 3, 10.0, false};
  const EquityCurve curve = run_backtest(scores, panel, config, all_days(panel));
  const auto golden = read_rows(kData / "backtest_golden.csv");
  REQUIRE(curve.values.size() == golden.size());
  for (std::size_t i = 0; i < golden.size(); ++i) {
    CHECK(curve.dates[i] == golden[i][0]);
    CHECK(std::fabs(curve.values[i] - std::stod(golden[i][1])) <= 1e-12);
    CHECK(std::fabs(curve.turnover[i] - std::stod(golden[i][2])) <= 1e-12);
  }
  const double golden_cr = std::stod(golden.back()[1]) / std::stod(golden.front()[1]) - 1.0;
  CHECK(std::fabs(cumulative_return(curve) - golden_cr) <= 1e-12);

  REQUIRE(curve.rebalances.size() == 3);
  CHECK(curve.rebalances[0].holdings == std::vector<std::size_t>{2, 0});
  CHECK(curve.rebalances[1].holdings == std::vector<std::size_t>{1, 0});
  CHECK(curve.rebalances[2].holdings == std::vector<std::size_t>{1, 2});  // tie goes to BBB
  CHECK(curve.rebalances[1].day == 3);
}

TEST_CASE("cumulative return formula") {
  EquityCurve flat;
  flat.values = {1.0, 1.0, 1.0};
  CHECK(cumulative_return(flat) == 0.0);
  EquityCurve up;
  up.values = {1.0, 1.2, 1.5};
  CHECK(cumulative_return(up) == Catch::Approx(0.5).margin(1e-15));
  CHECK_THROWS_AS(cumulative_return(EquityCurve{}), ArgumentError);
}

TEST_CASE("strictly increasing score transforms leave the curve unchanged") {
  const Panel panel = rmtest::random_panel(30, 60, 5);
  Rng rng(6);
  const Matrix base = random_scores(panel, rng);
  const StrategyConfig config{7, 5, 5.0, false};
  const EquityCurve ref = run_backtest(base, panel, config, all_days(panel));
  for (int k = 0; k < 100; ++k) {
    const double a = rng.uniform(0.1, 10.0);
    const double b = rng.uniform(-5.0, 5.0);
    const int kind = k % 4;
    Matrix t = base;
    for (double& v : t.data()) {
      switch (kind) {
        case 0: v = a * v + b; break;
        case 1: v = std::exp(v / 3.0) + b; break;
        case 2: v = v * v * v * a; break;
        default: v = std::atan(v) - b; break;
      }
    }
    const EquityCurve curve = run_backtest(t, panel, config, all_days(panel));
    CHECK(curve.values == ref.values);
  }
}

TEST_CASE("equal scores over the whole universe track the equal-weight market") {
  const Panel panel = rmtest::random_panel(12, 40, 9, 0.0, 0.0);
  const Matrix scores(panel.n_stocks(), panel.n_days(), 1.0);
  const StrategyConfig config{12, 5, 0.0, false};
  const EquityCurve curve = run_backtest(scores, panel, config, all_days(panel));
  const Matrix& close = panel.feature(Feature::Close);
  double v = 1.0;
  std::size_t anchor = 0;
  double anchor_value = 1.0;
  for (std::size_t d = 0; d < panel.n_days(); ++d) {
    if (d > 0) {
      double rel = 0.0;
      for (std::size_t i = 0; i < 12; ++i) rel += close(i, d) / close(i, anchor) / 12.0;
      v = anchor_value * rel;
    }
    if (d % 5 == 0) {
      anchor = d;
      anchor_value = v;
    }
    CHECK(curve.values[d] == Catch::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("perfect foresight with k = 1 dominates single-stock picks") {
  const Panel panel = rmtest::random_panel(8, 50, 13, 0.0, 0.0);
  const Matrix& close = panel.feature(Feature::Close);
  const std::size_t every = 5;
  Matrix oracle(panel.n_stocks(), panel.n_days());
  for (std::size_t d = 0; d < panel.n_days(); ++d) {
    const std::size_t next = std::min(d + every, panel.n_days() - 1);
    for (std::size_t i = 0; i < panel.n_stocks(); ++i) oracle(i, d) = close(i, next) / close(i, d);
  }
  const StrategyConfig config{1, every, 0.0, false};
  const double best = cumulative_return(run_backtest(oracle, panel, config, all_days(panel)));
  Rng rng(14);
  for (int k = 0; k < 200; ++k) {
    const Matrix other = random_scores(panel, rng);
    CHECK(best >= cumulative_return(run_backtest(other, panel, config, all_days(panel))));
  }
  for (std::size_t i = 0; i < panel.n_stocks(); ++i) {
    Matrix fixed(panel.n_stocks(), panel.n_days(), 0.0);
    for (std::size_t d = 0; d < panel.n_days(); ++d) fixed(i, d) = 1.0;
    CHECK(best >= cumulative_return(run_backtest(fixed, panel, config, all_days(panel))));
  }
}

TEST_CASE("single stock buy and hold") {
  const Panel panel = rmtest::random_panel(1, 30, 3, 0.0, 0.0);
  const Matrix scores(1, 30, 0.5);
  const EquityCurve curve = run_backtest(scores, panel, StrategyConfig{1, 5, 0.0, false}, all_days(panel));
  const Matrix& close = panel.feature(Feature::Close);
  CHECK(cumulative_return(curve) == Catch::Approx(close(0, 29) / close(0, 0) - 1.0).margin(1e-12));
  for (std::size_t i = 1; i < curve.rebalances.size(); ++i) CHECK(curve.rebalances[i].turnover == 0.0);
}

TEST_CASE("holdings respect tradability and size") {
  const Panel panel = rmtest::random_panel(20, 60, 17, 0.05, 0.2);
  Rng rng(18);
  const Matrix scores = random_scores(panel, rng);
  const StrategyConfig config{6, 5, 0.0, false};
  const EquityCurve curve = run_backtest(scores, panel, config, DateRange{10, 50});
  CHECK(curve.values.size() == 40);
  CHECK(curve.rebalances.size() == 8);
  for (const auto& r : curve.rebalances) {
    CHECK(r.holdings.size() <= 6);
    std::set<std::size_t> unique(r.holdings.begin(), r.holdings.end());
    CHECK(unique.size() == r.holdings.size());
    for (std::size_t i : r.holdings) CHECK(panel.tradable(i, r.day));
    for (std::size_t j = 1; j < r.holdings.size(); ++j) {
      CHECK(scores(r.holdings[j - 1], r.day) >= scores(r.holdings[j], r.day));
    }
  }
  for (double v : curve.values) CHECK(v > 0.0);
}

TEST_CASE("short universe handling") {
  const Panel panel = rmtest::random_panel(3, 12, 2, 0.0, 0.0);
  const Matrix scores(3, 12, 1.0);
  const EquityCurve curve = run_backtest(scores, panel, StrategyConfig{5, 5, 0.0, false}, DateRange{0, 12});
  for (const auto& r : curve.rebalances) {
    CHECK(r.short_universe);
    CHECK(r.holdings.size() == 3);
  }
  CHECK_THROWS_AS(run_backtest(scores, panel, StrategyConfig{5, 5, 0.0, true}, DateRange{0, 12}),
                  InsufficientUniverse);
  Matrix none(3, 12);  // every score missing: the book stays in cash
  const EquityCurve cash = run_backtest(none, panel, StrategyConfig{1, 5, 0.0, false}, DateRange{0, 12});
  for (double v : cash.values) CHECK(v == 1.0);
  CHECK_THROWS_AS(run_backtest(scores, panel, StrategyConfig{0, 5, 0.0, false}, DateRange{0, 12}),
                  ArgumentError);
  CHECK_THROWS_AS(run_backtest(scores, panel, StrategyConfig{1, 0, 0.0, false}, DateRange{0, 12}),
                  ArgumentError);
}

TEST_CASE("k grid search") {
  const Panel panel = rmtest::random_panel(25, 40, 21, 0.0, 0.0);
  Rng rng(22);
  const Matrix scores = random_scores(panel, rng);
  const std::vector<std::size_t> ks{1, 5, 10, 25};
  const auto grid = grid_search_k(scores, panel, StrategyConfig{}, all_days(panel), ks);
  REQUIRE(grid.size() == 4);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    StrategyConfig c;
    c.k = ks[i];
    CHECK(grid[i].k == ks[i]);
    CHECK(grid[i].cumulative_return == cumulative_return(run_backtest(scores, panel, c, all_days(panel))));
  }
  CHECK(best_k({{10, 0.1}, {20, 0.3}, {30, 0.3}}) == 20);
  CHECK(best_k({{30, 0.2}, {10, 0.2}}) == 10);
  CHECK_THROWS_AS(best_k({}), ArgumentError);
}

TEST_CASE("equity and holdings CSV") {
  const Panel panel = load_csv(kData / "backtest_panel.csv");
  const Matrix scores(panel.n_stocks(), panel.n_days(), 1.0);
  const EquityCurve curve = run_backtest(scores, panel, StrategyConfig{2, 3, 0.0, false}, all_days(panel));
  const auto dir = std::filesystem::temp_directory_path() / "rm_backtest_csv";
  std::filesystem::create_directories(dir);
  write_equity_csv(curve, dir / "equity.csv");
  write_holdings_csv(curve, panel, dir / "holdings.csv");
  std::ifstream eq(dir / "equity.csv");
  std::string header;
  std::getline(eq, header);
  CHECK(header == "date,value,turnover");
  std::ifstream ho(dir / "holdings.csv");
  std::getline(ho, header);
  CHECK(header == "date,symbol,weight");
  std::string first;
  std::getline(ho, first);
  CHECK(first == "2024-01-01,AAA,0.5");
  std::filesystem::remove_all(dir);
}
