#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "riskminer/errors.hpp"
#include "riskminer/pipeline.hpp"
#include "test_support.hpp"

using namespace riskminer;

namespace {

std::shared_ptr<const Panel> small_panel() {
  static const auto panel = std::make_shared<const Panel>(synth_panel(15, 150, 4));
  return panel;
}

SplitSpec small_split() { return SplitSpec::by_fraction(150, 0.6, 0.2); }

RunConfig fast_config() {
  RunConfig c;
  c.pool_size = 5;
  c.max_episode_len = 12;
  c.cycles_per_iteration = 20;
  c.iterations = 4;
  c.seed = 3;
  c.vocabulary = {"open", "close", "vwap", "high", "low", "Sub", "Div", "Add", "Mean", "Std", "5", "10"};
  c.policy.embed_dim = 8;
  c.policy.hidden_dim = 8;
  c.policy.layers = 2;
  c.policy.head_dims = {8};
  return c;
}

std::string file_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rm_pipeline_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("zero iterations leaves the initial state") {
  RunConfig c = fast_config();
  c.iterations = 0;
  Miner miner(small_panel(), small_split(), c);
  const Policy initial = miner.policy();
  miner.run();
  CHECK(miner.finished());
  CHECK(miner.pool().empty());
  CHECK(miner.report().empty());
  CHECK(miner.policy() == initial);
  CHECK(miner.valid_ic() == 0.0);
}

TEST_CASE("run config validation") {
  RunConfig c = fast_config();
  CHECK_NOTHROW(c.validate());
  for (double level : {0.0, 1.0, -0.2, 1.5}) {
    RunConfig bad = c;
    bad.quantile_level = level;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  RunConfig zero_pool = c;
  zero_pool.pool_size = 0;
  CHECK_THROWS_AS(zero_pool.validate(), ConfigError);
  RunConfig zero_cycles = c;
  zero_cycles.cycles_per_iteration = 0;
  CHECK_THROWS_AS(zero_cycles.validate(), ConfigError);
  RunConfig bad_vocab = c;
  bad_vocab.vocabulary = {"close", "NotAToken"};
  CHECK_THROWS_AS(bad_vocab.validate(), ConfigError);

  const RunConfig defaults;
  CHECK(defaults.pool_size == 100);
  CHECK(defaults.lambda == 0.1);
  CHECK(defaults.max_episode_len == 30);
  CHECK(defaults.cycles_per_iteration == 200);
  CHECK(defaults.quantile_level == 0.85);
  CHECK(defaults.beta == 0.01);
  CHECK(defaults.policy_lr == 0.001);
  CHECK(defaults.discount == 1.0);
}

TEST_CASE("runs are deterministic and keep the pool within capacity") {
  auto run = [](const std::filesystem::path& dir) {
    Miner miner(small_panel(), small_split(), fast_config());
    std::vector<std::size_t> sizes;
    miner.run({}, [&](const IterationReport& r) { sizes.push_back(r.pool_size); });
    for (std::size_t s : sizes) CHECK(s <= 5);
    CHECK(miner.pool().size() <= 5);
    write_report_csv(miner.report(), dir / "report.csv");
    miner.pool().save(dir / "pool.txt");
    return std::make_pair(file_text(dir / "report.csv"), file_text(dir / "pool.txt"));
  };
  const auto a = run(scratch("det_a"));
  const auto b = run(scratch("det_b"));
  CHECK(a == b);
  CHECK(a.first.rfind("iteration,train_ic,valid_ic,pool_size,quantile,mean_return\n", 0) == 0);
  CHECK(std::count(a.first.begin(), a.first.end(), '\n') == 5);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  Miner full(small_panel(), small_split(), fast_config());
  full.run();

  const auto dir = scratch("resume");
  {
    RunConfig half = fast_config();
    Miner first(small_panel(), small_split(), half);
    first.run_iteration();
    first.run_iteration();
    first.save_checkpoint(dir);
  }
  Miner resumed(small_panel(), small_split(), fast_config());
  resumed.load_checkpoint(dir);
  CHECK(resumed.iteration() == 2);
  resumed.run();
  REQUIRE(resumed.report().size() == full.report().size());
  for (std::size_t i = 0; i < full.report().size(); ++i) {
    const auto& x = full.report()[i];
    const auto& y = resumed.report()[i];
    CHECK(x.iteration == y.iteration);
    CHECK(x.train_ic == y.train_ic);
    CHECK(x.valid_ic == y.valid_ic);
    CHECK(x.pool_size == y.pool_size);
    CHECK(x.quantile == y.quantile);
    CHECK(x.mean_return == y.mean_return);
  }
  CHECK(resumed.policy() == full.policy());
  CHECK(resumed.pool().weights() == full.pool().weights());
  CHECK(resumed.tracker().q == full.tracker().q);

  CHECK_THROWS_AS(resumed.load_checkpoint(scratch("empty")), Error);
}

TEST_CASE("checkpoints are written every iteration") {
  const auto dir = scratch("every");
  RunConfig c = fast_config();
  c.iterations = 2;
  Miner miner(small_panel(), small_split(), c);
  miner.run(dir);
  for (const char* f : {"pool.txt", "policy.bin", "state.txt", "report.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(file_text(dir / "state.txt").rfind("riskminer-state 1", 0) == 0);
}

TEST_CASE("training target never sees past the training window") {
  const Panel& panel = *small_panel();
  const SplitSpec split = small_split();
  const Matrix t = training_target(panel, split, 5);
  const Matrix fwd = panel.forward_returns(5);
  for (std::size_t d = 0; d < panel.n_days(); ++d) {
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      if (d + 5 >= split.train.end) {
        CHECK(std::isnan(t(s, d)));
      } else if (!std::isnan(fwd(s, d))) {
        CHECK(t(s, d) == fwd(s, d));
      }
    }
  }
}

TEST_CASE("quantile sweep rows") {
  RunConfig c = fast_config();
  c.iterations = 2;
  const auto rows = quantile_sweep(small_panel(), small_split(), c, {0.6, 0.85, 0.95});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].level == 0.6);
  CHECK(rows[1].level == 0.85);
  CHECK(rows[2].level == 0.95);
  for (const auto& r : rows) CHECK(r.best_valid_ic >= r.valid_ic);

  const auto single = quantile_sweep(small_panel(), small_split(), c, {0.85});
  REQUIRE(single.size() == 1);
  Miner miner(small_panel(), small_split(), c);
  miner.run();
  CHECK(single[0].train_ic == miner.report().back().train_ic);
  CHECK(single[0].valid_ic == miner.report().back().valid_ic);
  CHECK(single[0].train_ic == rows[1].train_ic);

  CHECK_THROWS_AS(quantile_sweep(small_panel(), small_split(), c, {}), ArgumentError);
  CHECK_THROWS_AS(quantile_sweep(small_panel(), small_split(), c, {1.2}), ArgumentError);

  const auto dir = scratch("sweep");
  write_sweep_csv(rows, dir / "sweep.csv");
  const std::string text = file_text(dir / "sweep.csv");
  CHECK(text.rfind("level,train_ic,valid_ic,best_valid_ic\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
