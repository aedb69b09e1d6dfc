#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "riskminer/env.hpp"
#include "riskminer/grammar.hpp"
#include "riskminer/mcts.hpp"
#include "riskminer/panel.hpp"
#include "riskminer/policy.hpp"
#include "riskminer/pool.hpp"
#include "riskminer/rng.hpp"

namespace riskminer {

struct RunConfig {
  std::size_t pool_size = 100;
  double lambda = 0.1;
  std::size_t max_episode_len = 30;
  std::size_t cycles_per_iteration = 200;
  std::size_t iterations = 50;
  double quantile_level = 0.85;
  double beta = 0.01;
  double policy_lr = 0.001;
  double discount = 1.0;
  double c_puct = 1.0;
  std::uint64_t seed = 0;
  int horizon = 5;
  /// Token names the search may use; empty means the whole vocabulary.
  /// BEG and END are always available.
  std::vector<std::string> vocabulary;
  FitConfig fit;
  PolicyConfig policy;
  UpdateMode update_mode = UpdateMode::PerTrajectory;
  /// Stop after this many iterations without a better validation IC; 0 = off.
  std::size_t patience = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Alphabet for the grammar built from `vocabulary`.
  std::vector<Token> alphabet() const;
};

struct IterationReport {
  std::size_t iteration = 0;  // 1-based
  double train_ic = 0.0;
  double valid_ic = 0.0;
  std::size_t pool_size = 0;
  double quantile = 0.0;
  double mean_return = 0.0;
};

/// Columns: iteration,train_ic,valid_ic,pool_size,quantile,mean_return.
void write_report_csv(const std::vector<IterationReport>& rows, const std::filesystem::path& path);

/// Alternates tree search (which grows the pool on every finished episode)
/// with one risk-seeking policy pass over the collected episodes.
///
/// Checkpoint directory layout:
///   pool.txt     alpha pool (AlphaPool::save)
///   policy.bin   policy parameters (Policy::save)
///   state.txt    iteration, tracked quantile, best validation IC, stall
///                counter and generator state
///   report.csv   rows so far
class Miner {
 public:
  Miner(std::shared_ptr<const Panel> panel, SplitSpec split, RunConfig config);
  Miner(const Miner&) = delete;
  Miner& operator=(const Miner&) = delete;

  /// One search-then-train iteration; returns its report row.
  IterationReport run_iteration();

  /// Runs the remaining iterations. When `checkpoint_dir` is non-empty the
  /// state is saved after every iteration. `on_iteration` sees each row.
  void run(const std::filesystem::path& checkpoint_dir = {},
           const std::function<void(const IterationReport&)>& on_iteration = {});

  bool finished() const noexcept;

  void save_checkpoint(const std::filesystem::path& dir) const;
  /// Restores a checkpoint written by a miner with the same panel, split and
  /// config.
  void load_checkpoint(const std::filesystem::path& dir);

  const AlphaPool& pool() const noexcept { return *pool_; }
  const Policy& policy() const noexcept { return policy_; }
  const QuantileTracker& tracker() const noexcept { return tracker_; }
  const std::vector<IterationReport>& report() const noexcept { return report_; }
  const RunConfig& config() const noexcept { return config_; }
  const SplitSpec& split() const noexcept { return split_; }
  std::size_t iteration() const noexcept { return iteration_; }
  double best_valid_ic() const noexcept { return best_valid_; }

  /// Composite IC over the validation window (0 when the pool is empty).
  double valid_ic() const;

 private:
  std::shared_ptr<const Panel> panel_;
  SplitSpec split_;
  RunConfig config_;
  Matrix valid_target_;
  Rng rng_;
  std::unique_ptr<AlphaPool> pool_;
  std::unique_ptr<AlphaMiningEnv> env_;
  Policy policy_;
  QuantileTracker tracker_;
  std::vector<IterationReport> report_;
  std::size_t iteration_ = 0;
  double best_valid_ = -1.0;
  std::size_t stall_ = 0;
};

/// Target used by the pool: forward returns with every window that reaches
/// past the training split masked out.
Matrix training_target(const Panel& panel, const SplitSpec& split, int horizon);

/// IC of the pool's composite over `range` against `horizon`-day returns
/// restricted to that range; 0 when the pool is empty or no day qualifies.
double composite_ic_on(const AlphaPool& pool, DateRange range, int horizon);

struct SweepRow {
  double level = 0.0;
  double train_ic = 0.0;
  double valid_ic = 0.0;      // final iteration
  double best_valid_ic = 0.0; // best over iterations
};

/// One run per quantile level with the same seed; rows in `levels` order.
std::vector<SweepRow> quantile_sweep(std::shared_ptr<const Panel> panel, const SplitSpec& split,
                                     const RunConfig& config, const std::vector<double>& levels);

/// Columns: level,train_ic,valid_ic,best_valid_ic.
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace riskminer
