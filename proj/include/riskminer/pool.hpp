#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "riskminer/expression.hpp"
#include "riskminer/matrix.hpp"
#include "riskminer/panel.hpp"

namespace riskminer {

class Rng;

/// Gradient-descent settings for the pool's linear combination.
struct FitConfig {
  double lr = 0.01;
  int max_iters = 1000;
  double tol = 1e-6;
};

struct PoolEntry {
  Expression expression;
  /// Per-day z-scored alpha over the whole panel; missing cells stay missing.
  std::shared_ptr<const Matrix> cache;
  double weight = 0.0;
};

struct AddResult {
  double composite_ic = 0.0;  // training-window IC after the full update
  /// Weights right after the first fit, before any eviction (new entry last).
  std::vector<double> fitted_weights;
  std::optional<std::size_t> evicted_index;  // index into the pre-eviction entries
  std::optional<Expression> evicted;
};

/// Per-day cross-sectional z-score over present, tradable cells. Days with
/// fewer than two such cells or zero spread become entirely missing.
Matrix standardize(const Matrix& raw, std::span<const std::uint8_t> tradable);

/// Bounded set of alphas combined linearly, z = sum_i w_i f_i, with the
/// weights fitted by gradient descent on the mean squared error against the
/// training target.
///
/// Missing standardized cells contribute 0 (the cross-sectional mean) to the
/// composite. The loss runs over training cells whose target is present and
/// tradable, so the Gram matrix of the entries can be updated one row at a
/// time.
class AlphaPool {
 public:
  /// `target` is the forward-return matrix (full panel width); only
  /// `train` days are used for fitting and for composite_ic().
  AlphaPool(std::shared_ptr<const Panel> panel, Matrix target, DateRange train,
            std::size_t capacity, FitConfig fit = {});

  /// Appends `expr` with a weight drawn uniformly from [-0.1, 0.1], refits,
  /// evicts the smallest-|w| entry if the pool then exceeds capacity (and
  /// refits once more). Throws EvaluationError when the alpha has no usable
  /// cell in the training window.
  AddResult add_alpha(const Expression& expr, Rng& rng);
  /// Same, with a precomputed standardized matrix.
  AddResult add_alpha(const Expression& expr, std::shared_ptr<const Matrix> standardized, Rng& rng);

  /// Runs gradient descent from the current weights. Throws DegenerateTarget
  /// when no training cell is usable, EmptyPool when empty.
  std::vector<double> fit_weights();

  /// Loss L(w) = sum (z - r)^2 / n over the fitting cells.
  double loss(const std::vector<double>& weights) const;

  /// sum_i w_i f_i for days in `range`; other days are missing. A cell is
  /// missing when every entry is missing there.
  Matrix composite(DateRange range) const;
  /// IC of the composite over the training window (0 when undefined).
  double composite_ic() const;

  /// Mean daily Pearson between `standardized` and each entry over the
  /// training window (0 where undefined).
  std::vector<double> mut_ics(const Matrix& standardized) const;

  const std::vector<PoolEntry>& entries() const noexcept { return entries_; }
  std::vector<double> weights() const;
  void set_weights(const std::vector<double>& weights);
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t capacity() const noexcept { return capacity_; }
  DateRange train_range() const noexcept { return train_; }
  const FitConfig& fit_config() const noexcept { return fit_; }
  const Matrix& target() const noexcept { return target_; }
  const std::shared_ptr<const Panel>& panel() const noexcept { return panel_; }

  /// Loss values of the most recent fit, one per iteration (first = start).
  const std::vector<double>& last_fit_trace() const noexcept { return trace_; }

  /// Text checkpoint: capacity, training range and (weight, expression)
  /// pairs; weights are written as hex floats so reloading is bit-exact.
  void save(const std::filesystem::path& path) const;
  /// Rebuilds a pool from a checkpoint, re-evaluating every expression.
  static AlphaPool load(const std::filesystem::path& path, std::shared_ptr<const Panel> panel,
                        Matrix target, FitConfig fit = {});

 private:
  void append_entry(const Expression& expr, std::shared_ptr<const Matrix> cache, double weight);
  void remove_entry(std::size_t index);

  std::shared_ptr<const Panel> panel_;
  Matrix target_;
  DateRange train_;
  std::size_t capacity_;
  FitConfig fit_;
  std::vector<PoolEntry> entries_;

  // Fitting cells (flat index into the panel) and their targets.
  std::vector<std::size_t> cells_;
  std::vector<double> cell_target_;
  // gram_[i][j] = mean over cells of f_i f_j; rhs_[i] = mean of f_i r.
  std::vector<std::vector<double>> gram_;
  std::vector<double> rhs_;
  double target_sq_ = 0.0;
  std::vector<double> trace_;
};

}  // namespace riskminer
