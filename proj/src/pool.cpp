#include "riskminer/pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "riskminer/errors.hpp"
#include "riskminer/metrics.hpp"
#include "riskminer/rng.hpp"

namespace riskminer {

namespace {

double value_or_zero(double v) { return is_missing(v) ? 0.0 : v; }

std::string hex(double v) {
  std::ostringstream out;
  out << std::hexfloat << v;
  return out.str();
}

}  // namespace

Matrix standardize(const Matrix& raw, std::span<const std::uint8_t> tradable) {
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t c = 0; c < raw.cols(); ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      const double v = raw(r, c);
      if (is_missing(v) || (!tradable.empty() && !tradable[r * raw.cols() + c])) continue;
      sum += v;
      ++n;
    }
    if (n < 2) continue;
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      const double v = raw(r, c);
      if (is_missing(v) || (!tradable.empty() && !tradable[r * raw.cols() + c])) continue;
      sq += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(sq / static_cast<double>(n));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      const double v = raw(r, c);
      if (is_missing(v) || (!tradable.empty() && !tradable[r * raw.cols() + c])) continue;
      out(r, c) = (v - mean) / sd;
    }
  }
  return out;
}

AlphaPool::AlphaPool(std::shared_ptr<const Panel> panel, Matrix target, DateRange train,
                     std::size_t capacity, FitConfig fit)
    : panel_(std::move(panel)),
      target_(std::move(target)),
      train_(train),
      capacity_(capacity),
      fit_(fit) {
  if (!panel_) throw ArgumentError("alpha pool needs a panel");
  if (capacity_ == 0) throw ArgumentError("pool capacity must be positive");
  if (target_.rows() != panel_->n_stocks() || target_.cols() != panel_->n_days()) {
    throw ArgumentError("target shape does not match the panel");
  }
  if (train_.end > panel_->n_days() || train_.empty()) {
    throw ArgumentError("training range outside the panel");
  }
  const std::size_t days = panel_->n_days();
  const auto tradable = panel_->tradable_mask();
  for (std::size_t r = 0; r < panel_->n_stocks(); ++r) {
    for (std::size_t c = train_.begin; c < train_.end; ++c) {
      const double y = target_(r, c);
      if (is_missing(y) || !tradable[r * days + c]) continue;
      cells_.push_back(r * days + c);
      cell_target_.push_back(y);
      target_sq_ += y * y;
    }
  }
  if (!cells_.empty()) target_sq_ /= static_cast<double>(cells_.size());
}

void AlphaPool::append_entry(const Expression& expr, std::shared_ptr<const Matrix> cache,
                             double weight) {
  const auto& f = cache->data();
  const double n = static_cast<double>(std::max<std::size_t>(cells_.size(), 1));
  std::vector<double> row(entries_.size() + 1, 0.0);
  double rhs = 0.0;
  for (std::size_t j = 0; j <= entries_.size(); ++j) {
    const auto& g = j < entries_.size() ? entries_[j].cache->data() : f;
    double acc = 0.0;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      acc += value_or_zero(f[cells_[k]]) * value_or_zero(g[cells_[k]]);
    }
    row[j] = acc / n;
  }
  for (std::size_t k = 0; k < cells_.size(); ++k) rhs += value_or_zero(f[cells_[k]]) * cell_target_[k];
  rhs /= n;

  for (std::size_t j = 0; j < entries_.size(); ++j) gram_[j].push_back(row[j]);
  gram_.push_back(std::move(row));
  rhs_.push_back(rhs);
  entries_.push_back({expr, std::move(cache), weight});
}

void AlphaPool::remove_entry(std::size_t index) {
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(index));
  gram_.erase(gram_.begin() + static_cast<std::ptrdiff_t>(index));
  for (auto& row : gram_) row.erase(row.begin() + static_cast<std::ptrdiff_t>(index));
  rhs_.erase(rhs_.begin() + static_cast<std::ptrdiff_t>(index));
}

double AlphaPool::loss(const std::vector<double>& w) const {
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double gi = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) gi += gram_[i][j] * w[j];
    quad += w[i] * gi;
    lin += w[i] * rhs_[i];
  }
  return quad - 2.0 * lin + target_sq_;
}

std::vector<double> AlphaPool::fit_weights() {
  if (entries_.empty()) throw EmptyPool("cannot fit an empty pool");
  if (cells_.empty()) throw DegenerateTarget("no training cell has a present, tradable target");

  const std::size_t k = entries_.size();
  std::vector<double> w = weights();

  // The gradient 2(Gw - b) is Lipschitz with constant 2*lambda_max(G); a step
  // of at most 1/lambda_max never increases the loss. Gershgorin bounds
  // lambda_max from above.
  double bound = 0.0;
  for (const auto& row : gram_) {
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    bound = std::max(bound, s);
  }
  const double step = bound > 0.0 ? std::min(fit_.lr, 1.0 / bound) : fit_.lr;

  trace_.clear();
  std::vector<double> grad(k);
  for (int it = 0;; ++it) {
    // One pass gives both the loss at w and the gradient there.
    double norm_sq = 0.0;
    double quad = 0.0;
    double lin = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& row = gram_[i];
      double gw = 0.0;
      for (std::size_t j = 0; j < k; ++j) gw += row[j] * w[j];
      quad += w[i] * gw;
      lin += w[i] * rhs_[i];
      grad[i] = 2.0 * (gw - rhs_[i]);
      norm_sq += grad[i] * grad[i];
    }
    trace_.push_back(quad - 2.0 * lin + target_sq_);
    if (it == fit_.max_iters || std::sqrt(norm_sq) < fit_.tol) break;
    for (std::size_t i = 0; i < k; ++i) w[i] -= step * grad[i];
  }
  for (std::size_t i = 0; i < k; ++i) entries_[i].weight = w[i];
  return w;
}

AddResult AlphaPool::add_alpha(const Expression& expr, Rng& rng) {
  auto cache = std::make_shared<const Matrix>(standardize(evaluate(expr, *panel_), panel_->tradable_mask()));
  return add_alpha(expr, std::move(cache), rng);
}

AddResult AlphaPool::add_alpha(const Expression& expr, std::shared_ptr<const Matrix> standardized,
                               Rng& rng) {
  if (!standardized || standardized->rows() != panel_->n_stocks() ||
      standardized->cols() != panel_->n_days()) {
    throw ArgumentError("standardized alpha has the wrong shape");
  }
  bool usable = false;
  for (std::size_t r = 0; r < standardized->rows() && !usable; ++r) {
    for (std::size_t c = train_.begin; c < train_.end; ++c) {
      if (!is_missing((*standardized)(r, c))) {
        usable = true;
        break;
      }
    }
  }
  if (!usable) {
    throw EvaluationError("alpha " + unparse(expr) + " has no usable cell in the training window");
  }

  append_entry(expr, std::move(standardized), rng.uniform(-0.1, 0.1));
  AddResult result;
  result.fitted_weights = fit_weights();
  if (entries_.size() > capacity_) {
    std::size_t victim = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (std::abs(entries_[i].weight) < std::abs(entries_[victim].weight)) victim = i;
    }
    result.evicted_index = victim;
    result.evicted = entries_[victim].expression;
    remove_entry(victim);
    fit_weights();
  }
  result.composite_ic = composite_ic();
  return result;
}

std::vector<double> AlphaPool::weights() const {
  std::vector<double> w;
  w.reserve(entries_.size());
  for (const auto& e : entries_) w.push_back(e.weight);
  return w;
}

void AlphaPool::set_weights(const std::vector<double>& weights) {
  if (weights.size() != entries_.size()) throw ArgumentError("weight vector size mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) throw ArgumentError("weights must be finite");
    entries_[i].weight = weights[i];
  }
}

Matrix AlphaPool::composite(DateRange range) const {
  if (entries_.empty()) throw EmptyPool("composite of an empty pool");
  const std::size_t rows = panel_->n_stocks();
  const std::size_t cols = panel_->n_days();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = range.begin; c < range.end && c < cols; ++c) {
      double acc = 0.0;
      bool any = false;
      for (const auto& e : entries_) {
        const double v = (*e.cache)(r, c);
        if (is_missing(v)) continue;
        acc += e.weight * v;
        any = true;
      }
      if (any) out(r, c) = acc;
    }
  }
  return out;
}

double AlphaPool::composite_ic() const {
  if (entries_.empty()) return 0.0;
  try {
    return compute_ic(composite(train_), target_, train_, panel_->tradable_mask()).ic;
  } catch (const EmptyOverlap&) {
    return 0.0;
  }
}

std::vector<double> AlphaPool::mut_ics(const Matrix& standardized) const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    try {
      out.push_back(compute_mut_ic(standardized, *e.cache, train_, panel_->tradable_mask()));
    } catch (const EmptyOverlap&) {
      out.push_back(0.0);
    }
  }
  return out;
}

void AlphaPool::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& dates = panel_->dates();
  out << "riskminer-pool 1\n";
  out << "capacity " << capacity_ << '\n';
  out << "train " << train_.begin << ' ' << train_.end << ' ' << dates[train_.begin] << ' '
      << dates[train_.end - 1] << '\n';
  out << "entries " << entries_.size() << '\n';
  for (const auto& e : entries_) out << hex(e.weight) << '\t' << unparse(e.expression) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

AlphaPool AlphaPool::load(const std::filesystem::path& path, std::shared_ptr<const Panel> panel,
                          Matrix target, FitConfig fit) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const auto fail = [&](const std::string& what) {
    throw CheckpointError(path.string() + ": " + what);
  };
  std::string line, word;
  if (!std::getline(in, line) || line != "riskminer-pool 1") fail("not a pool checkpoint (v1)");

  std::size_t capacity = 0, begin = 0, end = 0, count = 0;
  std::string first_date, last_date;
  if (!std::getline(in, line)) fail("missing capacity");
  {
    std::istringstream s(line);
    if (!(s >> word >> capacity) || word != "capacity") fail("bad capacity line");
  }
  if (!std::getline(in, line)) fail("missing train line");
  {
    std::istringstream s(line);
    if (!(s >> word >> begin >> end >> first_date >> last_date) || word != "train") {
      fail("bad train line");
    }
  }
  if (!std::getline(in, line)) fail("missing entries line");
  {
    std::istringstream s(line);
    if (!(s >> word >> count) || word != "entries") fail("bad entries line");
  }
  if (end <= begin || end > panel->n_days() || panel->dates()[begin] != first_date ||
      panel->dates()[end - 1] != last_date) {
    fail("training range does not match the panel");
  }

  AlphaPool pool(panel, std::move(target), DateRange{begin, end}, capacity, fit);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) fail("truncated entry list");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("entry line without tab separator");
    const std::string weight_text = line.substr(0, tab);
    char* stop = nullptr;
    const double weight = std::strtod(weight_text.c_str(), &stop);
    if (stop != weight_text.c_str() + weight_text.size()) fail("bad weight '" + weight_text + "'");
    const Expression expr = parse(line.substr(tab + 1));
    auto cache = std::make_shared<const Matrix>(standardize(evaluate(expr, *panel), panel->tradable_mask()));
    pool.append_entry(expr, std::move(cache), weight);
  }
  return pool;
}

}  // namespace riskminer
