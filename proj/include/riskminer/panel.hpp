#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskminer/matrix.hpp"
#include "riskminer/token.hpp"

namespace riskminer {

class Expression;

/// Half-open range [begin, end) of day indices into a panel.
struct DateRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  bool empty() const noexcept { return size() == 0; }
  bool contains(std::size_t day) const noexcept { return day >= begin && day < end; }
  friend bool operator==(const DateRange&, const DateRange&) = default;
};

/// Stock panel: six features per (stock, day), a tradability mask and the
/// 5- and 10-day forward close-to-close simple returns.
///
/// Dates are ISO-8601 strings ("YYYY-MM-DD"), so lexicographic order is
/// chronological order.
class Panel {
 public:
  Panel(std::vector<std::string> symbols, std::vector<std::string> dates,
        std::array<Matrix, kFeatureCount> features, std::vector<std::uint8_t> tradable);

  std::size_t n_stocks() const noexcept { return symbols_.size(); }
  std::size_t n_days() const noexcept { return dates_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::vector<std::string>& dates() const noexcept { return dates_; }
  DateRange all_days() const noexcept { return {0, n_days()}; }

  const Matrix& feature(Feature f) const { return features_[static_cast<std::size_t>(f)]; }

  bool tradable(std::size_t stock, std::size_t day) const {
    return tradable_[stock * n_days() + day] != 0;
  }
  /// Row-major (stocks x days) tradability flags.
  std::span<const std::uint8_t> tradable_mask() const noexcept { return tradable_; }

  /// Forward return close[t+h]/close[t] - 1 for h in {5, 10}.
  const Matrix& forward_returns(int horizon) const;

  /// Replaces a forward-return matrix (used when planting a synthetic signal).
  void set_forward_returns(int horizon, Matrix returns);

  std::optional<std::size_t> day_index(const std::string& date) const;

  friend bool operator==(const Panel&, const Panel&);

 private:
  std::vector<std::string> symbols_;
  std::vector<std::string> dates_;
  std::array<Matrix, kFeatureCount> features_;
  std::vector<std::uint8_t> tradable_;
  Matrix returns5_;
  Matrix returns10_;
};

/// Simple forward returns off close; missing whenever either close is missing
/// or t + horizon runs past the panel.
Matrix compute_forward_returns(const Matrix& close, int horizon);

/// Copy of `target` with every cell whose return window reaches beyond
/// `range.end` (day + horizon >= range.end) set missing, so metrics on a split
/// never look at prices from the following split.
Matrix restrict_target(const Matrix& target, DateRange range, int horizon);

/// Train/validation/test day ranges; disjoint and ordered.
struct SplitSpec {
  DateRange train;
  DateRange valid;
  DateRange test;

  /// Splits [0, n_days) by fractions; test gets the remainder.
  static SplitSpec by_fraction(std::size_t n_days, double train_fraction, double valid_fraction);
  /// Train covers dates <= train_end, validation dates <= valid_end, test the rest.
  static SplitSpec by_dates(const Panel& panel, const std::string& train_end,
                            const std::string& valid_end);

  /// Throws ArgumentError unless the ranges are non-empty, disjoint and ordered.
  void validate(std::size_t n_days) const;

  DateRange by_name(const std::string& name) const;
};

/// Loads a panel from CSV with header
///   date,symbol,open,high,low,close,volume,vwap[,tradable]
/// (columns in any order). Missing (symbol, date) rows become missing cells
/// flagged untradable.
Panel load_csv(const std::filesystem::path& path);

void write_csv(const Panel& panel, const std::filesystem::path& path);

struct PlantedAlpha {
  const Expression* expression = nullptr;
  double weight = 0.8;
};

/// Geometric random-walk panel. With `planted`, the 5-day forward returns are
/// replaced by scale * (w * z + sqrt(1 - w^2) * eps), z being the planted
/// alpha's per-day z-score, so the planted alpha has an IC close to w.
Panel synth_panel(std::size_t n_stocks, std::size_t n_days, std::uint64_t seed,
                  std::optional<PlantedAlpha> planted = std::nullopt);

}  // namespace riskminer
