#include "operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace riskminer::detail {

namespace {

double finite_or_missing(double v) { return std::isfinite(v) ? v : kMissing; }

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;  // population central moments
  double m3 = 0.0;
  double m4 = 0.0;
};

Moments central_moments(std::span<const double> w) {
  Moments m;
  const double n = static_cast<double>(w.size());
  for (double v : w) m.mean += v;
  m.mean /= n;
  for (double v : w) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

double average_rank_of_last(std::span<const double> w) {
  const double today = w.back();
  double below = 0.0;
  double equal = 0.0;
  for (double v : w) {
    if (v < today) below += 1.0;
    else if (v == today) equal += 1.0;
  }
  return below + (equal + 1.0) / 2.0;
}

double median(std::span<const double> w, std::vector<double>& scratch) {
  scratch.assign(w.begin(), w.end());
  const std::size_t n = scratch.size();
  const std::size_t mid = n / 2;
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid), scratch.end());
  const double upper = scratch[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double window_stat(Op op, std::span<const double> w, std::vector<double>& scratch) {
  const std::size_t n = w.size();
  const double nd = static_cast<double>(n);
  switch (op) {
    case Op::Rank:
      return average_rank_of_last(w);
    case Op::Skew: {
      const Moments m = central_moments(w);
      if (is_constant_window(m.m2, m.mean)) return kMissing;
      return m.m3 / std::pow(m.m2, 1.5);
    }
    case Op::Kurt: {
      const Moments m = central_moments(w);
      if (is_constant_window(m.m2, m.mean)) return kMissing;
      return m.m4 / (m.m2 * m.m2) - 3.0;
    }
    case Op::Mean:
      return std::accumulate(w.begin(), w.end(), 0.0) / nd;
    case Op::Med:
      return median(w, scratch);
    case Op::Sum:
      return std::accumulate(w.begin(), w.end(), 0.0);
    case Op::Std:
    case Op::Var: {
      if (n < 2) return kMissing;
      const Moments m = central_moments(w);
      const double var = m.m2 * nd / (nd - 1.0);
      return op == Op::Var ? var : std::sqrt(var);
    }
    case Op::Max:
      return *std::max_element(w.begin(), w.end());
    case Op::Min:
      return *std::min_element(w.begin(), w.end());
    case Op::WMA: {
      // Oldest value gets weight 1, today's gets weight n.
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += static_cast<double>(k + 1) * w[k];
      return acc / (nd * (nd + 1.0) / 2.0);
    }
    case Op::EMA: {
      const double alpha = 2.0 / (nd + 1.0);
      double ema = w[0];
      for (std::size_t k = 1; k < n; ++k) ema = alpha * w[k] + (1.0 - alpha) * ema;
      return ema;
    }
    default:
      throw std::logic_error("not a windowed time-series operator");
  }
}

}  // namespace

bool is_constant_window(double variance, double mean) {
  return variance <= 1e-14 * std::max(1.0, mean * mean);
}

Matrix apply_unary(Op op, const Matrix& x, std::span<const std::uint8_t> tradable) {
  Matrix out(x.rows(), x.cols());
  if (op == Op::CSRank) {
    std::vector<std::pair<double, std::size_t>> day;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      day.clear();
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double v = x(r, c);
        if (!is_missing(v) && (tradable.empty() || tradable[r * x.cols() + c])) day.emplace_back(v, r);
      }
      std::sort(day.begin(), day.end());
      for (std::size_t i = 0; i < day.size();) {
        std::size_t j = i + 1;
        while (j < day.size() && day[j].first == day[i].first) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) out(day[k].second, c) = rank;
        i = j;
      }
    }
    return out;
  }

  auto& dst = out.data();
  const auto& src = x.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = src[i];
    if (is_missing(v)) continue;
    switch (op) {
      case Op::Sign: dst[i] = v > 0.0 ? 1.0 : 0.0; break;
      case Op::Abs: dst[i] = std::abs(v); break;
      case Op::Log: dst[i] = v > 0.0 ? finite_or_missing(std::log(v)) : kMissing; break;
      default: throw std::logic_error("not a unary operator");
    }
  }
  return out;
}

Matrix apply_binary(Op op, Operand lhs, Operand rhs, std::size_t rows, std::size_t cols) {
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double a = lhs.at(r, c);
      const double b = rhs.at(r, c);
      if (is_missing(a) || is_missing(b)) continue;
      double v = kMissing;
      switch (op) {
        case Op::Add: v = a + b; break;
        case Op::Sub: v = a - b; break;
        case Op::Mul: v = a * b; break;
        case Op::Div: v = b == 0.0 ? kMissing : a / b; break;
        case Op::Greater: v = a > b ? 1.0 : 0.0; break;
        case Op::Less: v = a < b ? 1.0 : 0.0; break;
        default: throw std::logic_error("not a binary operator");
      }
      out(r, c) = finite_or_missing(v);
    }
  }
  return out;
}

Matrix apply_ts_unary(Op op, const Matrix& x, int window) {
  Matrix out(x.rows(), x.cols());
  const std::size_t t = static_cast<std::size_t>(window);
  std::vector<double> scratch;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    auto dst = out.row(r);
    if (op == Op::Ref) {
      for (std::size_t c = t; c < row.size(); ++c) dst[c] = row[c - t];
      continue;
    }
    // Count of missing cells inside the current window, maintained incrementally.
    std::size_t missing = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (is_missing(row[c])) ++missing;
      if (c >= t && is_missing(row[c - t])) --missing;
      if (c + 1 < t || missing > 0) continue;
      dst[c] = finite_or_missing(window_stat(op, row.subspan(c + 1 - t, t), scratch));
    }
  }
  return out;
}

Matrix apply_ts_binary(Op op, const Matrix& x, const Matrix& y, int window) {
  Matrix out(x.rows(), x.cols());
  const std::size_t t = static_cast<std::size_t>(window);
  if (t < 2) return out;
  const double n = static_cast<double>(t);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xs = x.row(r);
    const auto ys = y.row(r);
    for (std::size_t c = t - 1; c < xs.size(); ++c) {
      const std::size_t lo = c + 1 - t;
      bool ok = true;
      double mx = 0.0, my = 0.0;
      for (std::size_t k = lo; k <= c; ++k) {
        if (is_missing(xs[k]) || is_missing(ys[k])) { ok = false; break; }
        mx += xs[k];
        my += ys[k];
      }
      if (!ok) continue;
      mx /= n;
      my /= n;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t k = lo; k <= c; ++k) {
        const double dx = xs[k] - mx;
        const double dy = ys[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      if (op == Op::Cov) {
        out(r, c) = finite_or_missing(sxy / (n - 1.0));
      } else if (op == Op::Corr) {
        if (is_constant_window(sxx / n, mx) || is_constant_window(syy / n, my)) continue;
        out(r, c) = finite_or_missing(std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0));
      } else {
        throw std::logic_error("not a time-series binary operator");
      }
    }
  }
  return out;
}

}  // namespace riskminer::detail
