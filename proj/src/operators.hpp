#pragma once

// Vectorized operator kernels used by the RPN evaluator.

#include <cstdint>
#include <span>

#include "riskminer/matrix.hpp"
#include "riskminer/token.hpp"

namespace riskminer::detail {

/// A binary-operator argument: a Series matrix or a broadcast scalar.
struct Operand {
  const Matrix* series = nullptr;
  double scalar = 0.0;

  double at(std::size_t r, std::size_t c) const { return series ? (*series)(r, c) : scalar; }
};

/// Variance below this (relative to the squared mean) counts as a constant window.
bool is_constant_window(double variance, double mean);

Matrix apply_unary(Op op, const Matrix& x, std::span<const std::uint8_t> tradable);
Matrix apply_binary(Op op, Operand lhs, Operand rhs, std::size_t rows, std::size_t cols);
Matrix apply_ts_unary(Op op, const Matrix& x, int window);
Matrix apply_ts_binary(Op op, const Matrix& x, const Matrix& y, int window);

}  // namespace riskminer::detail
