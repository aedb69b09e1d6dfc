#include "riskminer/grammar.hpp"

#include <algorithm>

namespace riskminer {

namespace {

bool is_value(StackType t) { return t == StackType::Series || t == StackType::Scalar; }

}  // namespace

std::optional<TypeStack> apply_token(const TypeStack& stack, Token token) {
  TypeStack out = stack;
  const std::size_t n = stack.size();
  switch (token.kind()) {
    case TokenKind::Feature:
      if (n > 0 && stack.back() == StackType::Delta) return std::nullopt;
      out.push_back(StackType::Series);
      return out;
    case TokenKind::Constant:
      if (n > 0 && stack.back() == StackType::Delta) return std::nullopt;
      out.push_back(StackType::Scalar);
      return out;
    case TokenKind::TimeDelta:
      if (n == 0 || stack.back() != StackType::Series) return std::nullopt;
      out.push_back(StackType::Delta);
      return out;
    case TokenKind::UnaryOp:
      if (n == 0 || stack.back() != StackType::Series) return std::nullopt;
      return out;
    case TokenKind::BinaryOp:
      if (n < 2 || !is_value(stack[n - 1]) || !is_value(stack[n - 2])) return std::nullopt;
      if (stack[n - 1] != StackType::Series && stack[n - 2] != StackType::Series) return std::nullopt;
      out.resize(n - 2);
      out.push_back(StackType::Series);
      return out;
    case TokenKind::TsUnaryOp:
      if (n < 2 || stack[n - 1] != StackType::Delta || stack[n - 2] != StackType::Series) {
        return std::nullopt;
      }
      out.resize(n - 2);
      out.push_back(StackType::Series);
      return out;
    case TokenKind::TsBinaryOp:
      if (n < 3 || stack[n - 1] != StackType::Delta || stack[n - 2] != StackType::Series ||
          stack[n - 3] != StackType::Series) {
        return std::nullopt;
      }
      out.resize(n - 3);
      out.push_back(StackType::Series);
      return out;
    case TokenKind::Beg:
    case TokenKind::End:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<TypeStack> type_stack(std::span<const Token> body) {
  TypeStack stack;
  for (Token t : body) {
    auto next = apply_token(stack, t);
    if (!next) return std::nullopt;
    stack = std::move(*next);
  }
  return stack;
}

bool is_complete(const TypeStack& stack) {
  return stack.size() == 1 && stack.front() == StackType::Series;
}

Grammar::Grammar() : Grammar(token_vocabulary()) {}

Grammar::Grammar(std::span<const Token> alphabet) {
  bool has_delta = false;
  bool has_ts_unary_op = false;
  bool has_ts_binary_op = false;
  for (Token t : alphabet) {
    switch (t.kind()) {
      case TokenKind::Beg:
      case TokenKind::End:
        continue;
      case TokenKind::Feature: has_feature_ = true; break;
      case TokenKind::TimeDelta: has_delta = true; break;
      case TokenKind::BinaryOp: has_binary_ = true; break;
      case TokenKind::TsUnaryOp: has_ts_unary_op = true; break;
      case TokenKind::TsBinaryOp: has_ts_binary_op = true; break;
      default: break;
    }
    allowed_.set(t.index());
  }
  has_ts_unary_ = has_delta && has_ts_unary_op;
  has_ts_binary_ = has_delta && has_ts_binary_op;
}

std::vector<Token> Grammar::alphabet() const {
  std::vector<Token> out;
  for (Token t : token_vocabulary()) {
    if (allowed_[t.index()]) out.push_back(t);
  }
  return out;
}

std::size_t Grammar::min_completion(const TypeStack& stack) const {
  const std::size_t n = stack.size();
  if (n == 0) return has_feature_ ? 1 : kUnreachable;

  if (stack.back() == StackType::Delta) {
    // The delta must be consumed immediately by a time-series operator.
    std::size_t best = kUnreachable;
    if (has_ts_unary_ && n >= 2 && stack[n - 2] == StackType::Series) {
      TypeStack reduced(stack.begin(), stack.end() - 1);
      best = std::min(best, 1 + min_completion(reduced));
    }
    if (has_ts_binary_ && n >= 3 && stack[n - 2] == StackType::Series &&
        stack[n - 3] == StackType::Series) {
      TypeStack reduced(stack.begin(), stack.end() - 2);
      best = std::min(best, 1 + min_completion(reduced));
    }
    return std::min(best, kUnreachable);
  }

  const bool any_series = std::find(stack.begin(), stack.end(), StackType::Series) != stack.end();
  const bool any_scalar = std::find(stack.begin(), stack.end(), StackType::Scalar) != stack.end();

  if (has_binary_) {
    // Each merge costs one token and removes one slot. Merging from the top
    // works directly when the top pair holds a Series; otherwise a feature
    // must be pushed first.
    if (!any_series) return has_feature_ ? n + 1 : kUnreachable;
    if (stack[n - 1] == StackType::Series) return n - 1;
    if (n >= 2 && stack[n - 2] == StackType::Series) return n - 1;
    return has_feature_ ? n + 1 : kUnreachable;
  }
  if (any_scalar) return kUnreachable;  // scalars are consumed only by binary ops
  if (n == 1) return 0;
  // Only Cov/Corr merge slots: delta + operator per merge.
  return has_ts_binary_ ? 2 * (n - 1) : kUnreachable;
}

std::vector<Token> Grammar::legal_next_for_stack(const TypeStack& stack,
                                                 std::size_t body_budget) const {
  std::vector<Token> out;
  for (Token t : token_vocabulary()) {
    if (t.kind() == TokenKind::End) {
      if (is_complete(stack)) out.push_back(t);
      continue;
    }
    if (!allowed_[t.index()] || body_budget == 0) continue;
    const auto next = apply_token(stack, t);
    if (!next) continue;
    const std::size_t rest = min_completion(*next);
    if (rest < kUnreachable && 1 + rest <= body_budget) out.push_back(t);
  }
  return out;
}

std::vector<Token> Grammar::legal_next(std::span<const Token> prefix,
                                       std::size_t body_budget) const {
  const auto stack = type_stack(prefix);
  if (!stack) return {};
  return legal_next_for_stack(*stack, body_budget);
}

std::vector<Token> legal_next(std::span<const Token> prefix, std::size_t body_budget) {
  static const Grammar full;
  return full.legal_next(prefix, body_budget);
}

}  // namespace riskminer
