#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riskminer/matrix.hpp"
#include "riskminer/token.hpp"

namespace riskminer {

class Panel;

/// Maximum body length: a 30-token episode minus BEG and END.
inline constexpr std::size_t kMaxExpressionLength = 28;

/// A validated RPN token sequence (no BEG/END) that evaluates to one Series.
class Expression {
 public:
  /// Validates typing and length; throws InvalidExpression otherwise.
  static Expression from_tokens(std::vector<Token> tokens);

  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }

  friend bool operator==(const Expression&, const Expression&) = default;

 private:
  explicit Expression(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}
  std::vector<Token> tokens_;
};

// Canonical text form (infix, prefix-call style):
//
//   expr     = feature | constant | call ;
//   call     = op-name "(" args ")" ;
//   args     = expr                          (* unary *)
//            | expr "," expr                 (* binary *)
//            | expr "," delta                (* ts unary *)
//            | expr "," expr "," delta       (* ts binary *)
//   feature  = "open" | "high" | "low" | "close" | "volume" | "vwap" ;
//   constant = one of -30.0 -10.0 -5.0 -2.0 -1.0 -0.5 -0.01 0.5 1.0 2.0 5.0 10.0 30.0 ;
//   delta    = "1" | "5" | "10" | "20" | "30" | "40" | "50" ;
//
// Whitespace between symbols is ignored. unparse() emits ", " between
// arguments and the constant spellings listed above.

/// Parses the canonical text form. Throws ParseError (with position) on
/// malformed text and ArityError on wrong argument counts.
Expression parse(std::string_view text);

std::string unparse(const Expression& expr);

/// Space-separated RPN token names, e.g. "close 5 Mean close Div".
std::string to_rpn_string(std::span<const Token> tokens);

/// Cell-wise evaluation over the whole panel. Pure; safe to call concurrently.
///
/// Operator semantics (t = window length, windows are the trailing t days
/// ending today; any missing input in a window gives a missing output):
///   Sign(x)      1 if x > 0 else 0
///   Log(x)       missing for x <= 0
///   CSRank(x)    average rank 1..m among tradable non-missing stocks that day
///   x / y        missing when y == 0
///   Greater/Less 1 if x > y (x < y) else 0
///   Ref(x, t)    x from t days earlier
///   Rank(x, t)   average rank 1..t of today's value within the window
///   Skew, Kurt   population moments; Kurt is excess kurtosis
///   Std, Var     sample statistics (n - 1); missing for t = 1
///   WMA(x, t)    weights t, t-1, ..., 1 from today backwards, normalized
///   EMA(x, t)    smoothing 2/(t+1), recursion seeded with the oldest value
///   Cov(x, y, t) sample covariance; missing for t = 1
///   Corr(x,y,t)  Pearson; missing when t = 1 or either window is constant
/// Skew/Kurt are also missing on constant windows. Non-finite results become
/// missing. The first t-1 days of every time-series output are missing (t for Ref).
AlphaMatrix evaluate(const Expression& expr, const Panel& panel);

/// Same, for an arbitrary token sequence. Throws InvalidExpression if the
/// sequence does not reduce to exactly one Series.
AlphaMatrix evaluate_tokens(std::span<const Token> tokens, const Panel& panel);

}  // namespace riskminer
