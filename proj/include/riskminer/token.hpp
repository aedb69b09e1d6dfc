#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riskminer {

enum class TokenKind : std::uint8_t {
  Feature,
  TimeDelta,
  Constant,
  UnaryOp,
  BinaryOp,
  TsUnaryOp,
  TsBinaryOp,
  Beg,
  End,
};

enum class Feature : std::uint8_t { Open, High, Low, Close, Volume, Vwap };
inline constexpr std::size_t kFeatureCount = 6;

// Grouped by arity class; the order matches the vocabulary layout below.
enum class Op : std::uint8_t {
  // cross-section unary
  Sign, Abs, Log, CSRank,
  // cross-section binary
  Add, Sub, Mul, Div, Greater, Less,
  // time-series unary (x, t)
  Ref, Rank, Skew, Kurt, Mean, Med, Sum, Std, Var, Max, Min, WMA, EMA,
  // time-series binary (x, y, t)
  Cov, Corr,
};

inline constexpr std::array<int, 7> kTimeDeltas = {1, 5, 10, 20, 30, 40, 50};
inline constexpr std::array<double, 13> kConstants = {
    -30.0, -10.0, -5.0, -2.0, -1.0, -0.5, -0.01, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0};

// Vocabulary layout. Token::index() is the policy-head output index, so this
// ordering is part of the checkpoint format and must not change.
//   [0, 6)    features      open high low close volume vwap
//   [6, 13)   time deltas   1 5 10 20 30 40 50
//   [13, 26)  constants     -30.0 ... 30.0
//   [26, 30)  unary ops     Sign Abs Log CSRank
//   [30, 36)  binary ops    Add Sub Mul Div Greater Less
//   [36, 49)  ts unary ops  Ref Rank Skew Kurt Mean Med Sum Std Var Max Min WMA EMA
//   [49, 51)  ts binary ops Cov Corr
//   51        BEG
//   52        END
inline constexpr std::size_t kFeatureBase = 0;
inline constexpr std::size_t kDeltaBase = 6;
inline constexpr std::size_t kConstantBase = 13;
inline constexpr std::size_t kUnaryBase = 26;
inline constexpr std::size_t kBinaryBase = 30;
inline constexpr std::size_t kTsUnaryBase = 36;
inline constexpr std::size_t kTsBinaryBase = 49;
inline constexpr std::size_t kBegIndex = 51;
inline constexpr std::size_t kEndIndex = 52;
inline constexpr std::size_t kVocabularySize = 53;

/// One symbol of the alphabet, identified by its vocabulary index.
class Token {
 public:
  constexpr Token() = default;

  static Token from_index(std::size_t index);
  static Token feature(Feature f) { return Token(kFeatureBase + static_cast<std::size_t>(f)); }
  static Token delta(int days);
  static Token constant(double value);
  static Token op(Op o);
  static constexpr Token beg() { return Token(kBegIndex); }
  static constexpr Token end() { return Token(kEndIndex); }

  constexpr std::size_t index() const noexcept { return index_; }
  TokenKind kind() const noexcept;

  Feature as_feature() const;
  int delta_days() const;
  double constant_value() const;
  Op as_op() const;

  /// Short display name: "close", "5" (delta), "5.0" (constant), "Mean", "BEG".
  std::string_view name() const;

  friend constexpr bool operator==(Token, Token) = default;
  friend constexpr auto operator<=>(Token, Token) = default;

 private:
  constexpr explicit Token(std::size_t index) : index_(static_cast<std::uint8_t>(index)) {}
  std::uint8_t index_ = 0;
};

/// The full fixed alphabet in vocabulary order.
std::span<const Token> token_vocabulary();

/// Looks a token up by its display name ("close", "5", "-0.5", "Corr", "END").
std::optional<Token> find_token(std::string_view name);

/// Operator name as it appears in the infix text form.
std::string_view op_name(Op op);
std::optional<Op> find_op(std::string_view name);
std::string_view feature_name(Feature f);

}  // namespace riskminer
