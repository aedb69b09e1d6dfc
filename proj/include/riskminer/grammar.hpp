#pragma once

#include <bitset>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "riskminer/token.hpp"

namespace riskminer {

/// Type of one slot on the RPN evaluation stack.
///   Series: per-stock per-day values.
///   Scalar: a constant broadcast over the panel.
///   Delta:  a window length; only ever consumed as the last argument of a
///           time-series operator, so it can only sit on top of the stack.
enum class StackType : std::uint8_t { Series, Scalar, Delta };

using TypeStack = std::vector<StackType>;

/// Applies one body token to a type stack. Returns nullopt when the token's
/// argument types do not match. Typing rules:
///   feature -> Series, constant -> Scalar, delta -> Delta (top must be Series)
///   unary:     Series -> Series
///   binary:    two of {Series, Scalar}, at least one Series -> Series
///   ts unary:  Series, Delta -> Series
///   ts binary: Series, Series, Delta -> Series
std::optional<TypeStack> apply_token(const TypeStack& stack, Token token);

/// Type stack after the whole sequence, or nullopt if any step is ill-typed.
std::optional<TypeStack> type_stack(std::span<const Token> body);

/// True when `stack` is exactly [Series], i.e. the body is a complete alpha.
bool is_complete(const TypeStack& stack);

/// Legality rules over a (possibly restricted) alphabet.
class Grammar {
 public:
  static constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max() / 4;

  /// Grammar over the full vocabulary.
  Grammar();
  /// Grammar restricted to `alphabet` (BEG/END entries are ignored; END is
  /// always available).
  explicit Grammar(std::span<const Token> alphabet);

  bool allows(Token t) const { return allowed_[t.index()]; }
  std::vector<Token> alphabet() const;

  /// Fewest body tokens that turn `stack` into [Series] using this alphabet;
  /// kUnreachable when no completion exists.
  std::size_t min_completion(const TypeStack& stack) const;

  /// Tokens that may follow `prefix` (a body, without BEG). `body_budget` is
  /// the number of further body tokens allowed; END does not consume budget.
  /// A body token is returned iff some completion of length <= body_budget
  /// exists after it; END is returned iff the body is complete. Output is in
  /// vocabulary order.
  std::vector<Token> legal_next(std::span<const Token> prefix, std::size_t body_budget) const;
  std::vector<Token> legal_next_for_stack(const TypeStack& stack, std::size_t body_budget) const;

 private:
  std::bitset<kVocabularySize> allowed_;
  bool has_feature_ = false;
  bool has_binary_ = false;
  bool has_ts_unary_ = false;
  bool has_ts_binary_ = false;
};

/// legal_next over the full vocabulary.
std::vector<Token> legal_next(std::span<const Token> prefix, std::size_t body_budget);

}  // namespace riskminer
