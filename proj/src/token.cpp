#include "riskminer/token.hpp"

#include <algorithm>
#include <stdexcept>

namespace riskminer {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "open", "high", "low", "close", "volume", "vwap"};

constexpr std::array<std::string_view, 7> kDeltaNames = {"1", "5", "10", "20", "30", "40", "50"};

constexpr std::array<std::string_view, 13> kConstantNames = {
    "-30.0", "-10.0", "-5.0", "-2.0", "-1.0", "-0.5", "-0.01",
    "0.5",   "1.0",   "2.0",  "5.0",  "10.0", "30.0"};

constexpr std::array<std::string_view, 25> kOpNames = {
    "Sign", "Abs",  "Log",  "CSRank", "Add",  "Sub", "Mul", "Div", "Greater",
    "Less", "Ref",  "Rank", "Skew",   "Kurt", "Mean", "Med", "Sum", "Std",
    "Var",  "Max",  "Min",  "WMA",    "EMA",  "Cov", "Corr"};

const std::array<Token, kVocabularySize>& vocabulary_table() {
  static const std::array<Token, kVocabularySize> table = [] {
    std::array<Token, kVocabularySize> t{};
    for (std::size_t i = 0; i < kVocabularySize; ++i) t[i] = Token::from_index(i);
    return t;
  }();
  return table;
}

}  // namespace

Token Token::from_index(std::size_t index) {
  if (index >= kVocabularySize) {
    throw std::out_of_range("token index " + std::to_string(index) + " out of range");
  }
  return Token(index);
}

Token Token::delta(int days) {
  const auto it = std::find(kTimeDeltas.begin(), kTimeDeltas.end(), days);
  if (it == kTimeDeltas.end()) {
    throw std::invalid_argument("unsupported time delta " + std::to_string(days));
  }
  return Token(kDeltaBase + static_cast<std::size_t>(it - kTimeDeltas.begin()));
}

Token Token::constant(double value) {
  const auto it = std::find(kConstants.begin(), kConstants.end(), value);
  if (it == kConstants.end()) {
    throw std::invalid_argument("unsupported constant " + std::to_string(value));
  }
  return Token(kConstantBase + static_cast<std::size_t>(it - kConstants.begin()));
}

Token Token::op(Op o) { return Token(kUnaryBase + static_cast<std::size_t>(o)); }

TokenKind Token::kind() const noexcept {
  if (index_ < kDeltaBase) return TokenKind::Feature;
  if (index_ < kConstantBase) return TokenKind::TimeDelta;
  if (index_ < kUnaryBase) return TokenKind::Constant;
  if (index_ < kBinaryBase) return TokenKind::UnaryOp;
  if (index_ < kTsUnaryBase) return TokenKind::BinaryOp;
  if (index_ < kTsBinaryBase) return TokenKind::TsUnaryOp;
  if (index_ < kBegIndex) return TokenKind::TsBinaryOp;
  if (index_ == kBegIndex) return TokenKind::Beg;
  return TokenKind::End;
}

Feature Token::as_feature() const {
  if (kind() != TokenKind::Feature) throw std::logic_error("token is not a feature");
  return static_cast<Feature>(index_ - kFeatureBase);
}

int Token::delta_days() const {
  if (kind() != TokenKind::TimeDelta) throw std::logic_error("token is not a time delta");
  return kTimeDeltas[index_ - kDeltaBase];
}

double Token::constant_value() const {
  if (kind() != TokenKind::Constant) throw std::logic_error("token is not a constant");
  return kConstants[index_ - kConstantBase];
}

Op Token::as_op() const {
  if (index_ < kUnaryBase || index_ >= kBegIndex) throw std::logic_error("token is not an operator");
  return static_cast<Op>(index_ - kUnaryBase);
}

std::string_view Token::name() const {
  switch (kind()) {
    case TokenKind::Feature: return kFeatureNames[index_ - kFeatureBase];
    case TokenKind::TimeDelta: return kDeltaNames[index_ - kDeltaBase];
    case TokenKind::Constant: return kConstantNames[index_ - kConstantBase];
    case TokenKind::Beg: return "BEG";
    case TokenKind::End: return "END";
    default: return kOpNames[index_ - kUnaryBase];
  }
}

std::span<const Token> token_vocabulary() { return vocabulary_table(); }

std::optional<Token> find_token(std::string_view name) {
  for (Token t : vocabulary_table()) {
    if (t.name() == name) return t;
  }
  return std::nullopt;
}

std::string_view op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<Op> find_op(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<Op>(i);
  }
  return std::nullopt;
}

std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

}  // namespace riskminer
