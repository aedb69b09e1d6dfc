#include "riskminer/expression.hpp"

#include <cctype>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <variant>

#include "operators.hpp"
#include "riskminer/errors.hpp"
#include "riskminer/grammar.hpp"
#include "riskminer/panel.hpp"

namespace riskminer {

namespace {

std::size_t arity(TokenKind kind) {
  switch (kind) {
    case TokenKind::UnaryOp: return 1;
    case TokenKind::BinaryOp: return 2;
    case TokenKind::TsUnaryOp: return 2;
    case TokenKind::TsBinaryOp: return 3;
    default: return 0;
  }
}

// ---------------------------------------------------------------- parsing

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  std::vector<Token> parse_all() {
    std::vector<Token> out = parse_value();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return out;
  }

 private:
  struct Arg {
    std::vector<Token> rpn;        // set for expression arguments
    std::optional<std::string> literal;  // set for numeric literals
    std::size_t position = 0;
  };

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  bool at_number() {
    skip_ws();
    if (pos_ >= text_.size()) return false;
    const char c = text_[pos_];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
  }

  std::string read_number() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    std::string lit(text_.substr(start, pos_ - start));
    if (lit.empty() || lit == "-" || lit == "+") throw ParseError("malformed number", start);
    return lit;
  }

  std::string read_identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    if (start == pos_) {
      if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
      throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  static Token constant_token(const std::string& literal, std::size_t position) {
    char* end = nullptr;
    const double v = std::strtod(literal.c_str(), &end);
    if (end != literal.c_str() + literal.size()) throw ParseError("malformed number", position);
    for (double c : kConstants) {
      if (c == v) return Token::constant(c);
    }
    throw ParseError("unsupported constant " + literal, position);
  }

  static Token delta_token(const std::string& literal, std::size_t position) {
    for (Token t : token_vocabulary()) {
      if (t.kind() == TokenKind::TimeDelta && t.name() == literal) return t;
    }
    throw ParseError("unsupported time delta " + literal, position);
  }

  Arg parse_arg() {
    Arg arg;
    skip_ws();
    arg.position = pos_;
    if (at_number()) {
      arg.literal = read_number();
    } else {
      arg.rpn = parse_value();
    }
    return arg;
  }

  // Parses an expression in a value slot (feature, constant, or call).
  std::vector<Token> parse_value() {
    skip_ws();
    const std::size_t start = pos_;
    if (at_number()) {
      const std::string lit = read_number();
      return {constant_token(lit, start)};
    }
    const std::string name = read_identifier();
    if (!peek('(')) {
      const auto tok = find_token(name);
      if (!tok || tok->kind() != TokenKind::Feature) {
        throw ParseError("unknown feature '" + name + "'", start);
      }
      return {*tok};
    }
    const auto op = find_op(name);
    if (!op) throw ParseError("unknown operator '" + name + "'", start);
    const Token op_token = Token::op(*op);

    expect('(');
    std::vector<Arg> args;
    if (!peek(')')) {
      args.push_back(parse_arg());
      while (peek(',')) {
        ++pos_;
        args.push_back(parse_arg());
      }
    }
    expect(')');

    const std::size_t want = arity(op_token.kind());
    if (args.size() != want) {
      throw ArityError(name + " expects " + std::to_string(want) + " arguments, got " +
                       std::to_string(args.size()) + " (at position " + std::to_string(start) + ")");
    }
    const bool windowed =
        op_token.kind() == TokenKind::TsUnaryOp || op_token.kind() == TokenKind::TsBinaryOp;
    std::vector<Token> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
      const bool delta_slot = windowed && i + 1 == args.size();
      Arg& a = args[i];
      if (delta_slot) {
        if (!a.literal) {
          throw ArityError(name + " expects a time delta as its last argument (at position " +
                           std::to_string(a.position) + ")");
        }
        out.push_back(delta_token(*a.literal, a.position));
      } else if (a.literal) {
        out.push_back(constant_token(*a.literal, a.position));
      } else {
        out.insert(out.end(), a.rpn.begin(), a.rpn.end());
      }
    }
    out.push_back(op_token);
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

// -------------------------------------------------------------- evaluation

using StackItem = std::variant<Matrix, double, int>;

detail::Operand as_operand(const StackItem& item) {
  if (const auto* m = std::get_if<Matrix>(&item)) return {m, 0.0};
  if (const auto* s = std::get_if<double>(&item)) return {nullptr, *s};
  throw InvalidExpression("time delta used as a value");
}

const Matrix& as_series(const StackItem& item) {
  if (const auto* m = std::get_if<Matrix>(&item)) return *m;
  throw InvalidExpression("operator expects a series argument");
}

}  // namespace

Expression Expression::from_tokens(std::vector<Token> tokens) {
  if (tokens.empty()) throw InvalidExpression("empty expression");
  if (tokens.size() > kMaxExpressionLength) {
    throw InvalidExpression("expression has " + std::to_string(tokens.size()) +
                            " tokens; the maximum is " + std::to_string(kMaxExpressionLength));
  }
  const auto stack = type_stack(tokens);
  if (!stack) throw InvalidExpression("ill-typed token sequence: " + to_rpn_string(tokens));
  if (!is_complete(*stack)) {
    throw InvalidExpression("token sequence does not reduce to a single series: " +
                            to_rpn_string(tokens));
  }
  return Expression(std::move(tokens));
}

Expression parse(std::string_view text) {
  Parser parser(text);
  return Expression::from_tokens(parser.parse_all());
}

std::string unparse(const Expression& expr) {
  std::vector<std::string> stack;
  for (Token t : expr.tokens()) {
    const std::size_t n = arity(t.kind());
    if (n == 0) {
      stack.emplace_back(t.name());
      continue;
    }
    std::string call(t.name());
    call += '(';
    for (std::size_t i = stack.size() - n; i < stack.size(); ++i) {
      if (i + n != stack.size()) call += ", ";
      call += stack[i];
    }
    call += ')';
    stack.resize(stack.size() - n);
    stack.push_back(std::move(call));
  }
  return stack.back();
}

std::string to_rpn_string(std::span<const Token> tokens) {
  std::string out;
  for (Token t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.name();
  }
  return out;
}

AlphaMatrix evaluate(const Expression& expr, const Panel& panel) {
  return evaluate_tokens(expr.tokens(), panel);
}

AlphaMatrix evaluate_tokens(std::span<const Token> tokens, const Panel& panel) {
  const std::size_t rows = panel.n_stocks();
  const std::size_t cols = panel.n_days();
  std::vector<StackItem> stack;
  auto pop = [&stack]() {
    if (stack.empty()) throw InvalidExpression("operator is missing arguments");
    StackItem v = std::move(stack.back());
    stack.pop_back();
    return v;
  };

  for (Token t : tokens) {
    switch (t.kind()) {
      case TokenKind::Feature:
        stack.emplace_back(panel.feature(t.as_feature()));
        break;
      case TokenKind::Constant:
        stack.emplace_back(t.constant_value());
        break;
      case TokenKind::TimeDelta:
        stack.emplace_back(t.delta_days());
        break;
      case TokenKind::UnaryOp: {
        const StackItem x = pop();
        stack.emplace_back(detail::apply_unary(t.as_op(), as_series(x), panel.tradable_mask()));
        break;
      }
      case TokenKind::BinaryOp: {
        const StackItem rhs = pop();
        const StackItem lhs = pop();
        const auto a = as_operand(lhs);
        const auto b = as_operand(rhs);
        if (!a.series && !b.series) throw InvalidExpression("binary operator on two constants");
        stack.emplace_back(detail::apply_binary(t.as_op(), a, b, rows, cols));
        break;
      }
      case TokenKind::TsUnaryOp: {
        const StackItem window = pop();
        const StackItem x = pop();
        if (!std::holds_alternative<int>(window)) throw InvalidExpression("missing time delta");
        stack.emplace_back(detail::apply_ts_unary(t.as_op(), as_series(x), std::get<int>(window)));
        break;
      }
      case TokenKind::TsBinaryOp: {
        const StackItem window = pop();
        const StackItem y = pop();
        const StackItem x = pop();
        if (!std::holds_alternative<int>(window)) throw InvalidExpression("missing time delta");
        stack.emplace_back(detail::apply_ts_binary(t.as_op(), as_series(x), as_series(y),
                                                   std::get<int>(window)));
        break;
      }
      case TokenKind::Beg:
      case TokenKind::End:
        throw InvalidExpression("BEG/END inside an expression body");
    }
  }
  if (stack.size() != 1 || !std::holds_alternative<Matrix>(stack.front())) {
    throw InvalidExpression("token sequence does not reduce to a single series");
  }
  return std::get<Matrix>(std::move(stack.front()));
}

}  // namespace riskminer
