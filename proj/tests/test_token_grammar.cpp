#include <catch_amalgamated.hpp>

#include <map>
#include <set>
#include <string>

#include "riskminer/errors.hpp"
#include "riskminer/grammar.hpp"
#include "riskminer/token.hpp"
#include "test_support.hpp"

using namespace riskminer;

namespace {

// Independent typed stack machine: 'S' series, 'C' constant, 'D' delta.
std::optional<std::string> push(const std::string& s, Token t) {
  std::string out = s;
  auto pop = [&]() {
    char c = out.back();
    out.pop_back();
    return c;
  };
  switch (t.kind()) {
    case TokenKind::Feature: return out + 'S';
    case TokenKind::Constant: return out + 'C';
    case TokenKind::TimeDelta: return out + 'D';
    case TokenKind::UnaryOp:
      if (out.empty() || out.back() != 'S') return std::nullopt;
      return out;
    case TokenKind::BinaryOp: {
      if (out.size() < 2) return std::nullopt;
      const char b = pop(), a = pop();
      if (a == 'D' || b == 'D' || (a != 'S' && b != 'S')) return std::nullopt;
      return out + 'S';
    }
    case TokenKind::TsUnaryOp: {
      if (out.size() < 2) return std::nullopt;
      const char d = pop(), x = pop();
      if (d != 'D' || x != 'S') return std::nullopt;
      return out + 'S';
    }
    case TokenKind::TsBinaryOp: {
      if (out.size() < 3) return std::nullopt;
      const char d = pop(), y = pop(), x = pop();
      if (d != 'D' || x != 'S' || y != 'S') return std::nullopt;
      return out + 'S';
    }
    default: return std::nullopt;
  }
}

struct Oracle {
  std::map<std::pair<std::string, std::size_t>, bool> memo;

  // Can `stack` be turned into exactly "S" with at most `budget` more tokens?
  bool completable(const std::string& stack, std::size_t budget) {
    if (stack == "S") return true;
    if (budget == 0) return false;
    const auto key = std::make_pair(stack, budget);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    bool ok = false;
    for (Token t : token_vocabulary()) {
      if (t == Token::beg() || t == Token::end()) continue;
      if (auto next = push(stack, t); next && completable(*next, budget - 1)) {
        ok = true;
        break;
      }
    }
    memo[key] = ok;
    return ok;
  }

  std::set<std::size_t> legal(const std::string& stack, std::size_t budget) {
    std::set<std::size_t> out;
    for (Token t : token_vocabulary()) {
      if (t == Token::beg()) continue;
      if (t == Token::end()) {
        if (stack == "S") out.insert(t.index());
        continue;
      }
      if (budget == 0) continue;
      if (auto next = push(stack, t); next && completable(*next, budget - 1)) out.insert(t.index());
    }
    return out;
  }
};

std::set<std::size_t> as_set(const std::vector<Token>& v) {
  std::set<std::size_t> out;
  for (Token t : v) out.insert(t.index());
  return out;
}

std::string stack_of(const std::vector<Token>& body) {
  std::string s;
  for (Token t : body) s = *push(s, t);
  return s;
}

}  // namespace

TEST_CASE("vocabulary layout") {
  const auto vocab = token_vocabulary();
  REQUIRE(vocab.size() == 6 + 7 + 13 + 25 + 2);
  std::size_t features = 0;
  bool has_delta_50 = false;
  for (Token t : vocab) {
    if (t.kind() == TokenKind::Feature) ++features;
    if (t.kind() == TokenKind::TimeDelta && t.delta_days() == 50) has_delta_50 = true;
  }
  CHECK(features == 6);
  CHECK(has_delta_50);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    CHECK(vocab[i].index() == i);
    CHECK(find_token(vocab[i].name()) == vocab[i]);
  }
  for (const char* f : {"open", "high", "low", "close", "volume", "vwap"}) {
    CHECK(find_token(f).has_value());
  }
  CHECK(Token::beg().index() == 51);
  CHECK(Token::end().index() == 52);
  CHECK(Token::op(Op::Corr).index() == 50);
  CHECK(Token::constant(-0.01).name() == "-0.01");
  CHECK(Token::delta(20).name() == "20");
  CHECK_FALSE(find_token("nope").has_value());
}

TEST_CASE("legal_next documented examples") {
  const auto empty = legal_next({}, 28);
  const auto s = as_set(empty);
  for (Token t : token_vocabulary()) {
    if (t.kind() == TokenKind::Feature) CHECK(s.count(t.index()));
  }
  CHECK_FALSE(s.count(Token::end().index()));

  const std::vector<Token> close{Token::feature(Feature::Close)};
  for (std::size_t b : {0, 1, 5, 28}) CHECK(as_set(legal_next(close, b)).count(Token::end().index()));

  const std::vector<Token> close5{Token::feature(Feature::Close), Token::delta(5)};
  const auto one = legal_next(close5, 1);
  REQUIRE(one.size() == 13);
  for (Token t : one) CHECK(t.kind() == TokenKind::TsUnaryOp);

  // No budget left with a complete body: only END.
  const auto done = legal_next(close, 0);
  REQUIRE(done.size() == 1);
  CHECK(done[0] == Token::end());
}

TEST_CASE("masking soundness against exhaustive search") {
  Oracle oracle;
  const Grammar grammar;
  std::vector<std::vector<Token>> prefixes{{}};
  for (Token a : token_vocabulary()) {
    if (a == Token::beg() || a == Token::end()) continue;
    prefixes.push_back({a});
    for (Token b : token_vocabulary()) {
      if (b == Token::beg() || b == Token::end()) continue;
      prefixes.push_back({a, b});
    }
  }
  std::size_t checked = 0;
  for (const auto& p : prefixes) {
    std::string stack;
    bool typed = true;
    for (Token t : p) {
      auto next = push(stack, t);
      if (!next) {
        typed = false;
        break;
      }
      stack = *next;
    }
    if (!typed) {
      CHECK_FALSE(type_stack(p).has_value());
      continue;
    }
    for (std::size_t budget = 0; budget <= 6; ++budget) {
      INFO("prefix " << to_rpn_string(p) << " budget " << budget);
      REQUIRE(as_set(grammar.legal_next(p, budget)) == oracle.legal(stack, budget));
      ++checked;
    }
  }
  CHECK(checked > 1000);

  // Longer reachable prefixes sampled by walking the masks.
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Token> body;
    const std::size_t len = 1 + rng.below(20);
    while (body.size() < len) {
      auto legal = grammar.legal_next(body, kMaxExpressionLength - body.size());
      std::erase(legal, Token::end());
      if (legal.empty()) break;
      body.push_back(legal[rng.below(legal.size())]);
    }
    const std::string stack = stack_of(body);
    for (std::size_t budget = 0; budget <= 6; ++budget) {
      INFO("prefix " << to_rpn_string(body) << " budget " << budget);
      REQUIRE(as_set(grammar.legal_next(body, budget)) == oracle.legal(stack, budget));
    }
  }
}

TEST_CASE("restricted alphabet masks") {
  const std::vector<Token> alphabet{Token::feature(Feature::Close), Token::feature(Feature::Vwap),
                                    Token::op(Op::Sub)};
  const Grammar g(alphabet);
  for (Token t : g.legal_next({}, 4)) CHECK((t == alphabet[0] || t == alphabet[1]));
  const std::vector<Token> two{alphabet[0], alphabet[1]};
  const auto next = g.legal_next(two, 1);
  REQUIRE(next.size() == 1);
  CHECK(next[0] == Token::op(Op::Sub));
  CHECK(g.min_completion(*type_stack(two)) == 1);
}

TEST_CASE("token accessors reject the wrong kind") {
  CHECK_THROWS(Token::feature(Feature::Close).delta_days());
  CHECK_THROWS(Token::delta(7));
  CHECK_THROWS(Token::constant(3.0));
  CHECK_THROWS(Token::from_index(53));
}
