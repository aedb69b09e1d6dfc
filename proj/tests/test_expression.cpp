#include <catch_amalgamated.hpp>

#include <chrono>

#include "riskminer/errors.hpp"
#include "riskminer/expression.hpp"
#include "test_support.hpp"

using namespace riskminer;
using rmtest::NaN;

namespace {

std::vector<Token> toks(std::initializer_list<const char*> names) {
  std::vector<Token> out;
  for (const char* n : names) out.push_back(*find_token(n));
  return out;
}

}  // namespace

TEST_CASE("parse produces postorder tokens") {
  CHECK(parse("close").tokens() == toks({"close"}));
  CHECK(parse("Sub(close, vwap)").tokens() == toks({"close", "vwap", "Sub"}));
  CHECK(parse("Corr(close, volume, 10)").tokens() == toks({"close", "volume", "10", "Corr"}));
  CHECK(parse("  Mean( close ,5 )").tokens() == toks({"close", "5", "Mean"}));
  CHECK(parse("Add(close, -0.5)").tokens() == toks({"close", "-0.5", "Add"}));
  CHECK(parse("Mul(2.0, Abs(open))").tokens() == toks({"2.0", "open", "Abs", "Mul"}));
}

TEST_CASE("parse rejects malformed text") {
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("close)"), ParseError);
  CHECK_THROWS_AS(parse("Mean(close 5)"), ParseError);
  CHECK_THROWS_AS(parse("Foo(close)"), ParseError);
  CHECK_THROWS_AS(parse("Mean(close, 7)"), ParseError);
  CHECK_THROWS_AS(parse("Add(close, 3.0)"), ParseError);
  CHECK_THROWS_AS(parse("Sub(close)"), ArityError);
  CHECK_THROWS_AS(parse("Mean(close, 5, 10)"), ArityError);
  CHECK_THROWS_AS(parse("Add(1.0, 2.0)"), InvalidExpression);
  try {
    parse("Sub(close, ?)");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 11);
  }
}

TEST_CASE("from_tokens validates typing and length") {
  CHECK_THROWS_AS(Expression::from_tokens({}), InvalidExpression);
  CHECK_THROWS_AS(Expression::from_tokens(toks({"close", "vwap"})), InvalidExpression);
  CHECK_THROWS_AS(Expression::from_tokens(toks({"close", "5"})), InvalidExpression);
  CHECK_THROWS_AS(Expression::from_tokens(toks({"5", "close", "Mean"})), InvalidExpression);
  std::vector<Token> longest{Token::feature(Feature::Close)};
  while (longest.size() + 2 <= kMaxExpressionLength) {
    longest.push_back(Token::feature(Feature::Open));
    longest.push_back(Token::op(Op::Add));
  }
  longest.push_back(Token::op(Op::Abs));
  REQUIRE(longest.size() == 28);
  CHECK_NOTHROW(Expression::from_tokens(longest));
  longest.push_back(Token::op(Op::Abs));
  CHECK_THROWS_AS(Expression::from_tokens(longest), InvalidExpression);
}

TEST_CASE("parse and unparse round trip on random expressions") {
  Rng rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const Expression e = rmtest::random_expression(rng);
    const std::string text = unparse(e);
    INFO(text);
    REQUIRE(parse(text) == e);
  }
}

TEST_CASE("evaluate documented examples") {
  Matrix seven(3, 8, 7.0);
  const Panel constant = rmtest::panel_from_close(seven);
  const Matrix c = evaluate(parse("close"), constant);
  for (double v : c.data()) CHECK(v == 7.0);

  std::array<Matrix, kFeatureCount> f;
  for (auto& m : f) m = Matrix(2, 4, 10.0);
  f[static_cast<std::size_t>(Feature::Vwap)] = Matrix(2, 4, 9.0);
  const Panel p(rmtest::symbols(2), rmtest::iso_dates(4), f, std::vector<std::uint8_t>(8, 1));
  const Matrix diff = evaluate(parse("Sub(close, vwap)"), p);
  for (double v : diff.data()) CHECK(v == 1.0);

  Matrix series(1, 6);
  for (std::size_t t = 0; t < 6; ++t) series(0, t) = static_cast<double>(t + 1);
  const Panel one = rmtest::panel_from_close(series);
  const Matrix mean = evaluate(parse("Mean(close, 5)"), one);
  CHECK(mean(0, 5) == 4.0);
  CHECK(mean(0, 4) == 3.0);
  for (std::size_t t = 0; t < 4; ++t) CHECK(is_missing(mean(0, t)));
}

TEST_CASE("operator details on a short series") {
  Matrix series(1, 6);
  const double v[6] = {3, 1, 4, 1, 5, 9};
  for (std::size_t t = 0; t < 6; ++t) series(0, t) = v[t];
  const Panel p = rmtest::panel_from_close(series);
  auto at5 = [&](const char* text) { return evaluate(parse(text), p)(0, 5); };
  CHECK(at5("Ref(close, 1)") == 5.0);
  CHECK(is_missing(evaluate(parse("Ref(close, 5)"), p)(0, 4)));
  CHECK(at5("Ref(close, 5)") == 3.0);
  CHECK(at5("Max(close, 5)") == 9.0);
  CHECK(at5("Min(close, 5)") == 1.0);
  CHECK(at5("Med(close, 5)") == 4.0);
  CHECK(at5("Sum(close, 5)") == 20.0);
  CHECK(at5("Rank(close, 5)") == 5.0);
  // window 1 4 1 5 9 has mean 4, squared deviations 9 0 9 1 25
  CHECK(at5("Var(close, 5)") == Catch::Approx(44.0 / 4));
  CHECK(at5("Std(close, 5)") == Catch::Approx(std::sqrt(11.0)));
  CHECK(at5("WMA(close, 5)") == Catch::Approx((1 * 1 + 2 * 4 + 3 * 1 + 4 * 5 + 5 * 9) / 15.0));
  {
    const double a = 2.0 / 6.0;
    double e = 1;
    for (double x : {4.0, 1.0, 5.0, 9.0}) e = a * x + (1 - a) * e;
    CHECK(at5("EMA(close, 5)") == Catch::Approx(e));
  }
  CHECK(at5("Sign(Sub(close, 5.0))") == 1.0);
  CHECK(evaluate(parse("Sign(Sub(close, 5.0))"), p)(0, 4) == 0.0);
  CHECK(at5("Greater(close, 5.0)") == 1.0);
  CHECK(at5("Less(close, 5.0)") == 0.0);
  CHECK(at5("Corr(close, close, 5)") == 1.0);
  CHECK(is_missing(at5("Std(close, 1)")));
  CHECK(is_missing(evaluate(parse("Log(Sub(close, close))"), p)(0, 0)));
  CHECK(is_missing(evaluate(parse("Div(close, Sub(close, close))"), p)(0, 0)));
}

TEST_CASE("constant windows give missing skew and correlation") {
  const Panel p = rmtest::panel_from_close(Matrix(2, 10, 4.0));
  const Matrix skew = evaluate(parse("Skew(close, 5)"), p);
  const Matrix corr = evaluate(parse("Corr(close, open, 5)"), p);
  const Matrix var = evaluate(parse("Var(close, 5)"), p);
  for (std::size_t t = 4; t < 10; ++t) {
    CHECK(is_missing(skew(0, t)));
    CHECK(is_missing(corr(0, t)));
    CHECK(var(0, t) == 0.0);
  }
}

TEST_CASE("time-series warm-up is missing") {
  const Panel p = rmtest::random_panel(4, 80, 3, 0.0, 0.0);
  for (Op op : {Op::Rank, Op::Skew, Op::Kurt, Op::Mean, Op::Med, Op::Sum, Op::Std, Op::Var,
                Op::Max, Op::Min, Op::WMA, Op::EMA}) {
    for (int t : kTimeDeltas) {
      if (t == 1 && (op == Op::Std || op == Op::Var || op == Op::Skew || op == Op::Kurt)) continue;
      const Matrix m = evaluate_tokens(
          std::vector<Token>{Token::feature(Feature::Close), Token::delta(t), Token::op(op)}, p);
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t d = 0; d + 1 < static_cast<std::size_t>(t); ++d) CHECK(is_missing(m(i, d)));
        CHECK_FALSE(is_missing(m(i, static_cast<std::size_t>(t) - 1)));
      }
    }
  }
}

TEST_CASE("CSRank is a within-day rank invariant to monotone transforms") {
  const Panel p = rmtest::random_panel(12, 30, 5);
  const Matrix a = evaluate(parse("CSRank(close)"), p);
  const Matrix b = evaluate(parse("CSRank(Log(Mul(close, 30.0)))"), p);
  for (std::size_t d = 0; d < 30; ++d) {
    std::vector<double> ranks;
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK((is_missing(a(i, d)) == is_missing(b(i, d))));
      if (!is_missing(a(i, d))) {
        ranks.push_back(a(i, d));
        CHECK(a(i, d) == b(i, d));
      }
    }
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t k = 0; k < ranks.size(); ++k) CHECK(ranks[k] == static_cast<double>(k + 1));
  }
}

TEST_CASE("evaluator agrees with the tree interpreter") {
  const Panel panel = rmtest::random_panel(20, 60, 99);
  Rng rng(7);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t mismatched = 0;
  for (int i = 0; i < 1000; ++i) {
    const Expression e = rmtest::random_expression(rng);
    const auto d = rmtest::compare(evaluate(e, panel), rmtest::interpret(e, panel));
    if (d.max_rel > 1e-9 || d.missing_mismatch > 0) {
      UNSCOPED_INFO(unparse(e) << " rel=" << d.max_rel << " missing=" << d.missing_mismatch);
      ++mismatched;
    }
    worst = std::max(worst, d.max_rel);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(mismatched == 0);
  CHECK(worst <= 1e-9);
  CHECK(secs < 5.0);
}
