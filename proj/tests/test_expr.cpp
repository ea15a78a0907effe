#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "expression_corpus.hpp"
#include "phihilfer/expr.hpp"

using namespace phihilfer;

namespace {

const std::set<std::string> kTU = {"t", "u"};

double eval_tu(std::string_view text, double t, double u) {
  return Expression::parse(text, kTU).eval(Bindings::at(t, u));
}

}  // namespace

TEST(Expr, Arithmetic) {
  EXPECT_EQ(eval_tu("1+2*3", 0, 0), 7.0);
  EXPECT_EQ(eval_tu("sin(0)", 0, 0), 0.0);
  EXPECT_EQ(eval_tu("t*u", 2, 3), 6.0);
  EXPECT_EQ(eval_tu("exp(0)", 0, 0), 1.0);
  EXPECT_NEAR(eval_tu("gamma(0.5)", 0, 0), 1.7724538509055159, 1e-15);
}

TEST(Expr, Precedence) {
  EXPECT_EQ(eval_tu("2+3*4^2", 0, 0), 50.0);
  EXPECT_EQ(eval_tu("-2^2", 0, 0), -4.0);
  EXPECT_EQ(eval_tu("2^3^2", 0, 0), 512.0);
  EXPECT_EQ(eval_tu("2^-1", 0, 0), 0.5);
  EXPECT_EQ(eval_tu("8/4/2", 0, 0), 1.0);
  EXPECT_EQ(eval_tu("8-4-2", 0, 0), 2.0);
}

TEST(Expr, SixthSectionShapeAtOrigin) {
  std::function<double(double)> phi = [](double t) { return t; };
  auto e = Expression::parse("(phi(t)-0)^(1-0.75)/(1+abs(u)) + 3*sin(phi(t))^2", kTU);
  Bindings b = Bindings::at(0.0, 0.0);
  b.phi = &phi;
  EXPECT_EQ(e.eval(b), 0.0);
}

TEST(Expr, SyntaxErrorPosition) {
  try {
    Expression::parse("u +", kTU);
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& err) {
    EXPECT_EQ(err.position(), 3u);
    EXPECT_NE(std::string(err.what()).find("expected"), std::string::npos);
  }
}

TEST(Expr, RejectsUnknownNamesAndArity) {
  EXPECT_THROW(Expression::parse("foo(t)", kTU), SyntaxError);
  EXPECT_THROW(Expression::parse("x+1", kTU), SyntaxError);
  EXPECT_THROW(Expression::parse("pow(t)", kTU), SyntaxError);
  EXPECT_THROW(Expression::parse("sin(t,u)", kTU), SyntaxError);
  EXPECT_THROW(Expression::parse("(t", kTU), SyntaxError);
  EXPECT_THROW(Expression::parse("t u", kTU), SyntaxError);
  EXPECT_THROW(Expression::parse("", kTU), SyntaxError);
}

TEST(Expr, DisallowedVariable) {
  EXPECT_THROW(Expression::parse("t+u", {"u"}), SyntaxError);
  EXPECT_NO_THROW(Expression::parse("u/(1+abs(u))", {"u"}));
  EXPECT_THROW(Expression::parse("phi(t)", {"t"}, false), SyntaxError);
}

TEST(Expr, DomainErrorsAreReported) {
  EXPECT_THROW(eval_tu("ln(0)", 0, 0), EvalError);
  EXPECT_THROW(eval_tu("1/u", 0, 0), EvalError);
  EXPECT_THROW(eval_tu("sqrt(-1)", 0, 0), EvalError);
  EXPECT_THROW(eval_tu("(-8)^(1/3)", 0, 0), EvalError);
  EXPECT_THROW(eval_tu("0^(-1)", 0, 0), EvalError);
  EXPECT_THROW(eval_tu("gamma(-1)", 0, 0), EvalError);
  EXPECT_THROW(eval_tu("exp(1000)", 0, 0), EvalError);
  try {
    eval_tu("1 + ln(u)", 0, -1);
    FAIL();
  } catch (const EvalError& err) {
    EXPECT_NE(std::string(err.what()).find("ln"), std::string::npos);
  }
}

TEST(Expr, MissingBindings) {
  auto e = Expression::parse("t+u", kTU);
  EXPECT_THROW(e.eval(Bindings::at(1.0)), EvalError);
  EXPECT_THROW(e.eval(Bindings::state(1.0)), EvalError);
  EXPECT_THROW(Expression::parse("phi(t)", kTU).eval(Bindings::at(1.0)), EvalError);
}

TEST(Expr, CorpusRoundTrips) {
  std::function<double(double)> phi = [](double t) { return std::log(1.0 + t); };
  for (auto text : kExpressionCorpus) {
    SCOPED_TRACE(std::string(text));
    const auto e = Expression::parse(text, kTU);
    const auto printed = e.to_string();
    const auto again = Expression::parse(printed, kTU);
    EXPECT_TRUE(e.structurally_equal(again)) << printed;
    EXPECT_EQ(again.to_string(), printed);
    for (double t : {0.25, 1.5}) {
      for (double u : {-0.7, 2.0}) {
        Bindings b = Bindings::at(t, u);
        b.phi = &phi;
        double v1 = 0, v2 = 0;
        bool f1 = false, f2 = false;
        try { v1 = e.eval(b); } catch (const EvalError&) { f1 = true; }
        try { v2 = again.eval(b); } catch (const EvalError&) { f2 = true; }
        EXPECT_EQ(f1, f2);
        if (!f1) {
          EXPECT_EQ(v1, v2);
        }
      }
    }
  }
}

TEST(Expr, StructuralEqualityDistinguishesTrees) {
  auto a = Expression::parse("1+2*3", kTU);
  auto b = Expression::parse("(1+2)*3", kTU);
  EXPECT_FALSE(a.structurally_equal(b));
  EXPECT_TRUE(a.structurally_equal(Expression::parse("1 + (2*3)", kTU)));
}

TEST(Expr, EvaluationIsPure) {
  auto e = Expression::parse("t*t+u", kTU);
  const double first = e.eval(Bindings::at(1.25, 0.5));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(e.eval(Bindings::at(1.25, 0.5)), first);
  EXPECT_EQ(e.to_string(), Expression::parse("t*t+u", kTU).to_string());
}
