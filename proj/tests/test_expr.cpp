#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tnn/error.hpp"
#include "tnn/expr.hpp"

using namespace tnn;
using Op = Expr1D::Op;
constexpr double pi = std::numbers::pi;

TEST_CASE("parse builds the expected tree") {
  Expr1D e = parse("sin(pi*x)");
  REQUIRE(e.root().op == Op::Sin);
  CHECK(e.root().lhs->op == Op::Mul);
  CHECK(e.root().lhs->lhs->op == Op::Pi);
  CHECK(e.root().lhs->rhs->op == Op::X);

  Expr1D q = parse("2*x^2 - 1");
  REQUIRE(q.root().op == Op::Sub);
  const auto& mul = *q.root().lhs;
  CHECK(mul.op == Op::Mul);
  CHECK(mul.lhs->op == Op::Num);
  CHECK(mul.lhs->value == 2.0);
  CHECK(mul.rhs->op == Op::Pow);
  CHECK(mul.rhs->exponent == 2);
  CHECK(q.root().rhs->value == 1.0);

  CHECK(parse("sin(2*pi*x)")(0.25) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("precedence and associativity") {
  CHECK(parse("1 - 2 - 3")(0.0) == -4.0);
  CHECK(parse("8 / 4 / 2")(0.0) == 1.0);
  CHECK(parse("-x^2")(3.0) == -9.0);
  CHECK(parse("2*x+1")(2.0) == 5.0);
  CHECK(parse("(x+1)^3")(1.0) == 8.0);
  CHECK(parse("x^-2")(2.0) == 0.25);
  CHECK(parse("sqrt(4)+cos(0)+exp(0)")(0.0) == 4.0);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse(""), Error);
  CHECK_THROWS_AS(parse("sin(x"), Error);
  CHECK_THROWS_AS(parse("foo(x)"), Error);
  CHECK_THROWS_AS(parse("x^1.5"), Error);
  CHECK_THROWS_AS(parse("y"), Error);
  try {
    parse("x + * 2");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("position") != std::string::npos);
  }
}

TEST_CASE("print then parse round trip") {
  for (const char* s : {"sin(pi*x)", "2*x^2 - 1", "exp(-x^2/2)", "-(x-1)*(x+1)", "1/(1+x^2)",
                        "sqrt(2+cos(3*x))", "x^-3", "-x^3", "2^-1", "(1-x)-(2-x)", "x/(x/2)", "-2.5e-3*x"}) {
    Expr1D e = parse(s);
    CHECK_MESSAGE(parse(e.str()) == e, s);
  }
}

TEST_CASE("eval_batch") {
  CHECK(eval_batch(parse("exp(-x^2/2)"), std::vector<double>{0.0})[0] == 1.0);
  auto v = eval_batch(parse("x^2"), std::vector<double>{-2.0, 3.0});
  CHECK(v[0] == 4.0);
  CHECK(v[1] == 9.0);
  try {
    eval_batch(parse("1/x"), std::vector<double>{1.0, 0.0});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
  CHECK_THROWS_AS(eval_batch(parse("sqrt(x)"), std::vector<double>{-1.0}), Error);
}

TEST_CASE("deriv examples") {
  CHECK(deriv(parse("sin(pi*x)"))(0.0) == doctest::Approx(pi).epsilon(1e-15));
  CHECK(deriv(parse("x^2")) == parse("2*x"));
  CHECK(std::abs(deriv(parse("exp(-x^2/2)"))(1.0) + std::exp(-0.5)) <= 1e-12);
  CHECK(deriv(parse("3")).is_constant());
}

TEST_CASE("deriv agrees with central differences") {
  const char* exprs[] = {"sin(pi*x)", "exp(-x^2/2)", "x^3-2*x", "cos(2*x)*sin(3*x)", "1/(2+x^2)",
                         "sqrt(1+x^2)", "exp(sin(x))/(1+x^4)", "x^-2+x", "(x-1)^5", "-sqrt(3+cos(x))"};
  const double h = 1e-5;
  for (const char* s : exprs) {
    Expr1D e = parse(s);
    validate(e, 0.5, 2.0);
    Expr1D de = deriv(e);
    for (int k = 0; k < 100; ++k) {
      const double x = 0.5 + 1.5 * (k + 0.5) / 100.0;
      const double fd = (e(x + h) - e(x - h)) / (2 * h);
      CHECK_MESSAGE(std::abs(de(x) - fd) <= 1e-6 * (1.0 + std::abs(de(x))), s << " at " << x);
    }
  }
}

TEST_CASE("validate rejects singular factors") {
  CHECK_NOTHROW(validate(parse("1/(1+x)"), 0.0, 1.0));
  CHECK_THROWS_AS(validate(parse("1/x"), 0.0, 1.0), Error);
  CHECK_THROWS_AS(validate(parse("sqrt(x - 0.5)"), 0.0, 1.0), Error);
  CHECK_THROWS_AS(validate(parse("sqrt(x)"), -1.0, 1.0), Error);
}

TEST_CASE("SeparableFn evaluation matches the direct sum of products") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int d = 4;
  const std::vector<Expr1D> pool{parse("sin(pi*x)"), parse("1+x^2"), parse("exp(-x)"), parse("cos(x)"), parse("x")};
  SeparableFn f(d);
  std::vector<double> coefs;
  std::vector<std::vector<int>> picks;
  for (int k = 0; k < 3; ++k) {
    std::vector<Expr1D> fac;
    std::vector<int> pk;
    for (int i = 0; i < d; ++i) {
      pk.push_back(static_cast<int>(rng() % pool.size()));
      fac.push_back(pool[pk.back()]);
    }
    coefs.push_back(u(rng));
    picks.push_back(pk);
    f.add_term(coefs.back(), fac);
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(d);
    for (double& xi : x) xi = u(rng);
    double direct = 0.0;
    for (int k = 0; k < 3; ++k) {
      double prod = coefs[k];
      for (int i = 0; i < d; ++i) {
        const double xi = x[i];
        switch (picks[k][i]) {
          case 0: prod *= std::sin(pi * xi); break;
          case 1: prod *= 1 + xi * xi; break;
          case 2: prod *= std::exp(-xi); break;
          case 3: prod *= std::cos(xi); break;
          default: prod *= xi; break;
        }
      }
      direct += prod;
    }
    CHECK(std::abs(f(x) - direct) <= 1e-14 * (1.0 + std::abs(direct)));
  }
}

TEST_CASE("SeparableFn builders and partials") {
  const int d = 3;
  SeparableFn s = SeparableFn::sum(d, parse("sin(2*pi*x)"), parse("sin(pi*x)"), 2.0);
  CHECK(s.rank() == d);
  const std::vector<double> x{0.1, 0.3, 0.7};
  double expect = 0.0;
  for (int k = 0; k < d; ++k) {
    double prod = 2.0 * std::sin(2 * pi * x[k]);
    for (int i = 0; i < d; ++i)
      if (i != k) prod *= std::sin(pi * x[i]);
    expect += prod;
  }
  CHECK(std::abs(s(x) - expect) < 1e-14);
  SeparableFn p = SeparableFn::product(d, parse("x"), 3.0);
  CHECK(p(x) == doctest::Approx(3.0 * 0.1 * 0.3 * 0.7));
  CHECK(SeparableFn::constant(d, 5.0)(x) == 5.0);
  SeparableFn dp = p.partial(1);
  CHECK(dp(x) == doctest::Approx(3.0 * 0.1 * 0.7));
  CHECK(SeparableFn(d).zero());
}
