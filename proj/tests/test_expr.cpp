#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mprig/expr.hpp"

using namespace mprig;
using Kind = Expr::Kind;

namespace {

// Random well-conditioned AST. Unbounded primitives only see bounded inputs so
// values and derivatives stay O(1) and the finite-difference oracle is sharp.
Expr random_tree(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 13);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  switch (pick(rng)) {
    case 0: return Expr::var(Coord::kX);
    case 1: return Expr::var(Coord::kY);
    case 2: return Expr(coef(rng));
    case 3: return random_tree(rng, depth - 1) + random_tree(rng, depth - 1);
    case 4: return random_tree(rng, depth - 1) - random_tree(rng, depth - 1);
    case 5: return sin(random_tree(rng, depth - 1)) * random_tree(rng, depth - 1);
    case 6: return sin(random_tree(rng, depth - 1));
    case 7: return cos(random_tree(rng, depth - 1));
    case 8: return exp(sin(random_tree(rng, depth - 1)));
    case 9: return log(Expr(2.5) + cos(random_tree(rng, depth - 1)));
    case 10: return sqrt(Expr(1.0) + pow(sin(random_tree(rng, depth - 1)), 2.0));
    case 11: return tanh(random_tree(rng, depth - 1));
    case 12: return random_tree(rng, depth - 1) / (Expr(2.0) + sin(random_tree(rng, depth - 1)));
    default: return smoothstep(Expr(0.5) + Expr(0.4) * sin(random_tree(rng, depth - 1)));
  }
}

}  // namespace

TEST_CASE("parse builds the standard precedence tree") {
  const Expr e = parse("x^2 + y");
  REQUIRE(e.kind() == Kind::kAdd);
  REQUIRE(e.lhs().kind() == Kind::kPow);
  CHECK(e.lhs().lhs().kind() == Kind::kVar);
  CHECK(e.lhs().lhs().coord() == Coord::kX);
  CHECK(e.lhs().rhs().is_constant(2.0));
  CHECK(e.rhs().kind() == Kind::kVar);
  CHECK(e.rhs().coord() == Coord::kY);
}

TEST_CASE("power binds tighter than unary minus, which binds tighter than product") {
  CHECK(evaluate(parse("-x^2"), 3.0, 0.0) == doctest::Approx(-9.0));
  CHECK(evaluate(parse("2*-x"), 3.0, 0.0) == doctest::Approx(-6.0));
  CHECK(evaluate(parse("8/4/2"), 0.0, 0.0) == doctest::Approx(1.0));
  CHECK(evaluate(parse("8-4-2"), 0.0, 0.0) == doctest::Approx(2.0));
  CHECK(evaluate(parse("  ( x + y ) * 2 "), 1.0, 2.0) == doctest::Approx(6.0));
}

TEST_CASE("sin(0) evaluates to zero everywhere") {
  const Expr e = parse("sin(0)");
  for (double x : {-1.0, 0.0, 0.3}) CHECK(evaluate(e, x, 2.0 * x) == 0.0);
}

TEST_CASE("collar expression hits its endpoint values") {
  const Expr e = parse("1 + 0.5*smoothstep((sqrt(x^2+y^2)-(1-0.1))/0.1)");
  CHECK(evaluate(e, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(evaluate(e, 1.0, 0.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(evaluate(e, 0.6, 0.8) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("constants and simple fields") {
  CHECK(evaluate(parse("7"), 0.2, -3.0) == 7.0);
  CHECK(evaluate(parse("x^2+y^2"), 0.6, 0.8) == doctest::Approx(1.0).epsilon(1e-15));
  const ScalarField u1 = ScalarField::parse("1");
  CHECK(u1(0.1, 0.2) == 1.0);
  CHECK(u1(-0.7, 0.0) == 1.0);
}

TEST_CASE("syntax errors carry the byte offset and the expected set") {
  try {
    parse("x + * y");
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.code() == ErrorCode::kSyntax);
    CHECK(err.offset() == 4);
    CHECK_FALSE(err.expected().empty());
  }
  try {
    parse("sin(x");
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 5);
  }
  CHECK_THROWS_AS(parse("x y"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("x^y"), ParseError);
}

TEST_CASE("unknown identifiers are reported") {
  try {
    parse("2*zeta + x");
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.code() == ErrorCode::kUnknownIdentifier);
    CHECK(err.offset() == 2);
  }
  CHECK_THROWS_AS(parse("foo(x)"), ParseError);
  CHECK_NOTHROW(parse("2*zeta + x", {"zeta"}));
}

TEST_CASE("non-finite values raise domain errors") {
  auto code_of = [](const char* text, double x, double y) {
    try {
      evaluate(parse(text), x, y);
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  CHECK(code_of("log(x)", 0.0, 0.0) == ErrorCode::kDomain);
  CHECK(code_of("log(x)", -1.0, 0.0) == ErrorCode::kDomain);
  CHECK(code_of("1/x", 0.0, 0.0) == ErrorCode::kDomain);
  CHECK(code_of("sqrt(x)", -1.0, 0.0) == ErrorCode::kDomain);

  const Expr e = parse("1/(x-y)");
  CompiledBundle bundle(std::span<const Expr>(&e, 1));
  double out = 0.0;
  CHECK_THROWS_AS(bundle.evaluate(0.5, 0.5, std::span<double>(&out, 1)), Error);
}

TEST_CASE("derivative examples") {
  const Expr d1 = differentiate(parse("x^2+y"), Coord::kX);
  for (double x : {-1.5, 0.0, 0.7}) CHECK(evaluate(d1, x, 3.0) == doctest::Approx(2.0 * x));
  const Expr d2 = differentiate(parse("sin(x*y)"), Coord::kX);
  CHECK(evaluate(d2, 1.0, 2.0) == doctest::Approx(2.0 * std::cos(2.0)).epsilon(1e-15));
}

TEST_CASE("symbolic derivatives match central differences on random trees") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Expr e = random_tree(rng, 6);
    const double x = coord(rng);
    const double y = coord(rng);
    for (Coord c : {Coord::kX, Coord::kY}) {
      const Expr d = differentiate(e, c);
      const double dx = c == Coord::kX ? h : 0.0;
      const double dy = c == Coord::kY ? h : 0.0;
      const double fd = (evaluate(e, x + dx, y + dy) - evaluate(e, x - dx, y - dy)) / (2.0 * h);
      const double exact = evaluate(d, x, y);
      INFO("expr = " << to_string(e));
      CHECK(std::abs(exact - fd) <= 1e-6 * std::max(1.0, std::abs(exact)));
      ++checked;
    }
  }
  CHECK(checked == 600);
}

TEST_CASE("compiled bundles agree bitwise with tree evaluation") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::vector<Expr> exprs;
  for (int i = 0; i < 20; ++i) {
    exprs.push_back(random_tree(rng, 5));
    exprs.push_back(differentiate(exprs.back(), Coord::kY));
  }
  CompiledBundle bundle(exprs);
  std::vector<double> out(exprs.size());
  for (int trial = 0; trial < 50; ++trial) {
    const double x = coord(rng);
    const double y = coord(rng);
    bundle.evaluate(x, y, out);
    for (std::size_t i = 0; i < exprs.size(); ++i) {
      CHECK(out[i] == doctest::Approx(evaluate(exprs[i], x, y)).epsilon(1e-14));
    }
    // Repeat evaluation is bitwise stable.
    std::vector<double> again(exprs.size());
    bundle.evaluate(x, y, again);
    CHECK(again == out);
  }
}

TEST_CASE("print and re-parse gives an evaluation-equivalent tree") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Expr e = random_tree(rng, 6);
    const Expr back = parse(to_string(e));
    for (int p = 0; p < 100; ++p) {
      const double x = coord(rng);
      const double y = coord(rng);
      const double a = evaluate(e, x, y);
      CHECK(std::abs(evaluate(back, x, y) - a) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
  // Internal primitives produced by differentiation also round-trip.
  const Expr d2 = differentiate(differentiate(parse("smoothstep(x+0.5)"), Coord::kX), Coord::kX);
  const Expr back = parse(to_string(d2));
  for (double x : {-0.3, 0.1, 0.25}) {
    CHECK(evaluate(back, x, 0.0) == doctest::Approx(evaluate(d2, x, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("differentiation is linear") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Expr f = random_tree(rng, 4);
    const Expr g = random_tree(rng, 4);
    const double a = coord(rng) * 3.0;
    const double b = coord(rng) * 3.0;
    const Expr lhs = differentiate(Expr(a) * f + Expr(b) * g, Coord::kX);
    const Expr df = differentiate(f, Coord::kX);
    const Expr dg = differentiate(g, Coord::kX);
    for (int p = 0; p < 10; ++p) {
      const double x = coord(rng);
      const double y = coord(rng);
      const double rhs = a * evaluate(df, x, y) + b * evaluate(dg, x, y);
      CHECK(evaluate(lhs, x, y) == doctest::Approx(rhs).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("smoothstep endpoint behaviour") {
  for (double t : {-3.0, -1e-3, 0.0}) CHECK(smoothstep_value(t) == 0.0);
  for (double t : {1.0, 1.0 + 1e-3, 4.0}) CHECK(smoothstep_value(t) == 1.0);
  CHECK(smoothstep_value(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  for (double t : {0.0, 1e-3, 1.0 - 1e-3, 1.0}) CHECK(std::abs(smoothstep_derivative(t)) <= 1e-12);

  // Higher derivatives through the symbolic closure also vanish at the ends.
  Expr e = smoothstep(Expr::var(Coord::kX));
  for (int order = 1; order <= 3; ++order) {
    e = differentiate(e, Coord::kX);
    for (double t : {0.0, 1e-3, 1.0 - 1e-3, 1.0}) CHECK(std::abs(evaluate(e, t, 0.0)) <= 1e-12);
  }

  // Monotone on the interior.
  double prev = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double v = smoothstep_value(i / 100.0);
    CHECK(v >= prev);
    if (i > 5 && i < 95) CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("parameters must be bound") {
  const ScalarField f = ScalarField::parse("B*x + k", ParamMap{{"B", 0.5}, {"k", 2.0}});
  CHECK(f(2.0, 0.0) == doctest::Approx(3.0));
  CHECK(parameters(f.expr()) == std::set<std::string>{"B", "k"});
  CHECK(f.derivative(Coord::kX)(0.0, 0.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(bind_parameters(parse("B*x", {"B"}), ParamMap{}), Error);
}

TEST_CASE("substitution composes") {
  const Expr e = parse("x^2 - y");
  const Expr c = substitute(e, parse("y"), parse("x + 1"));
  CHECK(evaluate(c, 0.5, 2.0) == doctest::Approx(4.0 - 1.5));
  CHECK_FALSE(depends_on_coords(parse("sin(2)*3")));
  CHECK(depends_on_coords(parse("sin(y)")));
}
