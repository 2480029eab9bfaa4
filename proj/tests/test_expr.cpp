#include <doctest.h>

#include <cmath>
#include <memory>

#include "liesup/expr.hpp"

using namespace liesup;

namespace {

std::shared_ptr<SymbolTable> base_table() {
  auto st = std::make_shared<SymbolTable>();
  st->declare("t", Role::Time);
  st->declare("x", Role::Coordinate);
  st->declare("v", Role::Velocity);
  st->declare("b0", Role::Parameter);
  st->declare("k1", Role::Constant);
  return st;
}

}  // namespace

TEST_CASE("rational normalization and arithmetic") {
  auto half = make_rational(2, 4);
  REQUIRE(half.has_value());
  CHECK(half->num == 1);
  CHECK(half->den == 2);
  auto neg = make_rational(3, -6);
  REQUIRE(neg.has_value());
  CHECK(neg->num == -1);
  CHECK(neg->den == 2);
  CHECK_FALSE(make_rational(1, 0).has_value());

  auto s = rat_add(*half, *neg);
  REQUIRE(s.has_value());
  CHECK(s->num == 0);
  CHECK(s->den == 1);
  auto p = rat_mul(*half, *make_rational(4, 3));
  REQUIRE(p.has_value());
  CHECK(*p == *make_rational(2, 3));
  CHECK(to_double(*half) == doctest::Approx(0.5));
}

TEST_CASE("symbol table roles") {
  SymbolTable st;
  st.declare("t", Role::Time);
  st.declare("x", Role::Coordinate);
  st.declare("x", Role::Coordinate);  // re-declare same role: no-op
  CHECK(st.size() == 2);
  CHECK_THROWS_AS(st.declare("x", Role::Velocity), std::invalid_argument);
  CHECK_THROWS_AS(st.declare("s", Role::Time), std::invalid_argument);
  CHECK(st.time_symbol() == std::optional<std::string>{"t"});
  CHECK(st.role("x") == Role::Coordinate);
  CHECK_FALSE(st.contains("y"));
}

TEST_CASE("parse and evaluate the KS-2 style force") {
  auto st = base_table();
  Expr f = parse_expression("3/2 * v^2 / x - 2*b0*x^3", *st);
  Env at{{"x", 1.0}, {"v", 2.0}, {"b0", 1.0}};
  CHECK(evaluate(f, at) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("parse errors carry the offset") {
  auto st = base_table();
  try {
    parse_expression("x +", *st);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset == 3);
  }
}

TEST_CASE("undeclared identifiers are rejected with the symbol name") {
  auto st = base_table();
  try {
    parse_expression("2*w(t)*x", *st);
    FAIL("expected UndeclaredSymbolError");
  } catch (const UndeclaredSymbolError& e) {
    CHECK(e.symbol == "w");
  }
}

TEST_CASE("copy-suffixed identifiers lex as one token") {
  SymbolTable st;
  st.declare("x_(1)", Role::Coordinate);
  st.declare("x_(2)", Role::Coordinate);
  Expr e = parse_expression("x_(1)-x_(2)", st);
  CHECK(evaluate(e, Env{{"x_(1)", 5.0}, {"x_(2)", 2.0}}) ==
        doctest::Approx(3.0));
}

TEST_CASE("rational exponents") {
  auto st = base_table();
  Expr e = parse_expression("x^(3/2)", *st);
  CHECK(evaluate(e, Env{{"x", 4.0}}) == doctest::Approx(8.0));
  Expr d = differentiate(e, "x");
  // d/dx x^{3/2} = (3/2) x^{1/2}
  CHECK(evaluate(d, Env{{"x", 4.0}}) == doctest::Approx(3.0));
}

TEST_CASE("evaluation never throws on domain violations") {
  auto st = base_table();
  CHECK_FALSE(std::isfinite(
      evaluate(parse_expression("ln(0-1)", *st), Env{})));
  CHECK_FALSE(std::isfinite(
      evaluate(parse_expression("x/(x-x)", *st), Env{{"x", 1.0}})));
  CHECK_FALSE(std::isfinite(
      evaluate(parse_expression("sqrt(0-x)", *st), Env{{"x", 1.0}})));
  // Unbound symbols do throw.
  CHECK_THROWS_AS(evaluate(parse_expression("x", *st), Env{}),
                  UnboundSymbolError);
}

TEST_CASE("derivative of the force with respect to v") {
  auto st = base_table();
  Expr f = parse_expression("3/2 * v^2 / x - 2*b0*x^3", *st);
  Expr df = differentiate(f, "v");
  Expr expected = parse_expression("3*v/x", *st);
  std::vector<std::string> syms{"x", "v", "b0"};
  auto verdict = probably_zero(df - expected, syms, Box{});
  CHECK(verdict.is_zero());
}

TEST_CASE("differentiation is linear and satisfies the product rule") {
  auto st = base_table();
  Expr f = parse_expression("x*sin(v)+exp(x)", *st);
  Expr g = parse_expression("x^2 - v/x", *st);
  std::vector<std::string> syms{"x", "v"};
  Box box;

  Expr lin = differentiate(f + g, "x") -
             (differentiate(f, "x") + differentiate(g, "x"));
  CHECK(probably_zero(lin, syms, box).is_zero());

  Expr prod = differentiate(f * g, "v") -
              (differentiate(f, "v") * g + f * differentiate(g, "v"));
  CHECK(probably_zero(prod, syms, box).is_zero());
}

TEST_CASE("print-parse round trip preserves values") {
  auto st = base_table();
  std::vector<std::string> sources{
      "3/2 * v^2 / x - 2*b0*x^3",
      "sqrt(x^2+v^2)+sin(t)*cos(x)",
      "-x^(1/3)*exp(v)-ln(x)/(1+abs(v))",
      "sign(v)*(x-v)^2+k1",
  };
  Sampler sampler(11);
  std::vector<std::string> syms{"t", "x", "v", "b0", "k1"};
  for (const auto& src : sources) {
    Expr e = parse_expression(src, *st);
    Expr back = parse_expression(to_string(e), *st);
    for (int i = 0; i < 32; ++i) {
      Env p = sampler.sample_point(syms, Box{});
      double a = evaluate(e, p);
      double b = evaluate(back, p);
      if (std::isfinite(a))
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
      else
        CHECK_FALSE(std::isfinite(b));
    }
  }
}

TEST_CASE("substitution and symbol queries") {
  auto st = base_table();
  Expr e = parse_expression("x^2+2*b0*x", *st);
  Expr s = substitute(e, "b0", Expr::number(-1.0));
  CHECK_FALSE(depends_on(s, "b0"));
  CHECK(evaluate(s, Env{{"x", 3.0}}) == doctest::Approx(3.0));
  auto syms = free_symbols(e);
  CHECK(std::find(syms.begin(), syms.end(), "b0") != syms.end());
  CHECK(std::find(syms.begin(), syms.end(), "x") != syms.end());
}

TEST_CASE("probably_zero separates identities from near misses") {
  auto st = base_table();
  Expr identity = parse_expression("sin(x)^2+cos(x)^2-1", *st);
  Expr notzero = parse_expression("x^2-x", *st);
  std::vector<std::string> syms{"x"};
  CHECK(probably_zero(identity, syms, Box{}).is_zero());
  auto bad = probably_zero(notzero, syms, Box{});
  CHECK(bad.kind == ZeroVerdict::Kind::Nonzero);
  CHECK(!bad.witness.empty());
}

TEST_CASE("sampler is deterministic for a fixed seed") {
  Sampler a(42), b(42);
  for (int i = 0; i < 10; ++i)
    CHECK(a.uniform(-1.0, 1.0) == b.uniform(-1.0, 1.0));
  Sampler c(43);
  CHECK(Sampler(42).uniform(0, 1) != c.uniform(0, 1));
}
