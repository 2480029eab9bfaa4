#include <doctest.h>

#include <cmath>
#include <memory>

#include "liesup/catalog.hpp"
#include "liesup/sode.hpp"

using namespace liesup;

namespace {

std::shared_ptr<SymbolTable> plane_table() {
  auto st = std::make_shared<SymbolTable>();
  st->declare("t", Role::Time);
  st->declare("x", Role::Coordinate);
  st->declare("v", Role::Velocity);
  return st;
}

ZeroVerdict expr_zero(const liesup::Expr& e, const liesup::Box& box = {}) {
  std::vector<liesup::Expr> one{e};
  return liesup::probably_zero(std::span<const liesup::Expr>(one), box);
}

AnySystem ks2_like(double b0) {
  auto st = plane_table();
  st->declare("b0", Role::Parameter);
  Expr force = parse_expression("3/2*v^2/x-2*b0*x^3", *st);
  force = substitute(force, "b0", Expr::number(b0));
  return make_sode(st, {"x"}, {"v"}, {force});
}

}  // namespace

TEST_CASE("SODE accessors and the KS-2 force value") {
  AnySystem sys = ks2_like(1.0);
  CHECK(system_order(sys) == 2);
  CHECK(system_size(sys) == 1);
  auto names = state_names(sys);
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "x");
  CHECK(names[1] == "v");
  const Expr& f = system_forces(sys)[0];
  CHECK(evaluate(f, Env{{"x", 1.0}, {"v", 2.0}}) == doctest::Approx(4.0));
}

TEST_CASE("HODE jets flatten level-major") {
  CatalogEntry ks3 = load_builtin("ks3");
  CHECK(system_order(ks3.system) == 3);
  CHECK(system_size(ks3.system) == 1);
  auto levels = jet_levels(ks3.system);
  REQUIRE(levels.size() == 3);
  auto names = state_names(ks3.system);
  REQUIRE(names.size() == 3);
  CHECK(names[0] == levels[0][0]);
  CHECK(names[2] == levels[2][0]);
}

TEST_CASE("first-order lift shifts levels and ends in the forces") {
  AnySystem sys = ks2_like(-1.0);
  TimeDepVectorField lift = to_first_order(sys);
  REQUIRE(lift.field.coordinates.size() == 2);
  // dx/dt = v.
  Expr dx = lift.field.components[0];
  CHECK(expr_zero(dx - Expr::symbol("v")).is_zero());
  // dv/dt = F.
  Expr dv = lift.field.components[1] - system_forces(sys)[0];
  CHECK(expr_zero(dv).is_zero());
}

TEST_CASE("X_D and X_L have the Theorem 4.1 shape") {
  CatalogEntry ks2 = load_builtin("ks2");
  for (int m : {1, 2}) {
    ProlongedPair pair = build_XD_XL(ks2.system, m);
    for (int a = 1; a <= m; ++a) {
      // X_D x_(a) = v_(a).
      Expr got = apply(pair.xd, Expr::symbol(copy_name("x", a)));
      Box box{{"t", {0.0, 1.0}}, {"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}}};
      CHECK(expr_zero(got - Expr::symbol(copy_name("v", a)), box).is_zero());
    }
    // X_L has no base components.
    for (std::size_t i = 0; i < pair.xl.coordinates.size(); ++i) {
      if (pair.xl.coordinates[i].rfind("x", 0) == 0)
        CHECK(pair.xl.components[i].is_literal(0.0));
    }
  }
}

TEST_CASE("each copy of the m-copy pair repeats the single-copy pair") {
  CatalogEntry mp = load_builtin("mp");
  ProlongedPair one = build_XD_XL(mp.system, 1);
  ProlongedPair two = build_XD_XL(mp.system, 2);
  REQUIRE(two.xd.coordinates.size() == 2 * one.xd.coordinates.size());
  Box box{{"t", {0.0, 1.0}}};
  for (int a : {1, 2}) {
    auto relabel = [a](const std::string& s) -> std::string {
      auto pos = s.rfind("_(1)");
      if (pos == std::string::npos || pos + 4 != s.size()) return s;
      return s.substr(0, pos) + "_(" + std::to_string(a) + ")";
    };
    std::size_t offset = (a - 1) * one.xd.components.size();
    for (std::size_t i = 0; i < one.xd.components.size(); ++i) {
      CHECK(expr_zero(two.xd.components[offset + i] -
                          rename_symbols(one.xd.components[i], relabel),
                      box)
                .is_zero());
      CHECK(expr_zero(two.xl.components[offset + i] -
                          rename_symbols(one.xl.components[i], relabel),
                      box)
                .is_zero());
    }
  }
}

TEST_CASE("X_L carries the time derivative of the force") {
  // x'' = -(1+t^2) x: dF/dt = -2 t x.
  auto st = plane_table();
  Expr force = parse_expression("0-(1+t^2)*x", *st);
  AnySystem sys = make_sode(st, {"x"}, {"v"}, {force});
  ProlongedPair pair = build_XD_XL(sys, 1);
  REQUIRE(pair.xl.coordinates.size() == 2);
  Expr expected = parse_expression("0-2*t*x_(1)", [] {
    SymbolTable jt;
    jt.declare("t", Role::Time);
    jt.declare("x_(1)", Role::Coordinate);
    return jt;
  }());
  Box box{{"t", {0.0, 1.0}}};
  CHECK(expr_zero(pair.xl.components[1] - expected, box).is_zero());
}

TEST_CASE("is_sode_lie_system on the catalog") {
  ClosureOptions opt;
  opt.sampling.box = Box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}},
                         {"y1", {0.5, 1.5}}, {"y2", {-0.5, 0.5}}};
  std::vector<double> times{0.0, 0.4, 0.8, 1.2};

  CatalogEntry ks2 = load_builtin("ks2");
  std::vector<TimeDepTerm> terms;
  for (std::size_t i = 0; i < ks2.basis.size(); ++i)
    terms.push_back({ks2.coefficients[i], ks2.basis[i]});
  auto yes = is_sode_lie_system(ks2.system, terms, times, opt);
  CHECK(yes.verdict == LieCheckResult::Verdict::LieSystem);
  CHECK(yes.closure.dimension == 3);

  CatalogEntry tv2 = load_builtin("tv2");
  auto no = is_sode_lie_system(tv2.system, {}, times, opt);
  CHECK(no.verdict == LieCheckResult::Verdict::NoEvidence);
}

TEST_CASE("guards bind every copy of a constrained symbol") {
  std::vector<StateConstraint> constraints{{"x", 0.001}};
  std::vector<std::string> names{"x_(1)", "v_(1)", "x_(2)", "v_(2)"};
  DomainGuard guard = make_guard(constraints, names);
  REQUIRE(guard.bounds.size() == 2);
  CHECK(guard.bounds[0].index == 0);
  CHECK(guard.bounds[1].index == 2);
  double ok[4] = {1.0, 0.0, 1.0, 0.0};
  double bad[4] = {1.0, 0.0, 0.0005, 0.0};
  CHECK(guard.ok(std::span<const double>(ok, 4)));
  CHECK_FALSE(guard.ok(std::span<const double>(bad, 4)));
}

TEST_CASE("constructors validate their inputs") {
  auto st = plane_table();
  CHECK_THROWS_AS(
      make_sode(st, {"x"}, {"v"}, std::vector<Expr>{}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      make_sode(st, {"x"}, {"missing"}, {Expr::number(0.0)}),
      std::invalid_argument);
}
