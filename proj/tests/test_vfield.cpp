#include <doctest.h>

#include <memory>

#include "liesup/catalog.hpp"
#include "liesup/vfield.hpp"

using namespace liesup;

namespace {

struct Sl2 {
  std::shared_ptr<SymbolTable> st;
  VectorField x1, x2, x3;
};

// The oscillator sl(2) on (x, v): X1 = v d/dx, X2 = (x d/dx - v d/dv)/2,
// X3 = -x d/dv.
Sl2 oscillator_sl2() {
  auto st = std::make_shared<SymbolTable>();
  st->declare("t", Role::Time);
  st->declare("x", Role::Coordinate);
  st->declare("v", Role::Velocity);
  std::vector<std::string> coords{"x", "v"};
  auto E = [&](const char* s) { return parse_expression(s, *st); };
  Sl2 out;
  out.x1 = make_field(st, coords, {E("v"), E("0")});
  out.x2 = make_field(st, coords, {E("x/2"), E("0-v/2")});
  out.x3 = make_field(st, coords, {E("0"), E("0-x")});
  out.st = st;
  return out;
}

ZeroVerdict field_zero(const VectorField& f) {
  return probably_zero(std::span<const Expr>(f.components), Box{});
}

ZeroVerdict expr_zero(const Expr& e, const Box& box = {}) {
  std::vector<Expr> one{e};
  return probably_zero(std::span<const Expr>(one), box);
}

}  // namespace

TEST_CASE("bracket of a field with itself vanishes") {
  auto sl2 = oscillator_sl2();
  CHECK(field_zero(lie_bracket(sl2.x1, sl2.x1)).is_zero());
  CHECK(field_zero(lie_bracket(sl2.x3, sl2.x3)).is_zero());
}

TEST_CASE("oscillator sl(2) brackets") {
  auto sl2 = oscillator_sl2();
  // [X1, X2] = X1
  CHECK(field_zero(subtract(lie_bracket(sl2.x1, sl2.x2), sl2.x1)).is_zero());
  // [X1, X3] = 2 X2
  CHECK(field_zero(subtract(lie_bracket(sl2.x1, sl2.x3),
                            scale(Expr::number(2.0), sl2.x2)))
            .is_zero());
  // [X2, X3] = X3
  CHECK(field_zero(subtract(lie_bracket(sl2.x2, sl2.x3), sl2.x3)).is_zero());
}

TEST_CASE("copy naming convention") {
  CHECK(copy_name("x", 2) == "x_(2)");
  CHECK(copy_name("y1", 0) == "y1_(0)");
}

TEST_CASE("diagonal prolongation replicates components per copy") {
  auto sl2 = oscillator_sl2();
  VectorField p = diagonal_prolongation(sl2.x1, 2);
  REQUIRE(p.coordinates.size() == 4);
  CHECK(p.coordinates[0] == "x_(1)");
  CHECK(p.coordinates[1] == "v_(1)");
  CHECK(p.coordinates[2] == "x_(2)");
  CHECK(p.coordinates[3] == "v_(2)");
  // X(x_(a)) = v_(a)
  Expr got = apply(p, Expr::symbol("x_(2)"));
  CHECK(expr_zero(got - Expr::symbol("v_(2)")).is_zero());
}

TEST_CASE("prolongation commutes with the bracket") {
  auto sl2 = oscillator_sl2();
  std::vector<std::pair<const VectorField*, const VectorField*>> pairs{
      {&sl2.x1, &sl2.x2}, {&sl2.x1, &sl2.x3}, {&sl2.x2, &sl2.x3}};
  for (int m = 1; m <= 3; ++m) {
    for (auto [a, b] : pairs) {
      VectorField lhs = diagonal_prolongation(lie_bracket(*a, *b), m);
      VectorField rhs = lie_bracket(diagonal_prolongation(*a, m),
                                    diagonal_prolongation(*b, m));
      CHECK(field_zero(subtract(lhs, rhs)).is_zero());
    }
  }
}

TEST_CASE("prolongation is linear") {
  auto sl2 = oscillator_sl2();
  VectorField sum = add(sl2.x1, scale(Expr::number(3.0), sl2.x3));
  VectorField lhs = diagonal_prolongation(sum, 2);
  VectorField rhs = add(diagonal_prolongation(sl2.x1, 2),
                        scale(Expr::number(3.0), diagonal_prolongation(sl2.x3, 2)));
  CHECK(field_zero(subtract(lhs, rhs)).is_zero());
}

TEST_CASE("make_field validates components") {
  auto sl2 = oscillator_sl2();
  CHECK_THROWS_AS(make_field(sl2.st, {"x", "v"}, {Expr::number(1.0)}),
                  std::invalid_argument);
  // Time-dependent components need allow_time.
  Expr tdep = parse_expression("t*x", *sl2.st);
  CHECK_THROWS_AS(make_field(sl2.st, {"x", "v"}, {tdep, Expr()}),
                  std::invalid_argument);
  VectorField ok = make_field(sl2.st, {"x", "v"}, {tdep, Expr()}, true);
  CHECK(ok.references_time());
}

TEST_CASE("freezing the KS-2 lift at t = 0 gives X3") {
  CatalogEntry ks2 = load_builtin("ks2");
  TimeDepVectorField lift = lifted_field(ks2);
  REQUIRE(lift.has_decomposition());
  VectorField frozen = freeze_time(lift, 0.0);
  // a0(0) = sin 0 = 0, so the frozen field is the third decomposition field.
  VectorField x3 = lift.decomposition[2].field;
  Box box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}}};
  auto diff = subtract(frozen, x3);
  CHECK(probably_zero(std::span<const Expr>(diff.components), box).is_zero());
}

TEST_CASE("decomposition reproduces the lift at frozen times") {
  for (const char* name : {"ks2", "mp", "oscillator", "t2"}) {
    CatalogEntry entry = load_builtin(name);
    TimeDepVectorField lift = lifted_field(entry);
    REQUIRE(lift.has_decomposition());
    std::vector<double> times{0.0, 0.3, 0.7, 1.1};
    Box box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}}};
    auto verdict = decomposition_consistent(lift, times, box);
    CHECK(verdict.is_zero());
  }
}

TEST_CASE("prolongation of a time-dependent decomposition keeps terms") {
  CatalogEntry ks2 = load_builtin("ks2");
  TimeDepVectorField lift = lifted_field(ks2);
  TimeDepVectorField prolonged = diagonal_prolongation(lift, 2);
  CHECK(prolonged.decomposition.size() == lift.decomposition.size());
  CHECK(prolonged.field.coordinates.size() ==
        2 * lift.field.coordinates.size());
}
