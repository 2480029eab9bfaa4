#include <doctest.h>

#include <memory>

#include "liesup/catalog.hpp"
#include "liesup/liealg.hpp"

using namespace liesup;

namespace {

std::shared_ptr<SymbolTable> plane_table() {
  auto st = std::make_shared<SymbolTable>();
  st->declare("t", Role::Time);
  st->declare("x", Role::Coordinate);
  st->declare("v", Role::Velocity);
  return st;
}

// Random polynomial field on (x, v) with monomials up to total degree 2.
VectorField random_poly_field(const std::shared_ptr<SymbolTable>& st,
                              Sampler& sampler) {
  Expr x = Expr::symbol("x");
  Expr v = Expr::symbol("v");
  std::vector<Expr> monos{Expr::number(1.0), x, v, x * x, x * v, v * v};
  std::vector<Expr> comps;
  for (int c = 0; c < 2; ++c) {
    Expr sum;
    for (const Expr& m : monos)
      sum = sum + Expr::number(sampler.uniform(-1.0, 1.0)) * m;
    comps.push_back(sum);
  }
  return make_field(st, {"x", "v"}, std::move(comps));
}

ZeroVerdict field_zero(const VectorField& f, double tol = 1e-8) {
  ZeroTestOptions opt;
  opt.atol = tol;
  opt.rtol = tol;
  return probably_zero(std::span<const Expr>(f.components), Box{}, opt);
}

}  // namespace

TEST_CASE("rank of the KS-2 basis is 3") {
  CatalogEntry ks2 = load_builtin("ks2");
  SampleOptions opt;
  opt.box = Box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}}};
  auto r = rank_at_samples(ks2.basis, opt);
  REQUIRE(r.rank.has_value());
  CHECK(*r.rank == 3);
}

TEST_CASE("rank detects dependent and empty families") {
  auto st = plane_table();
  VectorField x1 = make_field(st, {"x", "v"},
                              {Expr::symbol("v"), Expr()});
  VectorField x2 = scale(Expr::number(2.0), x1);
  std::vector<VectorField> dependent{x1, x2};
  auto r = rank_at_samples(dependent);
  REQUIRE(r.rank.has_value());
  CHECK(*r.rank == 1);

  std::vector<VectorField> zero{zero_field_like(x1)};
  auto rz = rank_at_samples(zero);
  REQUIRE(rz.rank.has_value());
  CHECK(*rz.rank == 0);
}

TEST_CASE("span membership recovers bracket coefficients") {
  CatalogEntry osc = load_builtin("oscillator");
  REQUIRE(osc.basis.size() == 3);
  VectorField b = lie_bracket(osc.basis[0], osc.basis[2]);
  auto fit = span_membership(b, osc.basis);
  REQUIRE(fit.in_span(1e-7));
  CHECK(fit.coefficients[0] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(fit.coefficients[1] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(fit.coefficients[2] == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("span membership rejects fields outside the span") {
  auto st = plane_table();
  VectorField vdx = make_field(st, {"x", "v"}, {Expr::symbol("v"), Expr()});
  VectorField v2dx = make_field(
      st, {"x", "v"}, {Expr::symbol("v") * Expr::symbol("v"), Expr()});
  std::vector<VectorField> basis{vdx};
  auto fit = span_membership(v2dx, basis);
  CHECK_FALSE(fit.in_span(1e-7));
}

TEST_CASE("KS-2 closure: dimension 3 with the sl(2) structure constants") {
  CatalogEntry ks2 = load_builtin("ks2");
  ClosureOptions opt;
  opt.sampling.box = Box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}}};
  auto result = lie_closure(ks2.basis, opt);
  REQUIRE(result.status == ClosureResult::Status::Closed);
  CHECK(result.dimension == 3);
  REQUIRE(result.constants.has_value());
  const auto& c = *result.constants;
  // [X1,X2] = X1, [X1,X3] = 2 X2, [X2,X3] = X3.
  double err = 0.0;
  auto expected = [](int a, int b, int g) -> double {
    if (a == 0 && b == 1) return g == 0 ? 1.0 : 0.0;
    if (a == 0 && b == 2) return g == 1 ? 2.0 : 0.0;
    if (a == 1 && b == 2) return g == 2 ? 1.0 : 0.0;
    return 0.0;
  };
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      for (int g = 0; g < 3; ++g)
        err = std::max(err, std::abs(c.at(a, b, g) - expected(a, b, g)));
  CHECK(err < 1e-7);
  CHECK(c.jacobi_defect() < 1e-6);
}

TEST_CASE("structure constants accessor applies antisymmetry") {
  auto c = StructureConstants::zeros(2);
  c.set(0, 1, 0, 3.0);
  CHECK(c.at(0, 1, 0) == 3.0);
  CHECK(c.at(1, 0, 0) == -3.0);
  CHECK(c.at(0, 0, 0) == 0.0);
}

TEST_CASE("dissipative MP frozen fields exceed a small closure budget") {
  CatalogEntry dmp = load_builtin("dmp");
  TimeDepVectorField lift = lifted_field(dmp);
  std::vector<VectorField> frozen;
  for (double t0 : {0.0, 0.4, 0.8, 1.2}) frozen.push_back(freeze_time(lift, t0));
  ClosureOptions opt;
  opt.cap = 8;
  opt.max_depth = 4;
  opt.sampling.box = Box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}}};
  auto result = lie_closure(frozen, opt);
  CHECK(result.status == ClosureResult::Status::Exceeded);
}

TEST_CASE("Lie-Scheffers check accepts the KS-2 lift") {
  CatalogEntry ks2 = load_builtin("ks2");
  TimeDepVectorField lift = lifted_field(ks2);
  std::vector<double> times{0.0, 0.4, 0.8, 1.2};
  ClosureOptions opt;
  opt.sampling.box = Box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}}};
  auto result = lie_scheffers_check(lift, times, opt);
  CHECK(result.verdict == LieCheckResult::Verdict::LieSystem);
  CHECK(result.closure.dimension == 3);
  CHECK(result.decomposition_checked);
  CHECK(result.worst_membership_residual < 1e-7);
}

TEST_CASE("a constant field is a one-dimensional Lie system") {
  auto st = plane_table();
  VectorField f = make_field(st, {"x", "v"},
                             {Expr::number(1.0), Expr::number(2.0)});
  TimeDepVectorField x{f, {}};
  std::vector<double> times{0.0, 0.5, 1.0};
  auto result = lie_scheffers_check(x, times);
  CHECK(result.verdict == LieCheckResult::Verdict::LieSystem);
  CHECK(result.closure.dimension == 1);
}

TEST_CASE("minimal prolongation counts for the catalog bases") {
  SampleOptions opt;
  opt.box = Box{{"x", {0.5, 1.5}}, {"v", {-0.5, 0.5}},
                {"y1", {0.5, 1.5}}, {"y2", {-0.5, 0.5}}};
  CatalogEntry ks2 = load_builtin("ks2");
  CHECK(minimal_prolongation_count(ks2.basis, 4, opt) == std::optional<int>{2});
  CatalogEntry ks3 = load_builtin("ks3");
  CHECK(minimal_prolongation_count(ks3.basis, 4, opt) == std::optional<int>{1});
  CatalogEntry osc = load_builtin("oscillator");
  CHECK(minimal_prolongation_count(osc.basis, 4, opt) == std::optional<int>{2});

  auto st = plane_table();
  VectorField vdx = make_field(st, {"x", "v"}, {Expr::symbol("v"), Expr()});
  std::vector<VectorField> single{vdx};
  CHECK(minimal_prolongation_count(single, 4, opt) == std::optional<int>{1});
}

TEST_CASE("bracket laws hold for random polynomial triples") {
  auto st = plane_table();
  Sampler sampler(515);
  for (int trial = 0; trial < 50; ++trial) {
    VectorField a = random_poly_field(st, sampler);
    VectorField b = random_poly_field(st, sampler);
    VectorField c = random_poly_field(st, sampler);
    // Antisymmetry.
    CHECK(field_zero(add(lie_bracket(a, b), lie_bracket(b, a))).is_zero());
    // Jacobi.
    VectorField jac = add(add(lie_bracket(a, lie_bracket(b, c)),
                              lie_bracket(b, lie_bracket(c, a))),
                          lie_bracket(c, lie_bracket(a, b)));
    CHECK(field_zero(jac).is_zero());
  }
}

TEST_CASE("closure of an already closed basis is idempotent") {
  CatalogEntry osc = load_builtin("oscillator");
  auto first = lie_closure(osc.basis);
  REQUIRE(first.status == ClosureResult::Status::Closed);
  auto second = lie_closure(first.basis);
  REQUIRE(second.status == ClosureResult::Status::Closed);
  CHECK(second.dimension == first.dimension);
}
