#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "liesup/catalog.hpp"
#include "liesup/liealg.hpp"
#include "liesup/integrate.hpp"

using namespace liesup;

static void BM_LieBracket(benchmark::State& state) {
  CatalogEntry ks2 = load_builtin("ks2");
  for (auto _ : state) {
    VectorField b = lie_bracket(ks2.basis[1], ks2.basis[2]);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_LieBracket);

static void BM_LieClosureKs2(benchmark::State& state) {
  CatalogEntry ks2 = load_builtin("ks2");
  ClosureOptions opt;
  opt.sampling.box = ks2.trial.box;
  for (auto _ : state) {
    auto result = lie_closure(ks2.basis, opt);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_LieClosureKs2);

static void BM_IntegrateMp(benchmark::State& state) {
  CatalogEntry mp = load_builtin("mp");
  auto sys = compile_system(lifted_field(mp));
  std::vector<double> y0{1.1, 0.2};
  for (auto _ : state) {
    Trajectory traj = integrate_ivp(sys, y0, 0.0, 2.0);
    benchmark::DoNotOptimize(traj);
  }
}
BENCHMARK(BM_IntegrateMp);

static void BM_ProbablyZero(benchmark::State& state) {
  auto st = std::make_shared<SymbolTable>();
  st->declare("x", Role::Coordinate);
  Expr e = parse_expression("sin(x)^2+cos(x)^2-1", *st);
  std::vector<std::string> syms{"x"};
  for (auto _ : state) {
    auto verdict = probably_zero(e, syms, Box{});
    benchmark::DoNotOptimize(verdict);
  }
}
BENCHMARK(BM_ProbablyZero);

BENCHMARK_MAIN();
