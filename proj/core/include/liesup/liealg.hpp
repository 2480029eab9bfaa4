#pragma once

// Numerical Lie-algebra machinery: rank/independence at sampled points,
// constant-coefficient span membership, bracket-closure generation with
// structure constants, the Lie-Scheffers decision, and the minimal
// prolongation count.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liesup/vfield.hpp"

namespace liesup {

struct SampleOptions {
  Box box;
  std::uint64_t seed = 74;
  int samples_per_dim = 4;   // sample points = samples_per_dim * field count
  double rank_rtol = 1e-8;   // singular-value threshold: rank_rtol * sigma_max
  int max_resamples = 256;
};

struct RankResult {
  std::optional<int> rank;  // nullopt when sampling failed (inconclusive)
  int samples_used = 0;
};

// Functional independence with constant coefficients: stacks component
// evaluations at several sample points (rows = point x component, columns =
// fields) and returns the numerical rank of the stacked matrix.
RankResult rank_at_samples(std::span<const VectorField> fields,
                           const SampleOptions& options = {});

// Pointwise rank at a generic point: rank of the (n x field-count) component
// matrix at single points, maximized over sampled points.
RankResult pointwise_rank(std::span<const VectorField> fields,
                          const SampleOptions& options = {});

struct SpanFit {
  bool conclusive = false;
  std::vector<double> coefficients;
  double residual = 0.0;  // max componentwise deviation / candidate scale

  bool in_span(double tol) const { return conclusive && residual < tol; }
};

SpanFit span_membership(const VectorField& candidate,
                        std::span<const VectorField> basis,
                        const SampleOptions& options = {});

// c[gamma] coefficients of [X_alpha, X_beta]; antisymmetry stored once
// (alpha < beta), the accessor applies the sign.
struct StructureConstants {
  int dim = 0;
  std::vector<double> upper;  // indexed by (alpha, beta, gamma), alpha < beta

  double at(int alpha, int beta, int gamma) const;
  void set(int alpha, int beta, int gamma, double value);
  static StructureConstants zeros(int dim);

  // max |sum_mu c^mu_ab c^nu_mc + cyclic| over all index choices.
  double jacobi_defect() const;
};

struct ClosureOptions {
  int cap = 12;
  int max_depth = 5;
  double membership_tol = 1e-7;
  SampleOptions sampling;
};

struct ClosureResult {
  enum class Status { Closed, Exceeded, Inconclusive };
  Status status = Status::Inconclusive;
  std::vector<VectorField> basis;
  int dimension = 0;  // basis size when closed; lower bound when exceeded
  int depth_reached = 0;
  int cap = 0;
  int max_depth = 0;
  std::optional<StructureConstants> constants;  // present when closed
  std::string detail;
};

// Lemma-2.5 style closure: prune the generators to an independent working
// basis, then repeatedly bracket pairs in lexicographic (i, j) order,
// adjoining any bracket outside the current span, until a full sweep adds
// nothing (closed) or the cap/depth is exceeded.
ClosureResult lie_closure(std::span<const VectorField> generators,
                          const ClosureOptions& options = {});

struct LieCheckResult {
  enum class Verdict { LieSystem, NoEvidence, Inconclusive };
  Verdict verdict = Verdict::Inconclusive;
  ClosureResult closure;
  bool decomposition_checked = false;
  double worst_membership_residual = 0.0;
  std::string detail;
};

// Lie-Scheffers test. With an explicit decomposition: closes the
// decomposition fields and verifies each frozen X_t lies in the closure span.
// Without: closes the frozen-time fields {X_{t_j}}.
LieCheckResult lie_scheffers_check(const TimeDepVectorField& x,
                                   std::span<const double> time_samples,
                                   const ClosureOptions& options = {});

// Smallest m <= m_max such that the diagonal prolongations of `basis` to m
// copies are linearly independent at a generic point (pointwise rank equals
// the basis size); nullopt when not reached.
std::optional<int> minimal_prolongation_count(
    std::span<const VectorField> basis, int m_max,
    const SampleOptions& options = {});

}  // namespace liesup
