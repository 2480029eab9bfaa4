#pragma once

// Vector fields on coordinate space: Lie brackets by exact differentiation,
// diagonal prolongations to replicated spaces, time freezing.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "liesup/expr.hpp"

namespace liesup {

struct VectorField {
  std::shared_ptr<const SymbolTable> symbols;
  std::vector<std::string> coordinates;  // component order
  std::vector<Expr> components;

  bool references_time() const;
};

// Validates component count and symbol declarations; throws
// std::invalid_argument on mismatch. When `allow_time` is false the
// components must not reference the time symbol.
VectorField make_field(std::shared_ptr<const SymbolTable> symbols,
                       std::vector<std::string> coordinates,
                       std::vector<Expr> components, bool allow_time = false);

bool same_space(const VectorField& a, const VectorField& b);

// Directional derivative X(f) = sum_i X^i df/dx^i.
Expr apply(const VectorField& x, const Expr& f);

// [X, Y]^i = X(Y^i) - Y(X^i); output left unsimplified.
VectorField lie_bracket(const VectorField& x, const VectorField& y);

VectorField add(const VectorField& a, const VectorField& b);
VectorField subtract(const VectorField& a, const VectorField& b);
VectorField scale(const Expr& c, const VectorField& x);
VectorField zero_field_like(const VectorField& x);

// Canonical replicated-space name: copy_name("x", 2) == "x_(2)".
std::string copy_name(const std::string& base, int copy);

// Diagonal prolongation over copies first_copy .. first_copy+copies-1.
// Copy 0 is conventionally the dependent variable; particular solutions are
// copies 1..m. The time symbol and Parameter/Constant/Auxiliary symbols are
// not replicated.
VectorField diagonal_prolongation(const VectorField& x, int copies,
                                  int first_copy = 1);

struct TimeDepTerm {
  Expr coefficient;  // depends on t only
  VectorField field; // time-independent
};

struct TimeDepVectorField {
  VectorField field;                       // components may reference t
  std::vector<TimeDepTerm> decomposition;  // optional; empty when unknown

  bool has_decomposition() const { return !decomposition.empty(); }
};

// Builds the total field sum_i coefficient_i * field_i from a decomposition.
TimeDepVectorField from_decomposition(std::vector<TimeDepTerm> terms);

// Verifies (by zero-testing over `box`) that the decomposition reproduces the
// components at the given frozen times.
ZeroVerdict decomposition_consistent(const TimeDepVectorField& x,
                                     std::span<const double> times,
                                     const Box& box,
                                     const ZeroTestOptions& options = {});

VectorField freeze_time(const VectorField& x, double t0);
VectorField freeze_time(const TimeDepVectorField& x, double t0);

TimeDepVectorField diagonal_prolongation(const TimeDepVectorField& x,
                                         int copies, int first_copy = 1);

}  // namespace liesup
