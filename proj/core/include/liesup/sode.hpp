#pragma once

// Second- and higher-order ODE systems as jet-coordinate data, their
// first-order lifts, and the X_D / X_L pair of prolonged vector fields
// underlying superposition-rule verification.

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "liesup/integrate.hpp"
#include "liesup/liealg.hpp"
#include "liesup/vfield.hpp"

namespace liesup {

// Open-interval restriction on a base state symbol; applied to every copy of
// that symbol in a prolonged space.
struct StateConstraint {
  std::string symbol;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// n second-order equations d^2 x_i/dt^2 = F_i(t, x, v) in explicit form.
struct SodeSystem {
  std::shared_ptr<const SymbolTable> symbols;
  std::vector<std::string> coordinates;
  std::vector<std::string> velocities;
  std::vector<Expr> forces;
  Env parameters;
  std::vector<StateConstraint> constraints;
};

// n equations of order r: jets[j] names the j-th derivative coordinates
// (j = 0 .. r-1) and forces gives the r-th derivatives.
struct HodeSystem {
  std::shared_ptr<const SymbolTable> symbols;
  std::vector<std::vector<std::string>> jets;
  std::vector<Expr> forces;
  Env parameters;
  std::vector<StateConstraint> constraints;
};

using AnySystem = std::variant<SodeSystem, HodeSystem>;

SodeSystem make_sode(std::shared_ptr<const SymbolTable> symbols,
                     std::vector<std::string> coordinates,
                     std::vector<std::string> velocities,
                     std::vector<Expr> forces, Env parameters = {},
                     std::vector<StateConstraint> constraints = {});

HodeSystem make_hode(std::shared_ptr<const SymbolTable> symbols,
                     std::vector<std::vector<std::string>> jets,
                     std::vector<Expr> forces, Env parameters = {},
                     std::vector<StateConstraint> constraints = {});

int system_order(const AnySystem& system);
int system_size(const AnySystem& system);  // number of dependent variables n

// Jet coordinate names by level: result[j] holds the n level-j names.
std::vector<std::vector<std::string>> jet_levels(const AnySystem& system);

// Level-major flattening of jet_levels; this is the first-order state order.
std::vector<std::string> state_names(const AnySystem& system);

const std::vector<Expr>& system_forces(const AnySystem& system);
const Env& system_parameters(const AnySystem& system);
const std::vector<StateConstraint>& system_constraints(const AnySystem& system);
std::shared_ptr<const SymbolTable> system_symbols(const AnySystem& system);

// The t-dependent first-order lift: each level-j coordinate flows to level
// j+1, the top level to the forces. No decomposition is attached.
TimeDepVectorField to_first_order(const AnySystem& system);

struct ProlongedPair {
  VectorField xd;  // diagonal prolongation of the lift (t kept symbolic)
  VectorField xl;  // Sum over copies of (dF_i/dt) d/d(top-level coordinate)
};

// X_D and X_L on the space of `copies` system copies; on t-independent u,
// the total time derivative along solutions is X_D u and the second total
// derivative picks up the X_L correction.
ProlongedPair build_XD_XL(const AnySystem& system, int copies,
                          int first_copy = 1);

// Lie-Scheffers decision for the first-order lift. A non-empty decomposition
// must live on the lifted space; its fields are closed and each frozen lift
// is tested for span membership. With no decomposition the frozen lifts
// themselves are closed.
LieCheckResult is_sode_lie_system(const AnySystem& system,
                                  std::vector<TimeDepTerm> decomposition,
                                  std::span<const double> time_samples,
                                  const ClosureOptions& options = {});

// Domain guard over a (possibly prolonged) state vector: each constraint on a
// base symbol binds every copy `sym_(a)` appearing in `names`.
DomainGuard make_guard(std::span<const StateConstraint> constraints,
                       std::span<const std::string> names);

}  // namespace liesup
