#include "liesup/sode.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace liesup {

namespace {

void check_states(const SymbolTable& symbols,
                  const std::vector<std::string>& names) {
  for (const auto& n : names)
    if (!symbols.contains(n))
      throw std::invalid_argument("undeclared state symbol '" + n + "'");
}

void check_forces(const SymbolTable& symbols, const std::vector<Expr>& forces,
                  std::size_t n) {
  if (forces.size() != n)
    throw std::invalid_argument("force count does not match system size");
  for (const Expr& f : forces)
    for (const auto& s : free_symbols(f))
      if (!symbols.contains(s))
        throw std::invalid_argument("force references undeclared symbol '" + s +
                                    "'");
}

}  // namespace

SodeSystem make_sode(std::shared_ptr<const SymbolTable> symbols,
                     std::vector<std::string> coordinates,
                     std::vector<std::string> velocities,
                     std::vector<Expr> forces, Env parameters,
                     std::vector<StateConstraint> constraints) {
  if (!symbols) throw std::invalid_argument("null symbol table");
  if (coordinates.empty())
    throw std::invalid_argument("system must have at least one coordinate");
  if (velocities.size() != coordinates.size())
    throw std::invalid_argument("velocity count does not match coordinates");
  check_states(*symbols, coordinates);
  check_states(*symbols, velocities);
  check_forces(*symbols, forces, coordinates.size());
  return SodeSystem{std::move(symbols),    std::move(coordinates),
                    std::move(velocities), std::move(forces),
                    std::move(parameters), std::move(constraints)};
}

HodeSystem make_hode(std::shared_ptr<const SymbolTable> symbols,
                     std::vector<std::vector<std::string>> jets,
                     std::vector<Expr> forces, Env parameters,
                     std::vector<StateConstraint> constraints) {
  if (!symbols) throw std::invalid_argument("null symbol table");
  if (jets.empty()) throw std::invalid_argument("system order must be >= 1");
  std::size_t n = jets.front().size();
  if (n == 0)
    throw std::invalid_argument("system must have at least one coordinate");
  for (const auto& level : jets) {
    if (level.size() != n)
      throw std::invalid_argument("jet levels must have equal sizes");
    check_states(*symbols, level);
  }
  check_forces(*symbols, forces, n);
  return HodeSystem{std::move(symbols), std::move(jets), std::move(forces),
                    std::move(parameters), std::move(constraints)};
}

int system_order(const AnySystem& system) {
  return std::visit(
      [](const auto& s) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, SodeSystem>)
          return 2;
        else
          return static_cast<int>(s.jets.size());
      },
      system);
}

int system_size(const AnySystem& system) {
  return std::visit(
      [](const auto& s) { return static_cast<int>(s.forces.size()); }, system);
}

std::vector<std::vector<std::string>> jet_levels(const AnySystem& system) {
  return std::visit(
      [](const auto& s) -> std::vector<std::vector<std::string>> {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, SodeSystem>)
          return {s.coordinates, s.velocities};
        else
          return s.jets;
      },
      system);
}

std::vector<std::string> state_names(const AnySystem& system) {
  std::vector<std::string> names;
  for (const auto& level : jet_levels(system))
    names.insert(names.end(), level.begin(), level.end());
  return names;
}

const std::vector<Expr>& system_forces(const AnySystem& system) {
  return std::visit(
      [](const auto& s) -> const std::vector<Expr>& { return s.forces; },
      system);
}

const Env& system_parameters(const AnySystem& system) {
  return std::visit([](const auto& s) -> const Env& { return s.parameters; },
                    system);
}

const std::vector<StateConstraint>& system_constraints(
    const AnySystem& system) {
  return std::visit(
      [](const auto& s) -> const std::vector<StateConstraint>& {
        return s.constraints;
      },
      system);
}

std::shared_ptr<const SymbolTable> system_symbols(const AnySystem& system) {
  return std::visit(
      [](const auto& s) -> std::shared_ptr<const SymbolTable> {
        return s.symbols;
      },
      system);
}

TimeDepVectorField to_first_order(const AnySystem& system) {
  auto levels = jet_levels(system);
  const auto& forces = system_forces(system);
  std::size_t n = forces.size();

  std::vector<std::string> coordinates;
  std::vector<Expr> components;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      coordinates.push_back(levels[j][i]);
      if (j + 1 < levels.size())
        components.push_back(Expr::symbol(levels[j + 1][i]));
      else
        components.push_back(forces[i]);
    }
  }
  VectorField lift = make_field(system_symbols(system), std::move(coordinates),
                                std::move(components), /*allow_time=*/true);
  return TimeDepVectorField{std::move(lift), {}};
}

ProlongedPair build_XD_XL(const AnySystem& system, int copies,
                          int first_copy) {
  TimeDepVectorField lift = to_first_order(system);
  auto levels = jet_levels(system);
  const auto& forces = system_forces(system);
  std::size_t n = forces.size();
  auto symbols = system_symbols(system);
  auto t = symbols->time_symbol();

  // X_L lives on the same space, with dF_i/dt in the top-level slots only.
  std::vector<Expr> xl_components(lift.field.coordinates.size(),
                                  Expr::integer(0));
  std::size_t top_offset = (levels.size() - 1) * n;
  for (std::size_t i = 0; i < n; ++i)
    xl_components[top_offset + i] =
        t ? differentiate(forces[i], *t) : Expr::integer(0);
  VectorField xl = make_field(symbols, lift.field.coordinates,
                              std::move(xl_components), /*allow_time=*/true);

  return ProlongedPair{
      diagonal_prolongation(lift.field, copies, first_copy),
      diagonal_prolongation(xl, copies, first_copy),
  };
}

LieCheckResult is_sode_lie_system(const AnySystem& system,
                                  std::vector<TimeDepTerm> decomposition,
                                  std::span<const double> time_samples,
                                  const ClosureOptions& options) {
  TimeDepVectorField lift = to_first_order(system);
  if (!decomposition.empty()) {
    for (const TimeDepTerm& term : decomposition)
      if (!same_space(term.field, lift.field))
        throw std::invalid_argument(
            "decomposition field does not live on the lifted space");
    lift.decomposition = std::move(decomposition);
  }
  return lie_scheffers_check(lift, time_samples, options);
}

namespace {

// "x_(3)" -> "x"; names without a copy suffix are returned unchanged.
std::string base_of(const std::string& name) {
  auto pos = name.rfind("_(");
  if (pos == std::string::npos || name.back() != ')') return name;
  for (std::size_t i = pos + 2; i + 1 < name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return name;
  if (pos + 2 == name.size() - 1) return name;
  return name.substr(0, pos);
}

}  // namespace

DomainGuard make_guard(std::span<const StateConstraint> constraints,
                       std::span<const std::string> names) {
  DomainGuard guard;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::string base = base_of(names[i]);
    for (const StateConstraint& c : constraints)
      if (c.symbol == base || c.symbol == names[i])
        guard.bounds.push_back(
            {static_cast<int>(i), c.lower, c.upper});
  }
  return guard;
}

}  // namespace liesup
