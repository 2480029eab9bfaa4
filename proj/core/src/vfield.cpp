#include "liesup/vfield.hpp"

#include <algorithm>
#include <stdexcept>

namespace liesup {

namespace {

const std::string& time_name(const SymbolTable& symbols) {
  static const std::string fallback = "t";
  static thread_local std::string cache;
  auto t = symbols.time_symbol();
  cache = t.value_or(fallback);
  return cache;
}

}  // namespace

bool VectorField::references_time() const {
  auto t = symbols->time_symbol();
  if (!t) return false;
  return std::any_of(components.begin(), components.end(),
                     [&](const Expr& c) { return depends_on(c, *t); });
}

VectorField make_field(std::shared_ptr<const SymbolTable> symbols,
                       std::vector<std::string> coordinates,
                       std::vector<Expr> components, bool allow_time) {
  if (!symbols) throw std::invalid_argument("null symbol table");
  if (coordinates.size() != components.size())
    throw std::invalid_argument("component count != coordinate count");
  for (const auto& c : coordinates)
    if (!symbols->contains(c))
      throw std::invalid_argument("undeclared coordinate '" + c + "'");
  auto t = symbols->time_symbol();
  for (const Expr& comp : components) {
    for (const auto& s : free_symbols(comp)) {
      if (!symbols->contains(s))
        throw std::invalid_argument("component references undeclared symbol '" +
                                    s + "'");
      if (!allow_time && t && s == *t)
        throw std::invalid_argument(
            "time-independent field references the time symbol");
    }
  }
  return VectorField{std::move(symbols), std::move(coordinates),
                     std::move(components)};
}

bool same_space(const VectorField& a, const VectorField& b) {
  return a.coordinates == b.coordinates;
}

Expr apply(const VectorField& x, const Expr& f) {
  Expr result = Expr::integer(0);
  for (std::size_t i = 0; i < x.coordinates.size(); ++i)
    result = result + x.components[i] * differentiate(f, x.coordinates[i]);
  return result;
}

VectorField lie_bracket(const VectorField& x, const VectorField& y) {
  if (!same_space(x, y))
    throw std::invalid_argument("lie_bracket: mismatched coordinate spaces");
  std::vector<Expr> components;
  components.reserve(x.coordinates.size());
  for (std::size_t i = 0; i < x.coordinates.size(); ++i)
    components.push_back(apply(x, y.components[i]) - apply(y, x.components[i]));
  return VectorField{x.symbols, x.coordinates, std::move(components)};
}

VectorField add(const VectorField& a, const VectorField& b) {
  if (!same_space(a, b))
    throw std::invalid_argument("add: mismatched coordinate spaces");
  std::vector<Expr> components;
  for (std::size_t i = 0; i < a.components.size(); ++i)
    components.push_back(a.components[i] + b.components[i]);
  return VectorField{a.symbols, a.coordinates, std::move(components)};
}

VectorField subtract(const VectorField& a, const VectorField& b) {
  if (!same_space(a, b))
    throw std::invalid_argument("subtract: mismatched coordinate spaces");
  std::vector<Expr> components;
  for (std::size_t i = 0; i < a.components.size(); ++i)
    components.push_back(a.components[i] - b.components[i]);
  return VectorField{a.symbols, a.coordinates, std::move(components)};
}

VectorField scale(const Expr& c, const VectorField& x) {
  std::vector<Expr> components;
  for (const Expr& comp : x.components) components.push_back(c * comp);
  return VectorField{x.symbols, x.coordinates, std::move(components)};
}

VectorField zero_field_like(const VectorField& x) {
  std::vector<Expr> components(x.components.size(), Expr::integer(0));
  return VectorField{x.symbols, x.coordinates, std::move(components)};
}

std::string copy_name(const std::string& base, int copy) {
  return base + "_(" + std::to_string(copy) + ")";
}

namespace {

// Builds the replicated symbol table and per-copy coordinate lists.
struct Replication {
  std::shared_ptr<SymbolTable> symbols;
  std::vector<std::vector<std::string>> coords_per_copy;
  std::vector<int> copies;
};

Replication replicate(const VectorField& x, int copies, int first_copy) {
  if (copies < 1) throw std::invalid_argument("copies must be >= 1");
  Replication rep;
  rep.symbols = std::make_shared<SymbolTable>();
  for (int c = 0; c < copies; ++c) rep.copies.push_back(first_copy + c);

  // Keep non-replicated symbols (time, parameters, constants, auxiliaries)
  // under their original names, in declaration order.
  for (std::size_t i = 0; i < x.symbols->size(); ++i) {
    const std::string& name = x.symbols->name(i);
    Role role = x.symbols->role_at(i);
    bool is_coord = std::find(x.coordinates.begin(), x.coordinates.end(),
                              name) != x.coordinates.end();
    if (!is_coord) rep.symbols->declare(name, role);
  }
  for (int a : rep.copies) {
    std::vector<std::string> copy_coords;
    for (const auto& c : x.coordinates) {
      std::string name = copy_name(c, a);
      rep.symbols->declare(name, x.symbols->role(c));
      copy_coords.push_back(std::move(name));
    }
    rep.coords_per_copy.push_back(std::move(copy_coords));
  }
  return rep;
}

}  // namespace

VectorField diagonal_prolongation(const VectorField& x, int copies,
                                  int first_copy) {
  Replication rep = replicate(x, copies, first_copy);
  std::vector<std::string> coordinates;
  std::vector<Expr> components;
  for (std::size_t ci = 0; ci < rep.copies.size(); ++ci) {
    int a = rep.copies[ci];
    for (std::size_t i = 0; i < x.coordinates.size(); ++i) {
      coordinates.push_back(rep.coords_per_copy[ci][i]);
      Expr comp = rename_symbols(x.components[i], [&](const std::string& s) {
        bool is_coord = std::find(x.coordinates.begin(), x.coordinates.end(),
                                  s) != x.coordinates.end();
        return is_coord ? copy_name(s, a) : s;
      });
      components.push_back(std::move(comp));
    }
  }
  return VectorField{std::move(rep.symbols), std::move(coordinates),
                     std::move(components)};
}

TimeDepVectorField from_decomposition(std::vector<TimeDepTerm> terms) {
  if (terms.empty())
    throw std::invalid_argument("decomposition must have at least one term");
  VectorField total = zero_field_like(terms.front().field);
  for (const TimeDepTerm& term : terms)
    total = add(total, scale(term.coefficient, term.field));
  return TimeDepVectorField{std::move(total), std::move(terms)};
}

ZeroVerdict decomposition_consistent(const TimeDepVectorField& x,
                                     std::span<const double> times,
                                     const Box& box,
                                     const ZeroTestOptions& options) {
  if (!x.has_decomposition())
    throw std::invalid_argument("field carries no decomposition");
  VectorField sum = zero_field_like(x.field);
  for (const TimeDepTerm& term : x.decomposition)
    sum = add(sum, scale(term.coefficient, term.field));
  VectorField diff = subtract(x.field, sum);

  const std::string& t = time_name(*x.field.symbols);
  ZeroVerdict last;
  for (double t0 : times) {
    std::vector<Expr> frozen;
    for (const Expr& c : diff.components)
      frozen.push_back(substitute(c, t, Expr::number(t0)));
    last = probably_zero(frozen, x.field.coordinates, box, options);
    if (last.kind != ZeroVerdict::Kind::Zero) return last;
  }
  return last;
}

VectorField freeze_time(const VectorField& x, double t0) {
  auto t = x.symbols->time_symbol();
  if (!t) return x;
  std::vector<Expr> components;
  for (const Expr& c : x.components)
    components.push_back(substitute(c, *t, Expr::number(t0)));
  return VectorField{x.symbols, x.coordinates, std::move(components)};
}

VectorField freeze_time(const TimeDepVectorField& x, double t0) {
  return freeze_time(x.field, t0);
}

TimeDepVectorField diagonal_prolongation(const TimeDepVectorField& x,
                                         int copies, int first_copy) {
  TimeDepVectorField out;
  out.field = diagonal_prolongation(x.field, copies, first_copy);
  for (const TimeDepTerm& term : x.decomposition)
    out.decomposition.push_back(
        {term.coefficient,
         diagonal_prolongation(term.field, copies, first_copy)});
  return out;
}

}  // namespace liesup
