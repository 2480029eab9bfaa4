#include "liesup/catalog.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace liesup {

namespace {

using nlohmann::json;

Role level_role(int level) {
  if (level == 0) return Role::Coordinate;
  if (level == 1) return Role::Velocity;
  return Role::Jet;
}

std::vector<std::string> string_list(const json& j) {
  std::vector<std::string> out;
  for (const auto& item : j) out.push_back(item.get<std::string>());
  return out;
}

Expr parse_with(const std::string& src, const SymbolTable& table) {
  return parse_expression(src, table);
}

// Applies the (already expanded) local definitions, then the numeric
// parameter values.
Expr finalize(Expr e, const std::map<std::string, Expr>& defs,
              const std::map<std::string, Expr>& params) {
  if (!defs.empty()) e = substitute(e, defs);
  if (!params.empty()) e = substitute(e, params);
  return e;
}

struct EntryBuilder {
  json j;
  CatalogEntry entry;
  std::vector<std::vector<std::string>> levels;
  std::vector<std::string> flat_states;
  std::map<std::string, Expr> param_subst;

  void build() {
    entry.name = j.at("name").get<std::string>();
    entry.title = j.value("title", std::string{});
    entry.notes = j.value("notes", std::string{});
    build_system();
    build_basis();
    build_rules();
    build_integrals();
    build_trial();
  }

  void build_system() {
    const json& js = j.at("system");
    std::string kind = js.at("kind").get<std::string>();

    SymbolTable table;
    table.declare("t", Role::Time);
    if (kind == "sode") {
      levels = {string_list(js.at("states")), string_list(js.at("velocities"))};
    } else if (kind == "hode") {
      for (const auto& level : js.at("jets")) levels.push_back(string_list(level));
    } else {
      throw std::runtime_error("unknown system kind '" + kind + "'");
    }
    for (std::size_t lvl = 0; lvl < levels.size(); ++lvl)
      for (const auto& name : levels[lvl])
        table.declare(name, level_role(static_cast<int>(lvl)));
    if (js.contains("parameters"))
      for (auto it = js["parameters"].begin(); it != js["parameters"].end();
           ++it) {
        table.declare(it.key(), Role::Parameter);
        entry.parameters[it.key()] = it.value().get<double>();
        param_subst[it.key()] = Expr::number(it.value().get<double>());
      }
    auto symbols = std::make_shared<const SymbolTable>(std::move(table));

    for (const auto& level : levels)
      flat_states.insert(flat_states.end(), level.begin(), level.end());

    std::vector<Expr> forces;
    for (const auto& f : js.at("forces"))
      forces.push_back(
          finalize(parse_with(f.get<std::string>(), *symbols), {}, param_subst));

    std::vector<StateConstraint> constraints;
    if (js.contains("constraints"))
      for (const auto& c : js["constraints"]) {
        StateConstraint sc;
        sc.symbol = c.at("symbol").get<std::string>();
        if (c.contains("lower")) sc.lower = c["lower"].get<double>();
        if (c.contains("upper")) sc.upper = c["upper"].get<double>();
        constraints.push_back(sc);
      }

    if (kind == "sode")
      entry.system =
          make_sode(symbols, levels[0], levels[1], std::move(forces),
                    entry.parameters, std::move(constraints));
    else
      entry.system = make_hode(symbols, levels, std::move(forces),
                               entry.parameters, std::move(constraints));
  }

  VectorField parse_field(const json& components) {
    auto symbols = system_symbols(entry.system);
    std::vector<Expr> comps;
    for (const auto& name : flat_states) {
      if (components.contains(name))
        comps.push_back(finalize(
            parse_with(components[name].get<std::string>(), *symbols), {},
            param_subst));
      else
        comps.push_back(Expr::integer(0));
    }
    return make_field(symbols, flat_states, std::move(comps));
  }

  void build_basis() {
    if (j.contains("basis")) {
      const json& jb = j["basis"];
      for (const auto& f : jb.at("fields")) entry.basis.push_back(parse_field(f));
      if (jb.contains("coefficients")) {
        auto symbols = system_symbols(entry.system);
        for (const auto& c : jb["coefficients"])
          entry.coefficients.push_back(finalize(
              parse_with(c.get<std::string>(), *symbols), {}, param_subst));
        if (entry.coefficients.size() != entry.basis.size())
          throw std::runtime_error("coefficient count != basis size");
      }
      if (jb.contains("expected_dimension"))
        entry.expected_dimension = jb["expected_dimension"].get<int>();
    }
    if (j.contains("extra_fields"))
      for (const auto& f : j["extra_fields"])
        entry.extra_fields.emplace_back(f.at("name").get<std::string>(),
                                        parse_field(f.at("components")));
  }

  SymbolTable rule_table(int copies, int first_copy,
                         const std::vector<std::string>& constants,
                         const std::vector<std::string>& aux) {
    SymbolTable table;
    table.declare("t", Role::Time);
    for (int a = first_copy; a < first_copy + copies; ++a)
      for (std::size_t lvl = 0; lvl < levels.size(); ++lvl)
        for (const auto& name : levels[lvl])
          table.declare(copy_name(name, a), level_role(static_cast<int>(lvl)));
    for (const auto& k : constants) table.declare(k, Role::Constant);
    for (const auto& a : aux) table.declare(a, Role::Auxiliary);
    for (const auto& [p, v] : entry.parameters) table.declare(p, Role::Parameter);
    return table;
  }

  void build_rules() {
    if (!j.contains("rules")) return;
    for (const json& jr : j["rules"]) {
      SuperpositionRule rule;
      rule.label = jr.at("label").get<std::string>();
      rule.copies = jr.at("copies").get<int>();
      rule.partial = jr.value("kind", std::string{"general"}) == "partial";
      if (jr.contains("constants")) rule.constants = string_list(jr["constants"]);
      if (jr.contains("aux")) rule.aux = string_list(jr["aux"]);
      if (jr.contains("k_box")) {
        rule.k_box.lo = jr["k_box"][0].get<double>();
        rule.k_box.hi = jr["k_box"][1].get<double>();
      }

      // Copy 0 (the dependent solution) is visible to genericity constraints
      // and initial-guess expressions.
      SymbolTable table =
          rule_table(rule.copies + 1, 0, rule.constants, rule.aux);

      std::map<std::string, Expr> defs;
      if (jr.contains("definitions"))
        for (const json& jd : jr["definitions"]) {
          std::string name = jd.at("name").get<std::string>();
          Expr e = finalize(parse_with(jd.at("expr").get<std::string>(), table),
                            defs, param_subst);
          table.declare(name, Role::Auxiliary);
          defs[name] = std::move(e);
        }

      for (const json& jb : jr.at("branches")) {
        RuleBranch branch;
        for (const auto& comp : jb)
          branch.components.push_back(finalize(
              parse_with(comp.get<std::string>(), table), defs, param_subst));
        rule.branches.push_back(std::move(branch));
      }
      if (jr.contains("genericity"))
        for (const json& jg : jr["genericity"]) {
          GenericityConstraint g;
          g.expression = finalize(
              parse_with(jg.at("expr").get<std::string>(), table), defs,
              param_subst);
          if (jg.contains("min_abs")) {
            g.min_value = jg["min_abs"].get<double>();
            g.use_abs = true;
          } else if (jg.contains("min")) {
            g.min_value = jg["min"].get<double>();
            g.use_abs = false;
          }
          g.margin = jg.value("margin", 0.1);
          rule.genericity.push_back(std::move(g));
        }
      if (jr.contains("initial_guess"))
        for (const auto& ig : jr["initial_guess"])
          rule.initial_guess.push_back(finalize(
              parse_with(ig.get<std::string>(), table), defs, param_subst));
      entry.rules.push_back(std::move(rule));
    }
  }

  void build_integrals() {
    if (!j.contains("integrals")) return;
    for (const json& ji : j["integrals"]) {
      FirstIntegral in;
      in.name = ji.at("name").get<std::string>();
      in.copies = ji.value("copies", 2);
      in.time_dependent = ji.value("time_dependent", false);
      in.hold_for_char = ji.value("hold_for_char", false);
      in.solve_symbol = ji.value("solve_symbol", std::string{});
      SymbolTable table = rule_table(in.copies, 1, {}, {});
      in.expression = finalize(parse_with(ji.at("expr").get<std::string>(), table),
                               {}, param_subst);
      entry.integrals.push_back(std::move(in));
    }
  }

  void build_trial() {
    if (!j.contains("trial")) return;
    const json& jt = j["trial"];
    entry.trial.t_begin = jt.value("t_begin", 0.0);
    entry.trial.t_end = jt.value("t_end", 2.0);
    if (jt.contains("box"))
      for (auto it = jt["box"].begin(); it != jt["box"].end(); ++it)
        entry.trial.box[it.key()] =
            Interval{it.value()[0].get<double>(), it.value()[1].get<double>()};
    if (jt.contains("times"))
      for (const auto& t : jt["times"])
        entry.trial.times.push_back(t.get<double>());
  }
};

// ---------------------------------------------------------------------------
// Built-in entries. Notes cite equations of Carinena, Grabowski & de Lucas,
// "Superposition rules for higher-order systems and their applications",
// J. Phys. A 45 (2012) 185202.

const char* kFree = R"json({
  "name": "free",
  "title": "Free particle x'' = 0",
  "notes": "Row 1 of Table 1: velocity-dependent superposition rule x = v_(1)*(k1*x_(1)+k2) built from one particular solution; x_(1)+k1 is a partial rule.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["0"]
  },
  "basis": {
    "fields": [{"x": "v"}],
    "coefficients": ["1"],
    "expected_dimension": 1
  },
  "rules": [
    {
      "label": "table1-row1",
      "kind": "general",
      "copies": 1,
      "constants": ["k1", "k2"],
      "branches": [["v_(1)*(k1*x_(1)+k2)"]],
      "genericity": [{"expr": "v_(1)", "min_abs": 0.1}]
    },
    {
      "label": "partial-shift",
      "kind": "partial",
      "copies": 1,
      "constants": ["k1"],
      "branches": [["x_(1)+k1"]]
    }
  ],
  "trial": {
    "t_end": 2.0,
    "box": {"x": [0.3, 2.0], "v": [0.3, 2.0]},
    "times": [0.0, 0.4, 0.8, 1.2]
  }
})json";

const char* kTv2 = R"json({
  "name": "tv2",
  "title": "x'' = t*(x')^2",
  "notes": "Row 2 of Table 1: no superposition rule exists (the frozen fields do not close on a finite-dimensional algebra); x_(1)+k1 is a partial rule.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["t*v^2"]
  },
  "rules": [
    {
      "label": "partial-shift",
      "kind": "partial",
      "copies": 1,
      "constants": ["k1"],
      "branches": [["x_(1)+k1"]]
    }
  ],
  "trial": {
    "t_end": 1.0,
    "box": {"x": [0.3, 2.0], "v": [0.2, 0.8]},
    "times": [0.0, 0.3, 0.6, 0.9]
  }
})json";

const char* kT2v = R"json({
  "name": "t2v",
  "title": "x'' = t^2*x'",
  "notes": "Row 3 of Table 1: superposition rule x = k1*x_(1)+k2 from one particular solution; k1*x_(1) is a partial rule.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["t^2*v"]
  },
  "basis": {
    "fields": [{"x": "v"}, {"v": "v"}],
    "coefficients": ["1", "t^2"],
    "expected_dimension": 2
  },
  "rules": [
    {
      "label": "table1-row3",
      "kind": "general",
      "copies": 1,
      "constants": ["k1", "k2"],
      "branches": [["k1*x_(1)+k2"]],
      "genericity": [{"expr": "v_(1)", "min_abs": 0.1}]
    },
    {
      "label": "partial-scale",
      "kind": "partial",
      "copies": 1,
      "constants": ["k1"],
      "branches": [["k1*x_(1)"]],
      "k_box": [0.3, 1.7]
    }
  ],
  "trial": {
    "t_end": 1.2,
    "box": {"x": [0.3, 2.0], "v": [0.3, 2.0]},
    "times": [0.0, 0.3, 0.6, 0.9]
  }
})json";

const char* kT2 = R"json({
  "name": "t2",
  "title": "x'' = t^2",
  "notes": "Section 4 example: two-particular superposition rules k1*(x_(1)-x_(2))+x_(1)+k2 and k1*(v_(1)-v_(2))*(x_(1)-x_(2))+x_(1)+k2*(v_(1)-v_(2)); (x_(1)-x_(2))*k1+x_(1) and x_(1)+k1 are partial rules.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["t^2"]
  },
  "basis": {
    "fields": [{"x": "v"}, {"v": "1"}, {"x": "1"}],
    "coefficients": ["1", "t^2", "0"],
    "expected_dimension": 3
  },
  "rules": [
    {
      "label": "affine",
      "kind": "general",
      "copies": 2,
      "constants": ["k1", "k2"],
      "branches": [["k1*(x_(1)-x_(2))+x_(1)+k2"]],
      "genericity": [{"expr": "v_(1)-v_(2)", "min_abs": 0.1}]
    },
    {
      "label": "velocity-weighted",
      "kind": "general",
      "copies": 2,
      "constants": ["k1", "k2"],
      "branches": [["k1*(v_(1)-v_(2))*(x_(1)-x_(2))+x_(1)+k2*(v_(1)-v_(2))"]],
      "genericity": [{"expr": "v_(1)-v_(2)", "min_abs": 0.1}]
    },
    {
      "label": "partial-two",
      "kind": "partial",
      "copies": 2,
      "constants": ["k1"],
      "branches": [["(x_(1)-x_(2))*k1+x_(1)"]],
      "genericity": [{"expr": "v_(1)-v_(2)", "min_abs": 0.1}]
    },
    {
      "label": "partial-shift",
      "kind": "partial",
      "copies": 1,
      "constants": ["k1"],
      "branches": [["x_(1)+k1"]]
    }
  ],
  "trial": {
    "t_end": 2.0,
    "box": {"x": [0.3, 2.0], "v": [0.3, 2.0]},
    "times": [0.0, 0.5, 1.0, 1.5]
  }
})json";

const char* kOscillator = R"json({
  "name": "oscillator",
  "title": "Harmonic oscillator x'' = -w(t)^2*x with w(t)^2 = 1+t^2",
  "notes": "SODE Lie system with Vessiot-Guldberg algebra sl(2); adding the Liouville field v*d/dv extends it to a four-dimensional gl(2). Linear rule x = k1*x_(1)+k2*x_(2); the Wronskian x_(1)*v_(2)-x_(2)*v_(1) is a first integral.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["-(1+t^2)*x"]
  },
  "basis": {
    "fields": [
      {"x": "v"},
      {"x": "(1/2)*x", "v": "-(1/2)*v"},
      {"v": "-x"}
    ],
    "coefficients": ["1", "0", "1+t^2"],
    "expected_dimension": 3
  },
  "extra_fields": [{"name": "liouville", "components": {"v": "v"}}],
  "rules": [
    {
      "label": "linear",
      "kind": "general",
      "copies": 2,
      "constants": ["k1", "k2"],
      "branches": [["k1*x_(1)+k2*x_(2)"]],
      "genericity": [{"expr": "x_(1)*v_(2)-x_(2)*v_(1)", "min_abs": 0.1}]
    }
  ],
  "integrals": [
    {"name": "wronskian", "copies": 2, "expr": "x_(1)*v_(2)-x_(2)*v_(1)"}
  ],
  "trial": {
    "t_end": 2.0,
    "box": {"x": [0.3, 2.0], "v": [-1.0, 1.0]},
    "times": [0.0, 0.5, 1.0, 1.5]
  }
})json";

const char* kMp = R"json({
  "name": "mp",
  "title": "Milne-Pinney equation x'' = -w(t)^2*x + 1/x^3, w(t) = 1+(3/10)*sin(t)",
  "notes": "Eq. (3.6) with c = 1. The rule is the signed form of eq. (3.7): x = sqrt(k1*x_(1)^2+k2*x_(2)^2+mu*W*x_(1)*x_(2)) with W = v_(1)*x_(2)-v_(2)*x_(1); the auxiliary mu is pinned by the consistency equation, which encodes lambda_12 = (mu/2)^2 and the held level of the integral I3 = W^2 + (x_(1)/x_(2))^2 + (x_(2)/x_(1))^2.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["-(1+(3/10)*sin(t))^2*x+1/x^3"],
    "constraints": [{"symbol": "x", "lower": 0.001}]
  },
  "basis": {
    "fields": [
      {"x": "v", "v": "1/x^3"},
      {"x": "(1/2)*x", "v": "-(1/2)*v"},
      {"v": "-x"}
    ],
    "coefficients": ["1", "0", "(1+(3/10)*sin(t))^2"],
    "expected_dimension": 3
  },
  "rules": [
    {
      "label": "pinney-signed",
      "kind": "general",
      "copies": 2,
      "constants": ["k1", "k2"],
      "aux": ["mu"],
      "branches": [["sqrt(k1*x_(1)^2+k2*x_(2)^2+mu*(v_(1)*x_(2)-v_(2)*x_(1))*x_(1)*x_(2))"]],
      "genericity": [{"expr": "v_(1)*x_(2)-v_(2)*x_(1)", "min_abs": 0.1}]
    }
  ],
  "integrals": [
    {
      "name": "I3",
      "copies": 2,
      "expr": "(v_(1)*x_(2)-v_(2)*x_(1))^2+(x_(1)/x_(2))^2+(x_(2)/x_(1))^2",
      "hold_for_char": true,
      "solve_symbol": "v_(2)"
    }
  ],
  "trial": {
    "t_end": 2.0,
    "box": {"x": [0.8, 1.5], "v": [-0.4, 0.4]},
    "times": [0.0, 0.5, 1.0, 1.5]
  }
})json";

const char* kDmp = R"json({
  "name": "dmp",
  "title": "Dissipative Milne-Pinney equation (eq. (7.3) with F(t) = t, w = 1, c = 1)",
  "notes": "x'' = -x'/(1+t) - x/(1+t)^2 + 1/((1+t)^2*x^3). The frozen-time fields do not close on a low-dimensional algebra; the time-dependent integral (1+t)^2*(v_(1)*x_(2)-v_(2)*x_(1))^2 + (x_(1)/x_(2))^2 + (x_(2)/x_(1))^2 is still conserved along pairs of solutions.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["-v/(1+t)-x/(1+t)^2+1/((1+t)^2*x^3)"],
    "constraints": [{"symbol": "x", "lower": 0.001}]
  },
  "integrals": [
    {
      "name": "I3mod",
      "copies": 2,
      "time_dependent": true,
      "expr": "(1+t)^2*(v_(1)*x_(2)-v_(2)*x_(1))^2+(x_(1)/x_(2))^2+(x_(2)/x_(1))^2"
    }
  ],
  "trial": {
    "t_end": 2.0,
    "box": {"x": [0.8, 1.5], "v": [-0.4, 0.4]},
    "times": [0.0, 0.4, 0.8, 1.2]
  }
})json";

const char* kKs2 = R"json({
  "name": "ks2",
  "title": "Second-order Kummer-Schwarz equation (eq. (7.4)), b0 = -1, a0(t) = sin(t)",
  "notes": "x'' = (3/2)*(x')^2/x - 2*b0*x^3 + 2*a0(t)*x with the sl(2) basis of eq. (7.6). Superposition rule of eq. (7.11) from two particulars; the constants are the pair invariants Gamma_1, Gamma_2 and the discriminant is lambda = sqrt(256*b0^3 + k1*k2*Gamma - 4*b0*(k1^2+k2^2+Gamma^2)). Note the exponent: the Gamma^3 printed in eq. (7.11) fails to reproduce solutions (checked numerically, and analytically in the degenerate case k1 = 8*b0, k2 = Gamma, where only the quadratic power makes lambda vanish); Gamma^2 is used here. The square root of the radicand Gamma*x_(1)*x_(2)-4*b0*(x_(1)^2+x_(2)^2) equals |v_(1)*x_(2)-v_(2)*x_(1)|/(x_(1)*x_(2)), so the rule is written with the signed quotient instead; this keeps each branch smooth when the pair Wronskian changes sign along a trajectory.",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["(3/2)*v^2/x-2*b0*x^3+2*sin(t)*x"],
    "parameters": {"b0": -1.0},
    "constraints": [{"symbol": "x", "lower": 0.001}]
  },
  "basis": {
    "fields": [
      {"v": "2*x"},
      {"x": "x", "v": "2*v"},
      {"x": "v", "v": "(3/2)*v^2/x-2*b0*x^3"}
    ],
    "coefficients": ["sin(t)", "0", "1"],
    "expected_dimension": 3
  },
  "rules": [
    {
      "label": "paper-7.11",
      "kind": "quasi_base",
      "copies": 2,
      "constants": ["k1", "k2"],
      "k_box": [-12.0, -4.0],
      "definitions": [
        {"name": "G", "expr": "(v_(1)*x_(2)-v_(2)*x_(1))^2/(x_(1)^3*x_(2)^3)+4*b0*(x_(1)^2+x_(2)^2)/(x_(1)*x_(2))"},
        {"name": "lam", "expr": "sqrt(256*b0^3+k1*k2*G-4*b0*(k1^2+k2^2+G^2))"},
        {"name": "W", "expr": "(v_(1)*x_(2)-v_(2)*x_(1))/(x_(1)*x_(2))"},
        {"name": "den", "expr": "16*b0*G+((k1*x_(1)-k2*x_(2))^2-64*b0^2*(x_(1)^2+x_(2)^2))/(x_(1)*x_(2))"}
      ],
      "branches": [
        ["((G*k1-8*b0*k2)*x_(1)+(G*k2-8*b0*k1)*x_(2)+2*lam*W)/den"],
        ["((G*k1-8*b0*k2)*x_(1)+(G*k2-8*b0*k1)*x_(2)-2*lam*W)/den"]
      ],
      "genericity": [
        {"expr": "v_(1)*x_(2)-v_(2)*x_(1)", "min_abs": 0.05, "margin": 0.05},
        {"expr": "v_(0)*x_(1)-v_(1)*x_(0)", "min_abs": 0.05, "margin": 0.05},
        {"expr": "v_(0)*x_(2)-v_(2)*x_(0)", "min_abs": 0.05, "margin": 0.05}
      ],
      "initial_guess": [
        "(v_(0)*x_(1)-v_(1)*x_(0))^2/(x_(0)^3*x_(1)^3)+4*b0*(x_(0)^2+x_(1)^2)/(x_(0)*x_(1))",
        "(v_(0)*x_(2)-v_(2)*x_(0))^2/(x_(0)^3*x_(2)^3)+4*b0*(x_(0)^2+x_(2)^2)/(x_(0)*x_(2))"
      ]
    }
  ],
  "integrals": [
    {
      "name": "Gamma",
      "copies": 2,
      "expr": "(v_(1)*x_(2)-v_(2)*x_(1))^2/(x_(1)^3*x_(2)^3)+4*b0*(x_(1)^2+x_(2)^2)/(x_(1)*x_(2))"
    }
  ],
  "trial": {
    "t_end": 0.4,
    "box": {"x": [0.6, 1.4], "v": [-0.3, 0.3]},
    "times": [0.0, 0.1, 0.2, 0.3]
  }
})json";

const char* kKs3 = R"json({
  "name": "ks3",
  "title": "Third-order Kummer-Schwarz equation (eq. (8.1)), b0 = -1, a0(t) = cos(t)/5",
  "notes": "x''' = (3/2)*(x'')^2/x' - 2*b0*(x')^3 + 2*a0(t)*x' as a HODE Lie system with the basis of eq. (8.3) on jet coordinates (x, y1, y2). The closed-form rule uses one particular solution and three constants; it is valid on the chart where b0 < 0 and the pair function xi = y1_(0)*y2_(1)-y1_(1)*y2_(0) is positive, and the initial guesses are the invariants Gamma_1, Gamma_2, Gamma_3 of Section 8.",
  "system": {
    "kind": "hode",
    "jets": [["x"], ["y1"], ["y2"]],
    "forces": ["(3/2)*y2^2/y1-2*b0*y1^3+2*((1/5)*cos(t))*y1"],
    "parameters": {"b0": -1.0},
    "constraints": [{"symbol": "y1", "lower": 0.001}]
  },
  "basis": {
    "fields": [
      {"y2": "2*y1"},
      {"y1": "y1", "y2": "2*y2"},
      {"x": "y1", "y1": "y2", "y2": "(3/2)*y2^2/y1-2*b0*y1^3"}
    ],
    "coefficients": ["(1/5)*cos(t)", "0", "1"],
    "expected_dimension": 3
  },
  "rules": [
    {
      "label": "section-8",
      "kind": "quasi_base",
      "copies": 1,
      "constants": ["k1", "k2", "k3"],
      "definitions": [
        {"name": "sb", "expr": "sqrt(-b0)"},
        {"name": "xi", "expr": "y1_(0)*y2_(1)-y1_(1)*y2_(0)"},
        {"name": "Kr", "expr": "y1_(1)/y1_(0)"},
        {"name": "Ks", "expr": "y1_(1)^3/xi"},
        {"name": "G1", "expr": "(Kr^4+4*b0*Ks^2*(1+Kr^2))/(Kr*Ks^2)"},
        {"name": "rt", "expr": "sqrt(4*b0^2*(1+Kr^2)-b0*Kr*G1)"},
        {"name": "f", "expr": "k1-exp(2*sb*x_(1))*k2"}
      ],
      "branches": [
        ["k3+ln(2*sb*(64*b0^2-f^2)/(64*b0^2*(k1-2*exp(2*sb*x_(1))*k2)-k1*f^2+8*b0*(64*b0^2-k1^2+exp(4*sb*x_(1))*k2^2)))/(2*sb)"]
      ],
      "genericity": [
        {"expr": "y1_(0)*y2_(1)-y1_(1)*y2_(0)", "min": 0.05, "margin": 0.0}
      ],
      "initial_guess": [
        "G1",
        "(-8*b0*Kr+G1+4*rt)*exp(-2*x_(1)*sb)",
        "x_(0)-ln(2*sb*Kr/(-8*b0+Kr*G1+4*rt))/(2*sb)"
      ]
    }
  ],
  "integrals": [
    {
      "name": "Gamma1",
      "copies": 2,
      "expr": "((y1_(2)/y1_(1))^4+4*b0*(y1_(2)^3/(y1_(1)*y2_(2)-y1_(2)*y2_(1)))^2*(1+(y1_(2)/y1_(1))^2))/((y1_(2)/y1_(1))*(y1_(2)^3/(y1_(1)*y2_(2)-y1_(2)*y2_(1)))^2)"
    }
  ],
  "trial": {
    "t_end": 0.4,
    "box": {"x": [0.6, 1.4], "y1": [0.6, 1.4], "y2": [-0.3, 0.3]},
    "times": [0.0, 0.1, 0.2, 0.3]
  }
})json";

const std::vector<std::pair<const char*, const char*>>& builtin_table() {
  static const std::vector<std::pair<const char*, const char*>> table = {
      {"free", kFree},       {"tv2", kTv2}, {"t2v", kT2v},
      {"t2", kT2},           {"oscillator", kOscillator},
      {"mp", kMp},           {"dmp", kDmp}, {"ks2", kKs2},
      {"ks3", kKs3},
  };
  return table;
}

}  // namespace

std::vector<std::string> builtin_catalog() {
  std::vector<std::string> names;
  for (const auto& [name, text] : builtin_table()) names.push_back(name);
  return names;
}

CatalogEntry parse_entry_json(const std::string& text) {
  EntryBuilder builder;
  builder.j = json::parse(text);
  builder.build();
  return std::move(builder.entry);
}

CatalogEntry load_builtin(const std::string& name) {
  for (const auto& [key, text] : builtin_table())
    if (name == key) return parse_entry_json(text);
  throw std::runtime_error("unknown catalog entry '" + name + "'");
}

CatalogEntry load_entry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open entry file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_entry_json(buffer.str());
}

CatalogEntry find_entry(const std::string& name,
                        const std::string& catalog_dir) {
  std::string dir = catalog_dir;
  if (dir.empty())
    if (const char* env = std::getenv("LIESUP_CATALOG_DIR")) dir = env;
  if (!dir.empty()) {
    std::string path = dir + "/" + name + ".json";
    std::ifstream probe(path);
    if (probe) return load_entry_file(path);
  }
  return load_builtin(name);
}

TimeDepVectorField lifted_field(const CatalogEntry& entry) {
  TimeDepVectorField lift = to_first_order(entry.system);
  if (!entry.coefficients.empty()) {
    for (std::size_t i = 0; i < entry.basis.size(); ++i)
      lift.decomposition.push_back({entry.coefficients[i], entry.basis[i]});
  }
  return lift;
}

}  // namespace liesup
