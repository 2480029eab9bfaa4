#include "liesup/srules.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

namespace liesup {

namespace {

bool finite(double v) { return std::isfinite(v); }

std::string time_name_of(const AnySystem& system) {
  auto t = system_symbols(system)->time_symbol();
  return t.value_or("t");
}

bool references_copy0(const Expr& e) {
  for (const auto& s : free_symbols(e))
    if (s.size() > 4 && s.compare(s.size() - 4, 4, "_(0)") == 0) return true;
  return false;
}

// Symbolic data shared by fitting, reconstruction and the residual check:
// per-branch jet lifts T^j u and the two sides of the consistency equation.
struct BranchExprs {
  std::vector<std::vector<Expr>> jets;  // jets[j][i] = T^j u_i, j = 0..r-1
  std::vector<Expr> cons_lhs;           // T^r u_i
  std::vector<Expr> cons_rhs;           // F_i(t, u, Tu, ...)
};

struct RuleContext {
  int n = 0;
  int order = 0;
  std::string tname;
  std::vector<std::string> base_states;  // level-major base state names
  std::vector<BranchExprs> branches;
};

RuleContext make_context(const AnySystem& system,
                         const SuperpositionRule& rule) {
  RuleContext ctx;
  ctx.n = system_size(system);
  ctx.order = system_order(system);
  ctx.tname = time_name_of(system);
  ctx.base_states = state_names(system);

  ProlongedPair pair = build_XD_XL(system, rule.copies, 1);
  auto levels = jet_levels(system);
  const auto& forces = system_forces(system);

  auto total_derivative = [&](const Expr& f) {
    return differentiate(f, ctx.tname) + apply(pair.xd, f);
  };

  for (const RuleBranch& branch : rule.branches) {
    if (static_cast<int>(branch.components.size()) != ctx.n)
      throw std::invalid_argument(
          "rule branch component count does not match system size");
    BranchExprs be;
    be.jets.push_back(branch.components);
    for (int j = 1; j < ctx.order; ++j) {
      std::vector<Expr> next;
      for (const Expr& e : be.jets.back())
        next.push_back(total_derivative(e));
      be.jets.push_back(std::move(next));
    }
    std::map<std::string, Expr> subst;
    for (int j = 0; j < ctx.order; ++j)
      for (int i = 0; i < ctx.n; ++i) subst[levels[j][i]] = be.jets[j][i];
    for (int i = 0; i < ctx.n; ++i) {
      be.cons_lhs.push_back(total_derivative(be.jets.back()[i]));
      be.cons_rhs.push_back(substitute(forces[i], subst));
    }
    ctx.branches.push_back(std::move(be));
  }
  return ctx;
}

void bind_copy(Env& env, const std::vector<std::string>& base_states, int copy,
               std::span<const double> values) {
  for (std::size_t i = 0; i < base_states.size(); ++i)
    env[copy_name(base_states[i], copy)] = values[i];
}

void bind_values(Env& env, const SuperpositionRule& rule,
                 std::span<const double> values) {
  std::size_t idx = 0;
  for (const auto& k : rule.constants) env[k] = values[idx++];
  for (const auto& a : rule.aux) env[a] = values[idx++];
}

// Scaled fit/consistency residual vector at a fixed evaluation environment;
// returns false when any entry is non-finite.
bool branch_residual(const RuleContext& ctx, int branch, const Env& env,
                     std::span<const double> target_jet, Eigen::VectorXd& out) {
  const BranchExprs& be = ctx.branches[branch];
  out.resize(static_cast<int>((ctx.order + 1) * ctx.n));
  int row = 0;
  for (int j = 0; j < ctx.order; ++j) {
    for (int i = 0; i < ctx.n; ++i) {
      double v = evaluate(be.jets[j][i], env);
      double target = target_jet[j * ctx.n + i];
      if (!finite(v)) return false;
      out[row++] = (v - target) / std::max(1.0, std::abs(target));
    }
  }
  for (int i = 0; i < ctx.n; ++i) {
    double lhs = evaluate(be.cons_lhs[i], env);
    double rhs = evaluate(be.cons_rhs[i], env);
    if (!finite(lhs) || !finite(rhs)) return false;
    out[row++] =
        (lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
  }
  return true;
}

FitResult gauss_newton(const RuleContext& ctx, const SuperpositionRule& rule,
                       int branch, std::span<const double> target_jet,
                       const Env& base_env, const FitOptions& options,
                       const std::vector<double>& seed_start) {
  FitResult result;
  result.branch = branch;
  std::vector<std::string> unknowns = rule.constants;
  unknowns.insert(unknowns.end(), rule.aux.begin(), rule.aux.end());
  const int p = static_cast<int>(unknowns.size());
  if (p == 0) {
    Env env = base_env;
    Eigen::VectorXd r;
    if (branch_residual(ctx, branch, env, target_jet, r)) {
      result.residual = r.cwiseAbs().maxCoeff();
      result.converged = result.residual < options.tol;
    }
    return result;
  }

  auto eval_residual = [&](const Eigen::VectorXd& pv, Eigen::VectorXd& r) {
    Env env = base_env;
    for (int i = 0; i < p; ++i) env[unknowns[i]] = pv[i];
    return branch_residual(ctx, branch, env, target_jet, r);
  };

  Sampler sampler(options.seed);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_p;

  for (int start = 0; start < options.starts; ++start) {
    Eigen::VectorXd pv(p);
    if (start == 0 && static_cast<int>(seed_start.size()) == p) {
      for (int i = 0; i < p; ++i) pv[i] = seed_start[i];
    } else {
      for (int i = 0; i < p; ++i)
        pv[i] = sampler.uniform(options.start_box.lo, options.start_box.hi);
    }
    Eigen::VectorXd r;
    if (!eval_residual(pv, r)) continue;
    double norm = r.cwiseAbs().maxCoeff();

    for (int iter = 0; iter < options.max_iterations; ++iter) {
      if (norm < options.tol) break;
      Eigen::MatrixXd jac(r.size(), p);
      bool jac_ok = true;
      for (int i = 0; i < p; ++i) {
        double h = 1e-7 * std::max(1.0, std::abs(pv[i]));
        Eigen::VectorXd pv2 = pv;
        pv2[i] += h;
        Eigen::VectorXd r2;
        if (!eval_residual(pv2, r2)) {
          jac_ok = false;
          break;
        }
        jac.col(i) = (r2 - r) / h;
      }
      if (!jac_ok) break;
      Eigen::VectorXd dp = jac.colPivHouseholderQr().solve(-r);
      if (!dp.allFinite()) break;

      double alpha = 1.0;
      bool stepped = false;
      for (int bt = 0; bt < 10; ++bt) {
        Eigen::VectorXd pv2 = pv + alpha * dp;
        Eigen::VectorXd r2;
        if (eval_residual(pv2, r2)) {
          double norm2 = r2.cwiseAbs().maxCoeff();
          if (norm2 < norm || norm2 < options.tol) {
            pv = pv2;
            r = r2;
            norm = norm2;
            stepped = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!stepped) break;
      if (alpha * dp.cwiseAbs().maxCoeff() < 1e-15) break;
    }

    if (norm < best) {
      best = norm;
      best_p = pv;
      if (best < options.tol) break;  // good enough; remaining starts skipped
    }
  }

  if (best_p.size() == p) {
    result.values.assign(best_p.data(), best_p.data() + p);
    result.residual = best;
    result.converged = best < options.tol;
  }
  return result;
}

Env make_base_env(const RuleContext& ctx, const SuperpositionRule& rule,
                  const std::vector<std::vector<double>>& particular_jets,
                  double t0) {
  if (static_cast<int>(particular_jets.size()) != rule.copies)
    throw std::invalid_argument("particular jet count does not match rule");
  Env env;
  env[ctx.tname] = t0;
  for (int a = 0; a < rule.copies; ++a)
    bind_copy(env, ctx.base_states, a + 1, particular_jets[a]);
  return env;
}

std::vector<double> evaluate_seed(const RuleContext& ctx,
                                  const SuperpositionRule& rule,
                                  std::span<const double> target_jet,
                                  const Env& base_env) {
  if (rule.initial_guess.empty()) return {};
  Env env = base_env;
  bind_copy(env, ctx.base_states, 0, target_jet);
  std::vector<double> seed;
  for (const Expr& e : rule.initial_guess) {
    double v = evaluate(e, env);
    if (!finite(v)) return {};
    seed.push_back(v);
  }
  return seed;
}

void for_each_combination(int total, int arity,
                          const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> idx(arity);
  std::function<void(int, int)> rec = [&](int pos, int from) {
    if (pos == arity) {
      f(idx);
      return;
    }
    for (int i = from; i <= total - (arity - pos); ++i) {
      idx[pos] = i;
      rec(pos + 1, i + 1);
    }
  };
  if (arity >= 1 && arity <= total) rec(0, 0);
}

Box expand_box(const Box& box, const std::vector<std::string>& base_states,
               int max_copy) {
  Box out = box;
  for (const auto& name : base_states) {
    Interval iv = box_interval(box, name);
    for (int a = 0; a <= max_copy; ++a) out[copy_name(name, a)] = iv;
  }
  return out;
}

}  // namespace

FitResult fit_constants(const AnySystem& system, const SuperpositionRule& rule,
                        int branch, std::span<const double> target_jet,
                        const std::vector<std::vector<double>>& particular_jets,
                        double t0, const FitOptions& options) {
  RuleContext ctx = make_context(system, rule);
  if (branch < 0 || branch >= static_cast<int>(ctx.branches.size()))
    throw std::invalid_argument("branch index out of range");
  Env base_env = make_base_env(ctx, rule, particular_jets, t0);
  auto seed = evaluate_seed(ctx, rule, target_jet, base_env);
  return gauss_newton(ctx, rule, branch, target_jet, base_env, options, seed);
}

FitResult fit_constants_any_branch(
    const AnySystem& system, const SuperpositionRule& rule,
    std::span<const double> target_jet,
    const std::vector<std::vector<double>>& particular_jets, double t0,
    const FitOptions& options) {
  RuleContext ctx = make_context(system, rule);
  Env base_env = make_base_env(ctx, rule, particular_jets, t0);
  auto seed = evaluate_seed(ctx, rule, target_jet, base_env);
  FitResult best;
  for (int b = 0; b < static_cast<int>(ctx.branches.size()); ++b) {
    FitResult fr =
        gauss_newton(ctx, rule, b, target_jet, base_env, options, seed);
    if (fr.converged && (!best.converged || fr.residual < best.residual))
      best = fr;
    if (!best.converged && !fr.values.empty() &&
        (best.values.empty() || fr.residual < best.residual))
      best = fr;
  }
  return best;
}

namespace {

Env particulars_env(const RuleContext& ctx, const SuperpositionRule& rule,
                    std::span<const double> values,
                    std::span<const Trajectory> particulars, double t) {
  if (static_cast<int>(particulars.size()) != rule.copies)
    throw std::invalid_argument("particular trajectory count does not match");
  Env env;
  env[ctx.tname] = t;
  std::vector<double> state;
  for (int a = 0; a < rule.copies; ++a) {
    state = particulars[a].eval(t);
    bind_copy(env, ctx.base_states, a + 1, state);
  }
  bind_values(env, rule, values);
  return env;
}

}  // namespace

std::vector<double> reconstruct(const AnySystem& system,
                                const SuperpositionRule& rule, int branch,
                                std::span<const double> values,
                                std::span<const Trajectory> particulars,
                                double t) {
  RuleContext ctx = make_context(system, rule);
  Env env = particulars_env(ctx, rule, values, particulars, t);
  std::vector<double> out;
  for (const Expr& e : ctx.branches.at(branch).jets[0])
    out.push_back(evaluate(e, env));
  return out;
}

std::vector<double> reconstruct_jet(const AnySystem& system,
                                    const SuperpositionRule& rule, int branch,
                                    std::span<const double> values,
                                    std::span<const Trajectory> particulars,
                                    double t) {
  RuleContext ctx = make_context(system, rule);
  Env env = particulars_env(ctx, rule, values, particulars, t);
  std::vector<double> out;
  for (int j = 0; j < ctx.order; ++j)
    for (const Expr& e : ctx.branches.at(branch).jets[j])
      out.push_back(evaluate(e, env));
  return out;
}

namespace {

// Drift of one integral over every ascending tuple of distinct solutions.
double integral_drift(const FirstIntegral& integral, const std::string& tname,
                      const std::vector<std::string>& base_states,
                      std::span<const Trajectory> solutions, double t_begin,
                      double t_end, int grid_points) {
  double worst = 0.0;
  bool bad = false;
  for_each_combination(
      static_cast<int>(solutions.size()), integral.copies,
      [&](const std::vector<int>& combo) {
        std::vector<double> state;
        double i0 = 0.0;
        for (int g = 0; g < grid_points; ++g) {
          double t = t_begin + (t_end - t_begin) * g / (grid_points - 1);
          Env env;
          env[tname] = t;
          for (int slot = 0; slot < integral.copies; ++slot) {
            state = solutions[combo[slot]].eval(t);
            bind_copy(env, base_states, slot + 1, state);
          }
          double v = evaluate(integral.expression, env);
          if (!finite(v)) {
            bad = true;
            return;
          }
          if (g == 0)
            i0 = v;
          else
            worst = std::max(worst,
                             std::abs(v - i0) / std::max(1.0, std::abs(i0)));
        }
      });
  return bad ? std::numeric_limits<double>::infinity() : worst;
}

struct TrialSampler {
  Sampler rng;
  const std::vector<std::string>& base_states;
  const Box& box;

  std::vector<double> draw_jet() {
    std::vector<double> jet;
    for (const auto& name : base_states) {
      Interval iv = box_interval(box, name);
      jet.push_back(rng.uniform(iv.lo, iv.hi));
    }
    return jet;
  }
};

bool genericity_ok(const SuperpositionRule& rule, const Env& env,
                   bool have_copy0) {
  for (const GenericityConstraint& g : rule.genericity) {
    if (!have_copy0 && references_copy0(g.expression)) continue;
    double v = evaluate(g.expression, env);
    if (!finite(v)) return false;
    double measured = g.use_abs ? std::abs(v) : v;
    if (measured < g.min_value + g.margin) return false;
  }
  return true;
}

}  // namespace

SrVerification verify_superposition(const AnySystem& system,
                                    const SuperpositionRule& rule,
                                    std::span<const FirstIntegral> integrals,
                                    const TrialConfig& trial,
                                    const VerifyOptions& options) {
  RuleContext ctx = make_context(system, rule);
  SrVerification report;
  report.passed = true;

  OdeSystem ode = compile_system(to_first_order(system),
                                 system_parameters(system));
  DomainGuard guard =
      make_guard(system_constraints(system), ctx.base_states);
  TrialSampler sampler{Sampler(options.seed), ctx.base_states, trial.box};

  const int m = rule.copies;
  const bool full = !rule.partial;
  const int n_solutions = m + 1;  // reconstruction target/reference + copies

  for (int trial_idx = 0; trial_idx < options.trials; ++trial_idx) {
    TrialRecord rec;
    int redraws = 0;
    bool prepared = false;

    std::vector<Trajectory> particulars;
    Trajectory reference;
    std::vector<double> values;
    int branch = 0;

    while (redraws++ < options.max_redraws && !prepared) {
      std::vector<std::vector<double>> jets;
      for (int a = 0; a < (full ? m + 1 : m); ++a)
        jets.push_back(sampler.draw_jet());

      Env genv;
      genv[ctx.tname] = trial.t_begin;
      if (full) {
        bind_copy(genv, ctx.base_states, 0, jets[0]);
        for (int a = 1; a <= m; ++a)
          bind_copy(genv, ctx.base_states, a, jets[a]);
      } else {
        for (int a = 0; a < m; ++a)
          bind_copy(genv, ctx.base_states, a + 1, jets[a]);
      }
      if (!genericity_ok(rule, genv, full)) continue;

      std::vector<Trajectory> trajs;
      bool all_ok = true;
      for (const auto& jet : jets) {
        Trajectory tr = integrate_ivp(ode, jet, trial.t_begin, trial.t_end,
                                      options.integrate, &guard);
        if (!tr.completed) {
          all_ok = false;
          break;
        }
        trajs.push_back(std::move(tr));
      }
      if (!all_ok) continue;

      if (full) {
        std::vector<std::vector<double>> part_jets(jets.begin() + 1,
                                                   jets.end());
        FitResult fit = fit_constants_any_branch(system, rule, jets[0],
                                                 part_jets, trial.t_begin,
                                                 options.fit);
        if (!fit.converged) continue;
        values = fit.values;
        branch = fit.branch;
        reference = std::move(trajs[0]);
        particulars.assign(std::make_move_iterator(trajs.begin() + 1),
                           std::make_move_iterator(trajs.end()));
        prepared = true;
      } else {
        values.clear();
        for (std::size_t i = 0; i < rule.constants.size(); ++i)
          values.push_back(
              sampler.rng.uniform(rule.k_box.lo, rule.k_box.hi));
        branch = 0;
        particulars = std::move(trajs);
        std::vector<double> jet0 =
            reconstruct_jet(system, rule, branch, values, particulars,
                            trial.t_begin);
        if (std::any_of(jet0.begin(), jet0.end(),
                        [](double v) { return !finite(v); }) ||
            !guard.ok(jet0))
          continue;
        reference = integrate_ivp(ode, jet0, trial.t_begin, trial.t_end,
                                  options.integrate, &guard);
        if (!reference.completed) continue;
        prepared = true;
      }
    }

    if (!prepared) {
      rec.detail = "sampling budget exhausted";
      report.trials.push_back(rec);
      report.passed = false;
      report.trials_run++;
      continue;
    }

    rec.branch = branch;
    rec.values = values;

    // Dense comparison of the reconstruction with the reference solution.
    Env env;
    std::vector<double> state;
    for (int g = 0; g < options.grid_points; ++g) {
      double t = trial.t_begin +
                 (trial.t_end - trial.t_begin) * g / (options.grid_points - 1);
      env.clear();
      env[ctx.tname] = t;
      for (int a = 0; a < m; ++a) {
        state = particulars[a].eval(t);
        bind_copy(env, ctx.base_states, a + 1, state);
      }
      bind_values(env, rule, values);
      state = reference.eval(t);
      for (int i = 0; i < ctx.n; ++i) {
        double u = evaluate(ctx.branches[branch].jets[0][i], env);
        double ref = state[i];
        double err = finite(u)
                         ? std::abs(u - ref) / std::max(1.0, std::abs(ref))
                         : std::numeric_limits<double>::infinity();
        rec.recon_error = std::max(rec.recon_error, err);
      }
    }

    std::vector<Trajectory> all;
    all.push_back(std::move(reference));
    for (auto& tr : particulars) all.push_back(std::move(tr));
    for (const FirstIntegral& integral : integrals) {
      if (static_cast<int>(all.size()) < integral.copies) continue;
      rec.worst_drift = std::max(
          rec.worst_drift,
          integral_drift(integral, ctx.tname, ctx.base_states, all,
                         trial.t_begin, trial.t_end, options.grid_points));
    }

    rec.ok = rec.recon_error < options.recon_tol &&
             rec.worst_drift < options.drift_tol;
    report.max_recon_error = std::max(report.max_recon_error, rec.recon_error);
    report.max_drift = std::max(report.max_drift, rec.worst_drift);
    report.passed = report.passed && rec.ok;
    report.trials.push_back(std::move(rec));
    report.trials_run++;
  }
  (void)n_solutions;
  return report;
}

PlotSeries sample_reconstruction(const AnySystem& system,
                                 const SuperpositionRule& rule,
                                 const TrialConfig& trial,
                                 const VerifyOptions& options) {
  RuleContext ctx = make_context(system, rule);
  PlotSeries series;
  OdeSystem ode =
      compile_system(to_first_order(system), system_parameters(system));
  DomainGuard guard = make_guard(system_constraints(system), ctx.base_states);
  TrialSampler sampler{Sampler(options.seed), ctx.base_states, trial.box};
  const int m = rule.copies;
  const bool full = !rule.partial;

  int redraws = 0;
  while (redraws++ < options.max_redraws) {
    std::vector<std::vector<double>> jets;
    for (int a = 0; a < (full ? m + 1 : m); ++a)
      jets.push_back(sampler.draw_jet());
    Env genv;
    genv[ctx.tname] = trial.t_begin;
    for (std::size_t a = 0; a < jets.size(); ++a)
      bind_copy(genv, ctx.base_states, full ? static_cast<int>(a)
                                            : static_cast<int>(a) + 1,
                jets[a]);
    if (!genericity_ok(rule, genv, full)) continue;

    std::vector<Trajectory> trajs;
    bool all_ok = true;
    for (const auto& jet : jets) {
      Trajectory tr = integrate_ivp(ode, jet, trial.t_begin, trial.t_end,
                                    options.integrate, &guard);
      if (!tr.completed) {
        all_ok = false;
        break;
      }
      trajs.push_back(std::move(tr));
    }
    if (!all_ok) continue;

    Trajectory reference;
    std::vector<Trajectory> particulars;
    if (full) {
      std::vector<std::vector<double>> part_jets(jets.begin() + 1, jets.end());
      FitResult fit = fit_constants_any_branch(system, rule, jets[0], part_jets,
                                               trial.t_begin, options.fit);
      if (!fit.converged) continue;
      series.branch = fit.branch;
      series.values = fit.values;
      reference = std::move(trajs[0]);
      particulars.assign(std::make_move_iterator(trajs.begin() + 1),
                         std::make_move_iterator(trajs.end()));
    } else {
      series.branch = 0;
      for (std::size_t i = 0; i < rule.constants.size(); ++i)
        series.values.push_back(
            sampler.rng.uniform(rule.k_box.lo, rule.k_box.hi));
      particulars = std::move(trajs);
      std::vector<double> jet0 = reconstruct_jet(
          system, rule, 0, series.values, particulars, trial.t_begin);
      if (std::any_of(jet0.begin(), jet0.end(),
                      [](double v) { return !finite(v); }) ||
          !guard.ok(jet0))
        continue;
      reference = integrate_ivp(ode, jet0, trial.t_begin, trial.t_end,
                                options.integrate, &guard);
      if (!reference.completed) continue;
    }

    Env env;
    std::vector<double> state;
    for (int g = 0; g < options.grid_points; ++g) {
      double t = trial.t_begin +
                 (trial.t_end - trial.t_begin) * g / (options.grid_points - 1);
      env.clear();
      env[ctx.tname] = t;
      for (int a = 0; a < m; ++a) {
        state = particulars[a].eval(t);
        bind_copy(env, ctx.base_states, a + 1, state);
      }
      bind_values(env, rule, series.values);
      state = reference.eval(t);
      series.times.push_back(t);
      series.reference.push_back(state[0]);
      series.reconstructed.push_back(
          evaluate(ctx.branches[series.branch].jets[0][0], env));
    }
    series.ok = true;
    return series;
  }
  series.detail = "sampling budget exhausted";
  return series;
}

ConservationReport check_first_integral_conservation(
    const AnySystem& system, const FirstIntegral& integral,
    const TrialConfig& trial, const VerifyOptions& options) {
  ConservationReport report;
  report.passed = true;
  std::vector<std::string> base = state_names(system);
  std::string tname = time_name_of(system);
  OdeSystem ode =
      compile_system(to_first_order(system), system_parameters(system));
  DomainGuard guard = make_guard(system_constraints(system), base);
  TrialSampler sampler{Sampler(options.seed), base, trial.box};

  for (int trial_idx = 0; trial_idx < options.trials; ++trial_idx) {
    std::vector<Trajectory> solutions;
    int redraws = 0;
    while (redraws++ < options.max_redraws &&
           static_cast<int>(solutions.size()) < integral.copies) {
      Trajectory tr = integrate_ivp(ode, sampler.draw_jet(), trial.t_begin,
                                    trial.t_end, options.integrate, &guard);
      if (tr.completed) solutions.push_back(std::move(tr));
    }
    if (static_cast<int>(solutions.size()) < integral.copies) {
      report.passed = false;
      report.detail = "sampling budget exhausted";
      break;
    }
    double drift =
        integral_drift(integral, tname, base, solutions, trial.t_begin,
                       trial.t_end, options.grid_points);
    report.max_drift = std::max(report.max_drift, drift);
    report.passed = report.passed && drift < options.drift_tol;
    report.trials_run++;
  }
  return report;
}

namespace {

ZeroVerdict annihilation_check(const AnySystem& system,
                               const FirstIntegral& integral, const Box& box,
                               const ZeroTestOptions& options, bool use_xl) {
  ProlongedPair pair = build_XD_XL(system, integral.copies, 1);
  const VectorField& field = use_xl ? pair.xl : pair.xd;
  Expr derived = apply(field, integral.expression);
  Box expanded = expand_box(box, state_names(system), integral.copies);
  return probably_zero(std::span<const Expr>(&derived, 1), expanded, options);
}

}  // namespace

ZeroVerdict check_XD_annihilates(const AnySystem& system,
                                 const FirstIntegral& integral, const Box& box,
                                 const ZeroTestOptions& options) {
  return annihilation_check(system, integral, box, options, /*use_xl=*/false);
}

ZeroVerdict check_XL_annihilates(const AnySystem& system,
                                 const FirstIntegral& integral, const Box& box,
                                 const ZeroTestOptions& options) {
  if (depends_on(integral.expression, time_name_of(system)))
    throw std::invalid_argument(
        "X_L annihilation requires a time-independent integral");
  return annihilation_check(system, integral, box, options, /*use_xl=*/true);
}

namespace {

// Solves integral(env with solve_symbol = s) = level for s by sign-change
// scan plus bisection over a widened interval around `iv`.
std::optional<double> solve_on_level(const FirstIntegral& integral, Env env,
                                     const Interval& iv, double level) {
  auto f = [&](double s) {
    env[integral.solve_symbol] = s;
    return evaluate(integral.expression, env) - level;
  };
  double width = iv.hi - iv.lo;
  double lo = iv.lo - 2.0 * width;
  double hi = iv.hi + 2.0 * width;
  const int scan = 160;
  double prev_s = lo;
  double prev_f = f(lo);
  for (int i = 1; i <= scan; ++i) {
    double s = lo + (hi - lo) * i / scan;
    double fs = f(s);
    if (finite(prev_f) && finite(fs) && prev_f * fs <= 0.0) {
      double a = prev_s, b = s, fa = prev_f;
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (a + b);
        double fm = f(mid);
        if (!finite(fm)) break;
        if (fa * fm <= 0.0)
          b = mid;
        else {
          a = mid;
          fa = fm;
        }
      }
      double root = 0.5 * (a + b);
      if (std::abs(f(root)) < 1e-9 * std::max(1.0, std::abs(level)))
        return root;
    }
    prev_s = s;
    prev_f = fs;
  }
  return std::nullopt;
}

double branch_char_residual(const RuleContext& ctx, int branch,
                            const Env& env) {
  const BranchExprs& be = ctx.branches[branch];
  double worst = 0.0;
  for (int i = 0; i < ctx.n; ++i) {
    double lhs = evaluate(be.cons_lhs[i], env);
    double rhs = evaluate(be.cons_rhs[i], env);
    if (!finite(lhs) || !finite(rhs))
      return std::numeric_limits<double>::infinity();
    worst = std::max(
        worst, std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs),
                                               std::abs(rhs)}));
  }
  return worst;
}

}  // namespace

CharReport char_residual(const AnySystem& system, const SuperpositionRule& rule,
                         std::span<const FirstIntegral> integrals,
                         const TrialConfig& trial,
                         const CharOptions& options) {
  RuleContext ctx = make_context(system, rule);
  CharReport report;
  Sampler rng(options.seed);
  TrialSampler sampler{Sampler(rng.next_seed()), ctx.base_states, trial.box};
  std::vector<double> times = trial.times;
  if (times.empty()) times = {trial.t_begin};

  const FirstIntegral* held = nullptr;
  if (!rule.aux.empty()) {
    for (const FirstIntegral& in : integrals)
      if (in.hold_for_char && !in.solve_symbol.empty()) held = &in;
    if (!held)
      throw std::invalid_argument(
          "rule with auxiliary unknowns needs a held integral for the "
          "characteristic check");
  }

  int resamples = 0;
  if (!held) {
    // The rule solves the characteristic system for generic constants: plain
    // sampling over (t, jets, k), resampling outside the branch domain.
    while (report.samples_used < options.samples &&
           resamples++ < options.max_resamples) {
      Env env;
      env[ctx.tname] =
          times[static_cast<std::size_t>(rng.uniform(0, 1) * times.size()) %
                times.size()];
      for (int a = 1; a <= rule.copies; ++a) {
        auto jet = sampler.draw_jet();
        bind_copy(env, ctx.base_states, a, jet);
      }
      if (!genericity_ok(rule, env, /*have_copy0=*/false)) continue;
      for (const auto& k : rule.constants)
        env[k] = rng.uniform(rule.k_box.lo, rule.k_box.hi);
      double worst = 0.0;
      for (int b = 0; b < static_cast<int>(ctx.branches.size()); ++b)
        worst = std::max(worst, branch_char_residual(ctx, b, env));
      if (!finite(worst)) continue;  // outside the branch domain
      report.max_residual = std::max(report.max_residual, worst);
      report.samples_used++;
    }
  } else {
    // Constants and aux pinned by a fit; further samples stay on the fitted
    // level set of the held integral.
    const int batches = 4;
    const int per_batch = (options.samples + batches - 1) / batches;
    for (int batch = 0; batch < batches; ++batch) {
      std::vector<std::vector<double>> jets;
      std::vector<double> target;
      FitResult fit;
      bool ready = false;
      while (resamples++ < options.max_resamples && !ready) {
        jets.clear();
        target = sampler.draw_jet();
        for (int a = 0; a < rule.copies; ++a)
          jets.push_back(sampler.draw_jet());
        Env genv;
        genv[ctx.tname] = times.front();
        bind_copy(genv, ctx.base_states, 0, target);
        for (int a = 0; a < rule.copies; ++a)
          bind_copy(genv, ctx.base_states, a + 1, jets[a]);
        if (!genericity_ok(rule, genv, /*have_copy0=*/true)) continue;
        fit = fit_constants_any_branch(system, rule, target, jets,
                                       times.front(), options.fit);
        ready = fit.converged;
      }
      if (!ready) break;

      Env level_env;
      level_env[ctx.tname] = times.front();
      for (int a = 0; a < rule.copies; ++a)
        bind_copy(level_env, ctx.base_states, a + 1, jets[a]);
      double level = evaluate(held->expression, level_env);
      if (!finite(level)) continue;

      Interval solve_iv = box_interval(trial.box, held->solve_symbol);
      // Resolve the base symbol of the solve slot, e.g. v for v_(2).
      std::string solve_base = held->solve_symbol;
      auto pos = solve_base.rfind("_(");
      if (pos != std::string::npos) solve_base = solve_base.substr(0, pos);
      solve_iv = box_interval(trial.box, solve_base);

      int collected = 0;
      while (collected < per_batch && resamples++ < options.max_resamples) {
        Env env;
        env[ctx.tname] =
            times[static_cast<std::size_t>(rng.uniform(0, 1) * times.size()) %
                  times.size()];
        for (int a = 1; a <= rule.copies; ++a) {
          auto jet = sampler.draw_jet();
          bind_copy(env, ctx.base_states, a, jet);
        }
        auto root = solve_on_level(*held, env, solve_iv, level);
        if (!root) continue;
        env[held->solve_symbol] = *root;
        if (!genericity_ok(rule, env, /*have_copy0=*/false)) continue;
        for (std::size_t i = 0; i < fit.values.size(); ++i) {
          const std::string& name = i < rule.constants.size()
                                        ? rule.constants[i]
                                        : rule.aux[i - rule.constants.size()];
          env[name] = fit.values[i];
        }
        double worst = branch_char_residual(ctx, fit.branch, env);
        if (!finite(worst)) continue;
        report.max_residual = std::max(report.max_residual, worst);
        report.samples_used++;
        collected++;
      }
    }
  }

  report.passed = report.samples_used >= options.samples / 2 &&
                  report.samples_used > 0 &&
                  report.max_residual < options.tol;
  if (report.samples_used == 0) report.detail = "no usable samples";
  return report;
}

SuperpositionRule project_hode_rule(const SuperpositionRule& rule,
                                    int base_size) {
  if (base_size <= 0) throw std::invalid_argument("base size must be >= 1");
  SuperpositionRule out = rule;
  for (RuleBranch& branch : out.branches) {
    if (static_cast<int>(branch.components.size()) < base_size)
      throw std::invalid_argument("rule has fewer components than base size");
    branch.components.resize(base_size);
  }
  return out;
}

}  // namespace liesup
