#include "liesup/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace liesup {

// ---------------------------------------------------------------------------
// CompiledExpr
// ---------------------------------------------------------------------------

namespace {

double ipow(double x, std::int64_t n) {
  if (n < 0) return 1.0 / ipow(x, -n);
  double result = 1.0, base = x;
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

}  // namespace

CompiledExpr::CompiledExpr(
    const Expr& e, const std::unordered_map<std::string, int>& slot_of) {
  int depth = 0;
  // Emit postfix by explicit recursion.
  struct Emitter {
    std::vector<Instr>& code;
    const std::unordered_map<std::string, int>& slot_of;
    int depth = 0, max_depth = 0;

    void push(Instr instr, int delta) {
      code.push_back(instr);
      depth += delta;
      max_depth = std::max(max_depth, depth);
    }

    void emit(const Expr& e) {
      using Op = Instr::Op;
      switch (e.kind()) {
        case Expr::Kind::Number:
          push({Op::PushConst, e.number_value()}, 1);
          break;
        case Expr::Kind::RationalConst:
          push({Op::PushConst, to_double(e.rational_value())}, 1);
          break;
        case Expr::Kind::Symbol: {
          auto it = slot_of.find(e.symbol_name());
          if (it == slot_of.end()) throw UnboundSymbolError(e.symbol_name());
          Instr instr{Op::PushSlot};
          instr.slot = it->second;
          push(instr, 1);
          break;
        }
        case Expr::Kind::Unary: {
          emit(e.operand());
          static const Op ops[] = {Op::Neg, Op::Sqrt, Op::Exp, Op::Ln,
                                   Op::Sin, Op::Cos,  Op::Abs, Op::Sign};
          push({ops[static_cast<int>(e.unary_op())]}, 0);
          break;
        }
        case Expr::Kind::Binary: {
          emit(e.lhs());
          emit(e.rhs());
          static const Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div};
          push({ops[static_cast<int>(e.binary_op())]}, -1);
          break;
        }
        case Expr::Kind::Power: {
          emit(e.operand());
          Rational r = e.exponent();
          Instr instr{r.den == 1 ? Op::PowInt : Op::PowReal};
          instr.ipow = r.num;
          instr.value = to_double(r);
          push(instr, 0);
          break;
        }
      }
    }
  } emitter{code_, slot_of, depth};
  emitter.emit(e);
  max_stack_ = emitter.max_depth;
  if (max_stack_ > 64)
    throw std::invalid_argument("expression too deep to compile");
}

double CompiledExpr::eval(const double* slots) const {
  double stack[64];
  int sp = 0;
  for (const Instr& instr : code_) {
    using Op = Instr::Op;
    switch (instr.op) {
      case Op::PushConst: stack[sp++] = instr.value; break;
      case Op::PushSlot: stack[sp++] = slots[instr.slot]; break;
      case Op::Neg: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::Sqrt: {
        double v = stack[sp - 1];
        stack[sp - 1] = v < 0 ? std::numeric_limits<double>::quiet_NaN()
                              : std::sqrt(v);
        break;
      }
      case Op::Exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
      case Op::Ln: {
        double v = stack[sp - 1];
        stack[sp - 1] = v <= 0 ? std::numeric_limits<double>::quiet_NaN()
                               : std::log(v);
        break;
      }
      case Op::Sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
      case Op::Cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
      case Op::Abs: stack[sp - 1] = std::fabs(stack[sp - 1]); break;
      case Op::Sign: {
        double v = stack[sp - 1];
        stack[sp - 1] = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
        break;
      }
      case Op::Add: --sp; stack[sp - 1] += stack[sp]; break;
      case Op::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
      case Op::Mul: --sp; stack[sp - 1] *= stack[sp]; break;
      case Op::Div: --sp; stack[sp - 1] /= stack[sp]; break;
      case Op::PowInt:
        stack[sp - 1] = ipow(stack[sp - 1], instr.ipow);
        break;
      case Op::PowReal: {
        double v = stack[sp - 1];
        stack[sp - 1] = v < 0 ? std::numeric_limits<double>::quiet_NaN()
                              : std::pow(v, instr.value);
        break;
      }
    }
  }
  return sp > 0 ? stack[0] : 0.0;
}

// ---------------------------------------------------------------------------
// OdeSystem
// ---------------------------------------------------------------------------

OdeSystem compile_system(const TimeDepVectorField& x, const Env& bound) {
  OdeSystem sys;
  const VectorField& f = x.field;
  sys.dim = static_cast<int>(f.coordinates.size());
  sys.state_names = f.coordinates;
  sys.time_name = f.symbols->time_symbol().value_or("t");

  std::unordered_map<std::string, int> slot_of;
  slot_of[sys.time_name] = 0;
  for (int i = 0; i < sys.dim; ++i) slot_of[sys.state_names[i]] = 1 + i;

  std::set<std::string> extra;
  for (const Expr& comp : f.components) collect_symbols(comp, extra);
  for (const auto& name : extra) {
    if (slot_of.count(name)) continue;
    auto it = bound.find(name);
    if (it == bound.end()) throw UnboundSymbolError(name);
    slot_of[name] = 1 + sys.dim + static_cast<int>(sys.bound_values.size());
    sys.bound_values.push_back(it->second);
  }

  for (const Expr& comp : f.components) sys.rhs.emplace_back(comp, slot_of);
  return sys;
}

void OdeSystem::eval(double t, const double* y, double* dy) const {
  if (scratch_.size() != static_cast<std::size_t>(1 + dim) + bound_values.size())
    scratch_.resize(1 + dim + bound_values.size());
  scratch_[0] = t;
  for (int i = 0; i < dim; ++i) scratch_[1 + i] = y[i];
  for (std::size_t i = 0; i < bound_values.size(); ++i)
    scratch_[1 + dim + i] = bound_values[i];
  for (int i = 0; i < dim; ++i) dy[i] = rhs[i].eval(scratch_.data());
  ++rhs_evaluations;
}

bool DomainGuard::ok(std::span<const double> y) const {
  for (double v : y) {
    if (!std::isfinite(v) || std::fabs(v) > max_norm) return false;
  }
  for (const Bound& b : bounds) {
    double v = y[b.index];
    if (v <= b.lower || v >= b.upper) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

Trajectory integrate_rk4(const OdeSystem& sys, std::span<const double> y0,
                         double t0, double t1, const IntegrateOptions& opt,
                         const DomainGuard* guard) {
  Trajectory traj;
  traj.dim = sys.dim;
  traj.method = IntegrateOptions::Method::Rk4;
  traj.state_names = sys.state_names;

  const int n = sys.dim;
  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), ynew(n);

  double t = t0;
  traj.times.push_back(t);
  traj.states.push_back(y);

  const double span = t1 - t0;
  const std::size_t steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(span / opt.fixed_step - 1e-12)));
  const double h = span / static_cast<double>(steps);

  for (std::size_t s = 0; s < steps; ++s) {
    sys.eval(t, y.data(), k1.data());
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    sys.eval(t + 0.5 * h, tmp.data(), k2.data());
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    sys.eval(t + 0.5 * h, tmp.data(), k3.data());
    for (int i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    sys.eval(t + h, tmp.data(), k4.data());
    for (int i = 0; i < n; ++i)
      ynew[i] = y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    double tnew = (s + 1 == steps) ? t1 : t0 + h * static_cast<double>(s + 1);

    if (!finite(ynew) || (guard && !guard->ok(ynew))) {
      traj.exit_time = t;
      traj.completed = false;
      traj.rhs_evaluations = sys.rhs_evaluations;
      return traj;
    }

    // Hermite dense data: derivative at both step ends.
    std::vector<double> blob(2 * n);
    sys.eval(tnew, ynew.data(), k2.data());  // reuse k2 as f(t+h, y+...)
    for (int i = 0; i < n; ++i) {
      blob[i] = k1[i];
      blob[n + i] = k2[i];
    }
    traj.dense.push_back(std::move(blob));

    y = ynew;
    t = tnew;
    traj.times.push_back(t);
    traj.states.push_back(y);
  }
  traj.completed = true;
  traj.rhs_evaluations = sys.rhs_evaluations;
  return traj;
}

Trajectory integrate_dopri5(const OdeSystem& sys, std::span<const double> y0,
                            double t0, double t1, const IntegrateOptions& opt,
                            const DomainGuard* guard) {
  Trajectory traj;
  traj.dim = sys.dim;
  traj.method = IntegrateOptions::Method::Dopri5;
  traj.state_names = sys.state_names;

  const int n = sys.dim;
  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n),
      ynew(n);

  double t = t0;
  traj.times.push_back(t);
  traj.states.push_back(y);

  double h = opt.initial_step > 0 ? opt.initial_step : 1e-4;
  h = std::min(h, t1 - t0);

  sys.eval(t, y.data(), k1.data());  // FSAL seed
  std::size_t steps = 0;
  while (t < t1 && steps < opt.max_steps) {
    ++steps;
    if (t + h > t1) h = t1 - t;

    for (int i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    sys.eval(t + c2 * h, tmp.data(), k2.data());
    for (int i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    sys.eval(t + c3 * h, tmp.data(), k3.data());
    for (int i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    sys.eval(t + c4 * h, tmp.data(), k4.data());
    for (int i = 0; i < n; ++i)
      tmp[i] = y[i] +
               h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    sys.eval(t + c5 * h, tmp.data(), k5.data());
    for (int i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                           a64 * k4[i] + a65 * k5[i]);
    sys.eval(t + h, tmp.data(), k6.data());
    for (int i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                            b5 * k5[i] + b6 * k6[i]);
    sys.eval(t + h, ynew.data(), k7.data());

    // Error estimate.
    double err = 0.0;
    bool bad = !finite(ynew);
    if (!bad) {
      for (int i = 0; i < n; ++i) {
        double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                        e6 * k6[i] + e7 * k7[i]);
        double sc =
            opt.atol + opt.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
        err += (e / sc) * (e / sc);
      }
      err = std::sqrt(err / n);
      if (!std::isfinite(err)) bad = true;
    }

    if (bad) {
      h *= 0.25;
      if (h < opt.min_step) {
        traj.exit_time = t;
        traj.completed = false;
        traj.rhs_evaluations = sys.rhs_evaluations;
        return traj;
      }
      continue;
    }

    if (err <= 1.0) {
      if (guard && !guard->ok(ynew)) {
        traj.exit_time = t;
        traj.completed = false;
        traj.rhs_evaluations = sys.rhs_evaluations;
        return traj;
      }
      // Accept; store dense coefficients (Hairer rcont layout, 5 per comp).
      std::vector<double> blob(5 * n);
      for (int i = 0; i < n; ++i) {
        double ydiff = ynew[i] - y[i];
        double bspl = h * k1[i] - ydiff;
        blob[i] = y[i];
        blob[n + i] = ydiff;
        blob[2 * n + i] = bspl;
        blob[3 * n + i] = ydiff - h * k7[i] - bspl;
        blob[4 * n + i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] +
                               d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      traj.dense.push_back(std::move(blob));

      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      traj.times.push_back(t);
      traj.states.push_back(y);

      double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
      h *= std::clamp(fac, 0.2, 5.0);
    } else {
      double fac = 0.9 * std::pow(err, -0.2);
      h *= std::clamp(fac, 0.1, 1.0);
      if (h < opt.min_step) {
        traj.exit_time = t;
        traj.completed = false;
        traj.rhs_evaluations = sys.rhs_evaluations;
        return traj;
      }
    }
  }

  traj.completed = (t >= t1);
  if (!traj.completed) traj.exit_time = t;
  traj.rhs_evaluations = sys.rhs_evaluations;
  return traj;
}

}  // namespace

Trajectory integrate_ivp(const OdeSystem& sys, std::span<const double> y0,
                         double t_begin, double t_end,
                         const IntegrateOptions& options,
                         const DomainGuard* guard) {
  if (static_cast<int>(y0.size()) != sys.dim)
    throw std::invalid_argument("initial state has wrong dimension");
  if (!(t_end > t_begin))
    throw std::invalid_argument("t_end must exceed t_begin");
  if (guard && !guard->ok(y0))
    throw std::invalid_argument("initial state violates the domain");
  sys.rhs_evaluations = 0;
  return options.method == IntegrateOptions::Method::Rk4
             ? integrate_rk4(sys, y0, t_begin, t_end, options, guard)
             : integrate_dopri5(sys, y0, t_begin, t_end, options, guard);
}

Trajectory integrate_ivp(const TimeDepVectorField& x, const Env& bound,
                         std::span<const double> y0, double t_begin,
                         double t_end, const IntegrateOptions& options,
                         const DomainGuard* guard) {
  OdeSystem sys = compile_system(x, bound);
  return integrate_ivp(sys, y0, t_begin, t_end, options, guard);
}

// ---------------------------------------------------------------------------
// Dense evaluation
// ---------------------------------------------------------------------------

void Trajectory::eval(double t, double* out) const {
  if (times.empty()) throw std::out_of_range("empty trajectory");
  const double lo = times.front(), hi = times.back();
  const double slack = 1e-9 * (1.0 + std::fabs(hi - lo));
  if (t < lo - slack || t > hi + slack)
    throw std::out_of_range("dense evaluation outside the trajectory span");
  t = std::clamp(t, lo, hi);

  // Grid nodes reproduce stored states exactly.
  auto node = std::lower_bound(times.begin(), times.end(), t);
  if (node != times.end() && *node == t) {
    std::size_t i = static_cast<std::size_t>(node - times.begin());
    std::copy(states[i].begin(), states[i].end(), out);
    return;
  }

  // Locate the step containing t.
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t step = (it == times.begin())
                         ? 0
                         : static_cast<std::size_t>(it - times.begin()) - 1;
  if (step >= dense.size()) step = dense.size() - 1;
  if (dense.empty()) {  // single-node trajectory
    std::copy(states[0].begin(), states[0].end(), out);
    return;
  }

  const double t0 = times[step], t1 = times[step + 1];
  const double h = t1 - t0;
  const double theta = h > 0 ? (t - t0) / h : 0.0;
  const int n = dim;
  const std::vector<double>& blob = dense[step];

  if (method == IntegrateOptions::Method::Dopri5) {
    const double th1 = 1.0 - theta;
    for (int i = 0; i < n; ++i) {
      out[i] = blob[i] +
               theta * (blob[n + i] +
                        th1 * (blob[2 * n + i] +
                               theta * (blob[3 * n + i] +
                                        th1 * blob[4 * n + i])));
    }
  } else {
    // Cubic Hermite from endpoint states and derivatives.
    const std::vector<double>& ya = states[step];
    const std::vector<double>& yb = states[step + 1];
    const double h00 = (1 + 2 * theta) * (1 - theta) * (1 - theta);
    const double h10 = theta * (1 - theta) * (1 - theta);
    const double h01 = theta * theta * (3 - 2 * theta);
    const double h11 = theta * theta * (theta - 1);
    for (int i = 0; i < n; ++i)
      out[i] = h00 * ya[i] + h * h10 * blob[i] + h01 * yb[i] +
               h * h11 * blob[n + i];
  }
}

std::vector<double> Trajectory::eval(double t) const {
  std::vector<double> out(dim);
  eval(t, out.data());
  return out;
}

void write_csv(std::ostream& out, const Trajectory& traj, int points) {
  out << "t";
  for (const auto& name : traj.state_names) out << "," << name;
  out << "\n";
  out.precision(15);
  const double t0 = traj.t_begin(), t1 = traj.t_end();
  for (int i = 0; i < points; ++i) {
    double t = points > 1 ? t0 + (t1 - t0) * i / (points - 1) : t0;
    std::vector<double> y = traj.eval(t);
    out << t;
    for (double v : y) out << "," << v;
    out << "\n";
  }
}

}  // namespace liesup
