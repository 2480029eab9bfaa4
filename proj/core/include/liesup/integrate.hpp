#pragma once

// Deterministic IVP integration: fixed-step RK4 with cubic Hermite dense
// output and adaptive Dormand-Prince 5(4) with its 4th-order interpolant.
// Trajectories abort cleanly when the state leaves the declared domain.

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "liesup/vfield.hpp"

namespace liesup {

// Expression compiled to a postfix tape over a dense slot vector; far faster
// than tree-walking evaluate() inside integration loops.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e,
               const std::unordered_map<std::string, int>& slot_of);

  double eval(const double* slots) const;
  int max_stack() const { return max_stack_; }

 private:
  struct Instr {
    enum class Op {
      PushConst, PushSlot, Neg, Sqrt, Exp, Ln, Sin, Cos, Abs, Sign,
      Add, Sub, Mul, Div, PowInt, PowReal,
    };
    Op op;
    double value = 0.0;  // PushConst / PowReal exponent
    int slot = 0;        // PushSlot
    std::int64_t ipow = 0;
  };
  std::vector<Instr> code_;
  int max_stack_ = 0;
};

// A right-hand side compiled for numeric integration. Slot layout:
// [0] = time, [1..dim] = states, then one slot per bound symbol.
struct OdeSystem {
  int dim = 0;
  std::vector<std::string> state_names;
  std::string time_name = "t";
  std::vector<CompiledExpr> rhs;
  std::vector<double> bound_values;  // parameter/constant slot values

  void eval(double t, const double* y, double* dy) const;
  mutable std::size_t rhs_evaluations = 0;

 private:
  friend OdeSystem compile_system(const TimeDepVectorField&, const Env&);
  mutable std::vector<double> scratch_;
};

// Binds every non-state free symbol of the components to a value from
// `bound` (throws UnboundSymbolError when missing).
OdeSystem compile_system(const TimeDepVectorField& x, const Env& bound = {});

struct DomainGuard {
  struct Bound {
    int index;  // state index
    double lower;
    double upper;
  };
  std::vector<Bound> bounds;
  double max_norm = 1e6;  // blow-up guard on the max-abs of the state

  bool ok(std::span<const double> y) const;
};

struct IntegrateOptions {
  enum class Method { Rk4, Dopri5 };
  Method method = Method::Dopri5;
  double fixed_step = 1e-3;  // rk4
  double atol = 1e-10;
  double rtol = 1e-10;
  double initial_step = 1e-4;
  double min_step = 1e-13;
  std::size_t max_steps = 2000000;
};

class Trajectory {
 public:
  bool completed = false;
  std::optional<double> exit_time;  // domain exit, when not completed
  int dim = 0;
  IntegrateOptions::Method method = IntegrateOptions::Method::Dopri5;
  std::size_t rhs_evaluations = 0;
  std::vector<std::string> state_names;

  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  const std::vector<double>& state_at_node(std::size_t i) const {
    return states[i];
  }
  std::size_t node_count() const { return times.size(); }

  // Dense evaluation; t must lie within [t_begin, t_end] up to round-off.
  std::vector<double> eval(double t) const;
  void eval(double t, double* out) const;

  // Step endpoints and states; dense coefficients per step.
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> dense;  // per-step blob, layout by method
};

Trajectory integrate_ivp(const OdeSystem& system, std::span<const double> y0,
                         double t_begin, double t_end,
                         const IntegrateOptions& options = {},
                         const DomainGuard* guard = nullptr);

// Convenience overload compiling the field first.
Trajectory integrate_ivp(const TimeDepVectorField& x, const Env& bound,
                         std::span<const double> y0, double t_begin,
                         double t_end, const IntegrateOptions& options = {},
                         const DomainGuard* guard = nullptr);

// CSV export: header "t,<state names>", one row per requested point.
void write_csv(std::ostream& out, const Trajectory& traj, int points);

}  // namespace liesup
