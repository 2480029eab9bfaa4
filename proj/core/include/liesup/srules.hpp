#pragma once

// Superposition rules: constant fitting against a target jet, trajectory
// reconstruction, Monte-Carlo verification with first-integral drift checks,
// and the characteristic-system residual of a candidate rule.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "liesup/integrate.hpp"
#include "liesup/sode.hpp"

namespace liesup {

// Sampled configurations must satisfy value >= min_value + margin (or the
// absolute value when use_abs); expressions may reference copy 0.
struct GenericityConstraint {
  Expr expression;
  double min_value = 0.0;
  bool use_abs = true;
  double margin = 0.1;
};

struct RuleBranch {
  std::vector<Expr> components;  // base-coordinate block, one per variable
};

// A (possibly partial) superposition rule u(k; jets of copies 1..m); copy 0
// denotes the dependent solution. Branches are alternative closed forms
// (typically the two signs of a square root); aux names are extra unknowns
// fitted together with the constants and pinned by the consistency equations.
struct SuperpositionRule {
  std::string label;
  int copies = 1;
  bool partial = false;  // constants are sampled, not fitted
  std::vector<std::string> constants;
  std::vector<std::string> aux;
  std::vector<RuleBranch> branches;
  std::vector<GenericityConstraint> genericity;
  std::vector<Expr> initial_guess;  // optional per-unknown seed expressions,
                                    // evaluated on the copy-0..m jets at t0
  Interval k_box{-2.0, 2.0};
};

// First integral of the prolonged dynamics on `copies` solution copies.
struct FirstIntegral {
  std::string name;
  int copies = 2;
  bool time_dependent = false;
  Expr expression;
  bool hold_for_char = false;     // pins the level set in char_residual
  std::string solve_symbol;       // symbol solved for when holding the level
};

struct FitOptions {
  double tol = 1e-9;
  int max_iterations = 50;
  int starts = 16;
  Interval start_box{-5.0, 5.0};
  std::uint64_t seed = 4242;
};

struct FitResult {
  bool converged = false;
  int branch = -1;
  std::vector<double> values;  // constants first, then aux
  double residual = 0.0;
};

// Fits (constants, aux) of one branch so the rule and its total time
// derivatives reproduce `target_jet` at time t0 and satisfy the consistency
// equation; `particular_jets[a]` is the level-major jet of copy a+1.
FitResult fit_constants(const AnySystem& system, const SuperpositionRule& rule,
                        int branch, std::span<const double> target_jet,
                        const std::vector<std::vector<double>>& particular_jets,
                        double t0, const FitOptions& options = {});

// Tries every branch and returns the best converged fit, if any.
FitResult fit_constants_any_branch(
    const AnySystem& system, const SuperpositionRule& rule,
    std::span<const double> target_jet,
    const std::vector<std::vector<double>>& particular_jets, double t0,
    const FitOptions& options = {});

// Evaluates the rule's base block at time t from dense particular solutions.
std::vector<double> reconstruct(const AnySystem& system,
                                const SuperpositionRule& rule, int branch,
                                std::span<const double> values,
                                std::span<const Trajectory> particulars,
                                double t);

// Full jet of the reconstruction at time t: [u, Tu, ..., T^{r-1}u].
std::vector<double> reconstruct_jet(const AnySystem& system,
                                    const SuperpositionRule& rule, int branch,
                                    std::span<const double> values,
                                    std::span<const Trajectory> particulars,
                                    double t);

struct TrialConfig {
  double t_begin = 0.0;
  double t_end = 2.0;
  Box box;                    // initial-jet sampling box (base symbol names)
  std::vector<double> times;  // time samples for residual / freeze checks
};

struct VerifyOptions {
  int trials = 20;
  std::uint64_t seed = 20120917;
  IntegrateOptions integrate;
  FitOptions fit;
  double recon_tol = 1e-6;
  double drift_tol = 1e-7;
  int grid_points = 101;
  int max_redraws = 400;
};

struct TrialRecord {
  bool ok = false;
  int branch = -1;
  double recon_error = 0.0;
  double worst_drift = 0.0;
  std::vector<double> values;
  std::string detail;
};

struct SrVerification {
  bool passed = false;
  int trials_run = 0;
  double max_recon_error = 0.0;
  double max_drift = 0.0;
  std::vector<TrialRecord> trials;
  std::string detail;
};

// Monte-Carlo verification. Full rules: draw target + m particular initial
// jets, integrate all, fit the constants at t_begin, compare the
// reconstruction with the target on a dense grid, and check every integral
// for drift over all ordered tuples of distinct solutions. Partial rules:
// draw the particulars and the constants, derive the reconstruction's initial
// jet, and integrate a reference from it.
SrVerification verify_superposition(const AnySystem& system,
                                    const SuperpositionRule& rule,
                                    std::span<const FirstIntegral> integrals,
                                    const TrialConfig& trial,
                                    const VerifyOptions& options = {});

// One fitted reconstruction trial, sampled like verify_superposition, with
// the dense comparison series of the first base coordinate.
struct PlotSeries {
  bool ok = false;
  int branch = -1;
  std::vector<double> values;
  std::vector<double> times;
  std::vector<double> reference;
  std::vector<double> reconstructed;
  std::string detail;
};

PlotSeries sample_reconstruction(const AnySystem& system,
                                 const SuperpositionRule& rule,
                                 const TrialConfig& trial,
                                 const VerifyOptions& options = {});

struct ConservationReport {
  bool passed = false;
  int trials_run = 0;
  double max_drift = 0.0;
  std::string detail;
};

ConservationReport check_first_integral_conservation(
    const AnySystem& system, const FirstIntegral& integral,
    const TrialConfig& trial, const VerifyOptions& options = {});

// Symbolic annihilation tests on the prolonged space of `integral.copies`
// copies. X_L requires a structurally time-free integral (throws otherwise).
ZeroVerdict check_XD_annihilates(const AnySystem& system,
                                 const FirstIntegral& integral, const Box& box,
                                 const ZeroTestOptions& options = {});
ZeroVerdict check_XL_annihilates(const AnySystem& system,
                                 const FirstIntegral& integral, const Box& box,
                                 const ZeroTestOptions& options = {});

struct CharOptions {
  int samples = 40;
  double tol = 1e-8;
  std::uint64_t seed = 977;
  int max_resamples = 4000;
  FitOptions fit;
};

struct CharReport {
  bool passed = false;
  int samples_used = 0;
  double max_residual = 0.0;
  std::string detail;
};

// Residual of T^r u - F(t, u, Tu, ...) at sampled (t, jets, constants). For
// rules with aux unknowns the constants are fitted once per sample batch and
// further jet samples are drawn on the held integral's level set.
CharReport char_residual(const AnySystem& system, const SuperpositionRule& rule,
                         std::span<const FirstIntegral> integrals,
                         const TrialConfig& trial,
                         const CharOptions& options = {});

// Restriction of a first-order-lift rule to the base block: keeps the first
// `base_size` components of every branch.
SuperpositionRule project_hode_rule(const SuperpositionRule& rule,
                                    int base_size);

}  // namespace liesup
