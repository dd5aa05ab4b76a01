#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qoc/linalg.hpp"

namespace qoc {

// Objective provider: evaluates f (order 0), f + gradient (order 1) or
// f + gradient + Hessian (order 2) at a flat parameter vector. Providers
// must be reentrant.
struct ObjectiveEval {
  double f = 0.0;
  RVec grad;
  RMat hess;
};
using Objective = std::function<ObjectiveEval(const RVec& x, int order)>;

enum class Mode { NewtonExactHessian, Bfgs, GradientDescent };
enum class ConstraintStyle { Barrier, Penalty, None };

Mode mode_from_string(const std::string& name);
std::string mode_name(Mode mode);
ConstraintStyle constraint_style_from_string(const std::string& name);
std::string constraint_style_name(ConstraintStyle style);

struct OptimizerConfig {
  Mode mode = Mode::NewtonExactHessian;
  ConstraintStyle constraint_style = ConstraintStyle::Barrier;

  double optimality_tol = 1e-9;  // infinity norm of the projected gradient
  double step_tol = 1e-10;       // infinity norm of the accepted step
  int max_iterations = 1500;
  // Stop (reason: optimality) once f reaches this value. Meaningful only for
  // objectives with a known attainable lower bound: infidelity lives in
  // [0, 1], so the pulse-campaign layers set 0 here; disabled by default.
  double target_f = -std::numeric_limits<double>::infinity();
  double penalty_sigma = 1e5;
  double fixed_step = 0.1;  // gradient-descent only

  // log-barrier ladder: minimize f - mu * sum[log(x-lo) + log(hi-x)],
  // dropping mu by `barrier_reduction` once the barrier gradient satisfies
  // |grad_phi|_inf < barrier_kappa * mu or after `barrier_inner_budget`
  // inner iterations at the current mu (whichever comes first)
  double barrier_mu0 = 1e-2;
  double barrier_reduction = 0.2;
  double barrier_mu_floor = 1e-11;
  double barrier_kappa = 10.0;
  int barrier_inner_budget = 5;
  double fraction_to_boundary = 0.995;

  // Armijo backtracking
  double armijo_c1 = 1e-4;
  double backtrack_rho = 0.5;
  int max_backtracks = 60;

  // BFGS curvature safeguard: skip the update when
  // y.s <= curvature_skip_tol * |s| * |y|
  double curvature_skip_tol = 1e-10;

  // Adaptive damping for the Newton direction in indefinite regions. The
  // minimal eigenvalue shift |lambda_min| + 1e-8 alone can leave the shifted
  // system near-singular; an extra lm_state * max(|lambda_min|, 1e-2) is
  // added while the line search keeps struggling. lm_state grows tenfold
  // whenever a step needs >= lm_grow_backtracks halvings, decays by
  // lm_decay on clean (zero-backtrack) steps, and is zeroed below 1e-3.
  // The damping is applied only while lambda_min <= 0, so convergence near
  // a positive-definite minimum is undamped Newton.
  int lm_grow_backtracks = 2;
  double lm_grow = 10.0;
  double lm_decay = 3.0;

  bool record_iterates = false;  // keep the full iterate trace in the report
};

enum class TerminationReason {
  Optimality,
  StepSize,
  MaxIterations,
  LineSearchFailure,
  Divergence,
};
std::string termination_name(TerminationReason reason);

struct OptimizationReport {
  RVec final_x;
  double final_f = 0.0;  // best objective value seen at any accepted iterate
  std::vector<double> history;  // best-so-far objective per accepted iteration
  std::vector<RVec> iterates;   // accepted iterates (only if record_iterates)
  long infidelity_evaluations = 0;  // provider calls of any derivative order
  long gradient_evaluations = 0;    // provider calls with order >= 1
  long hessian_evaluations = 0;     // provider calls with order >= 2
  int iterations = 0;
  TerminationReason reason = TerminationReason::MaxIterations;
  double wall_seconds = 0.0;
  bool start_clipped = false;  // x0 was projected into the box before use
};

// BFGS update B + y y^T / (y.s) - (B s)(B s)^T / (s^T B s), skipped (B
// returned unchanged, *skipped set) when the curvature condition fails.
RMat bfgs_update(const RMat& b, const RVec& s, const RVec& y,
                 double curvature_skip_tol, bool* skipped = nullptr);

// Backtracking Armijo line search on f along p from x: returns the largest
// alpha = alpha0 * rho^k with f(x + alpha p) <= f0 + c1 alpha g.p.
// Requires g.p < 0. `f` may return +inf to reject a trial point.
struct LineSearchResult {
  double alpha = 0.0;
  int backtracks = 0;
  bool success = false;
};
LineSearchResult line_search(const std::function<double(const RVec&)>& f,
                             const RVec& x, const RVec& p, const RVec& g,
                             double f0, double alpha0,
                             const OptimizerConfig& cfg);

// Box-constrained minimization. Barrier style keeps iterates strictly
// interior via the fraction-to-boundary rule; penalty style wraps the
// objective with penalty_wrap and runs the same engine unconstrained; none
// runs unconstrained. Mode gradient-descent dispatches to
// gradient_descent_fixed and performs no bounds handling.
OptimizationReport minimize(const Objective& objective, const RVec& x0,
                            const RVec& lo, const RVec& hi,
                            const OptimizerConfig& cfg);

// x_{n+1} = x_n - fixed_step * grad f; terminates on gradient/step tolerance,
// max iterations, or sustained objective increase (divergence).
OptimizationReport gradient_descent_fixed(const Objective& objective,
                                          const RVec& x0,
                                          const OptimizerConfig& cfg);

// Quadratic penalty wrapper: adds sigma * (violation)^2 per component outside
// the box, 2 sigma times the signed violation to the gradient entry, and 2
// sigma to the Hessian diagonal; identical to the base objective inside it.
Objective penalty_wrap(const Objective& objective, const RVec& lo,
                       const RVec& hi, double sigma);

}  // namespace qoc
