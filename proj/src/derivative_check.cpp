#include "qoc/derivative_check.hpp"

#include <cmath>

namespace qoc {

RVec fd_gradient(const Objective& objective, const RVec& x, double h) {
  RVec g(x.size());
  RVec xp = x;
  for (int p = 0; p < x.size(); ++p) {
    xp(p) = x(p) + h;
    const double fp = objective(xp, 0).f;
    xp(p) = x(p) - h;
    const double fm = objective(xp, 0).f;
    xp(p) = x(p);
    g(p) = (fp - fm) / (2.0 * h);
  }
  return g;
}

RMat fd_hessian(const Objective& objective, const RVec& x, double h) {
  const int n = static_cast<int>(x.size());
  RMat hess(n, n);
  RVec xp = x;
  for (int p = 0; p < n; ++p) {
    xp(p) = x(p) + h;
    const RVec gp = objective(xp, 1).grad;
    xp(p) = x(p) - h;
    const RVec gm = objective(xp, 1).grad;
    xp(p) = x(p);
    hess.col(p) = (gp - gm) / (2.0 * h);
  }
  return RMat(0.5 * (hess + hess.transpose()));
}

double max_rel_error(const RVec& a, const RVec& b, double floor) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

double max_rel_error(const RMat& a, const RMat& b, double floor) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

DerivativeReport derivative_report(const ProblemSpec& problem,
                                   std::uint64_t seed, double h_grad,
                                   double h_hess) {
  const Objective objective = make_pulse_objective(problem);
  const RVec x =
      flatten_pulse(initial_pulse(seed, problem.steps, problem.bounds));

  const ObjectiveEval eval = objective(x, 2);
  DerivativeReport rep;
  rep.j_value = eval.f;
  rep.grad_rel_err = max_rel_error(eval.grad, fd_gradient(objective, x, h_grad));
  rep.hess_rel_err = max_rel_error(eval.hess, fd_hessian(objective, x, h_hess));
  rep.hess_asymmetry =
      (eval.hess - RMat(eval.hess.transpose())).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace qoc
