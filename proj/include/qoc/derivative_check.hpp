#pragma once

#include <cstdint>

#include "qoc/benchmark.hpp"

namespace qoc {

// Central finite differences of an order-0 objective: component p gets
// (f(x + h e_p) - f(x - h e_p)) / (2 h).
RVec fd_gradient(const Objective& objective, const RVec& x, double h);

// Central finite differences of the order-1 gradient, symmetrized.
RMat fd_hessian(const Objective& objective, const RVec& x, double h);

// max |a - b| / max(scale of b, floor)
double max_rel_error(const RVec& a, const RVec& b, double floor = 1e-12);
double max_rel_error(const RMat& a, const RMat& b, double floor = 1e-12);

struct DerivativeReport {
  double j_value = 0.0;
  double grad_rel_err = 0.0;  // analytical vs FD of J
  double hess_rel_err = 0.0;  // analytical vs FD of the analytical gradient
  double hess_asymmetry = 0.0;
};

// Evaluate the analytical derivatives of the problem's infidelity at the
// random pulse drawn from `seed` and compare against central finite
// differences.
DerivativeReport derivative_report(const ProblemSpec& problem,
                                   std::uint64_t seed, double h_grad = 1e-6,
                                   double h_hess = 1e-5);

}  // namespace qoc
