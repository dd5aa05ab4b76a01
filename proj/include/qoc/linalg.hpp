#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace qoc {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;

// Instrumentation: thread-local counter of dense matrix-matrix products
// executed through mprod(). Used by the scaling tests to verify that the
// gradient assembly is O(N) and the Hessian assembly is O(N^2) in the
// number of time steps.
std::uint64_t matmul_count();
void reset_matmul_count();

// Counted dense product. All full-size matrix-matrix multiplications in the
// propagation/objective hot paths go through this helper; matrix-vector
// products and elementwise work are not counted.
CMat mprod(const CMat& a, const CMat& b);

// max |entry| of a complex matrix
double max_abs(const CMat& m);

// true if every entry of the matrix is finite
bool all_finite(const CMat& m);
bool all_finite(const RMat& m);

}  // namespace qoc
