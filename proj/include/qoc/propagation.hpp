#pragma once

#include <vector>

#include "qoc/linalg.hpp"

namespace qoc {

// Eigendecomposition of one step Hamiltonian H = R D R^dagger, with the
// columns of `basis` the eigenvectors and `energies` ascending. The step
// duration dt travels with the eigensystem because every derived quantity
// (propagator, exchange integrals) depends on the product E*dt.
struct StepEigensystem {
  RVec energies;  // ascending, angular-frequency units (hbar = 1)
  CMat basis;     // unitary, columns are eigenvectors
  double dt = 0.0;
};

// Pairwise tolerance used to decide when two eigenvalues are treated as
// degenerate inside the exchange integrals. The comparison is made on the
// dimensionless phase gap |E_a - E_b|*dt, so the same setting works across
// time scales. Division by a smaller gap amplifies rounding faster than the
// series of the degenerate limit diverges, so the limit branch is preferred
// once the phase gap falls below this threshold.
constexpr double kDefaultDegeneracyTol = 1e-8;

// Diagonalize a (nearly) Hermitian matrix. The input is symmetrized as
// (H + H^dagger)/2 before factorization; non-finite entries are rejected.
StepEigensystem eig_hermitian(const CMat& h, double dt);

// U = R diag(exp(-i E_n dt)) R^dagger
CMat step_propagator(const StepEigensystem& es);

// First exchange matrix I(m,n):
//   I(m,n) = (e^{-i E_m dt} - e^{-i E_n dt}) / (E_m - E_n)   for distinct E
//   I(m,n) = -i dt e^{-i E_m dt}                             when degenerate
// evaluated through the cancellation-free midpoint form
// -i dt e^{-i dt (E_m+E_n)/2} sinc((E_m-E_n) dt / 2), which equals the
// quotient above identically and stays accurate through tiny gaps.
// Symmetric by construction (the upper triangle is computed and mirrored).
CMat first_exchange(const StepEigensystem& es,
                    double degeneracy_tol = kDefaultDegeneracyTol);

// Second exchange integral, a fully symmetric function of an index triple.
// With f(E) = e^{-i E dt} the value is the second divided difference
// f[E_1, E_2, E_3], covering the branch structure
//   all distinct:       [I(n3,n2) - I(n2,n1)] / (E_{n3} - E_{n1})
//   exactly two equal:  [I(n,m) - I(m,m)] / (E_n - E_m)   (m repeated)
//   all equal:          (-i dt / 2) I(n1,n1)
// via two numerically stable paths: triples whose total energy spread is
// small are summed as a centered power series (whose leading terms are the
// degenerate limits above), wide triples use the divided-difference
// recursion on the stored I entries with a guaranteed-large denominator.
// Values are produced lazily per triple; only the I matrix is stored.
class SecondExchange {
 public:
  SecondExchange(const StepEigensystem& es, const CMat& first,
                 double degeneracy_tol = kDefaultDegeneracyTol);

  cxd operator()(int n1, int n2, int n3) const;

 private:
  cxd centered_series(double e1, double e2, double e3) const;

  const RVec energies_;
  const CMat first_;
  double dt_;
  double tol_;  // phase-gap tolerance, compared against |dE|*dt
};

// dU_j/dc_{j,k} = R ((R^dagger H_k R) .* I) R^dagger (elementwise product)
CMat step_first_derivative(const StepEigensystem& es, const CMat& first,
                           const CMat& h_k);

// d2U_j/dc_{j,k'} dc_{j,k}. In the eigenbasis, element (m,n) is
//   sum_{p} (A'(m,p) A(p,n) + A(m,p) A'(p,n)) * S(n, p, m)
// with A = R^dagger H_k R, A' = R^dagger H_k' R, rotated back with R.
// Symmetric under k <-> k' by construction.
CMat step_second_derivative(const StepEigensystem& es, const SecondExchange& s,
                            const CMat& h_k, const CMat& h_kp);

// Truncated-series propagator U_L = sum_{l<=L} (-i H dt)^l / l! together
// with the exact first and second derivatives *of the truncation itself*
// with respect to the control amplitudes c_k (H = H0 + sum_k c_k H_k).
// d2u is packed row-major over ordered pairs (k', k): d2u[kp * M + k].
struct TaylorStepDerivatives {
  CMat u;
  std::vector<CMat> du;   // M entries
  std::vector<CMat> d2u;  // M*M entries, symmetric in (k', k)
};

TaylorStepDerivatives taylor_step_derivatives(const CMat& h0,
                                              const std::vector<CMat>& h_k,
                                              const RVec& c_row, double dt,
                                              int order);

}  // namespace qoc
