#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qoc/linalg.hpp"
#include "qoc/propagation.hpp"

namespace qoc {

// Piecewise-constant control grid: amplitudes(j, k) is the amplitude of
// control k during time step j (angular-frequency units). Box bounds are
// given per control channel and apply to every step of that channel.
struct ControlPulse {
  RMat amplitudes;                                // N x M
  double dt = 1.0;
  std::vector<std::pair<double, double>> bounds;  // per control [min, max]

  int steps() const { return static_cast<int>(amplitudes.rows()); }
  int controls() const { return static_cast<int>(amplitudes.cols()); }
};

// Flattening convention for the parameter vector: control-major blocks of
// length N, i.e. flat index p = k*N + j. Fixed for file I/O and for the
// gradient/Hessian layout.
RVec flatten_pulse(const RMat& amplitudes);
RMat unflatten_pulse(const RVec& flat, int steps, int controls);

// Bilinear control system H(t_j) = H0 + sum_k c_{j,k} H_k with a diagonal
// 0/1 projector onto the computational subspace and a target unitary
// supported on that subspace. `initial` defaults to the identity.
struct BilinearSystem {
  CMat h0;
  std::vector<CMat> controls;
  CMat projector;
  CMat target;
  CMat initial;

  int dim() const { return static_cast<int>(h0.rows()); }
  int dim_sub() const;  // rank of the projector
  void validate() const;
};

// Per-pulse propagation snapshot: step eigensystems, step propagators and
// their first derivatives, the exchange matrices, and the cumulative
// left/right products (0-based step propagators u[0..N-1], N+1 cumulants):
//   right[j] = u[j-1] ... u[0] * initial   (right[0] = initial)
//   left[j]  = u[N-1] ... u[j]             (left[N] = identity)
// so the total propagator is right[N] = left[j+1] u[j] right[j] for every j.
// A content hash ties the cache to exactly one pulse.
struct PropagationCache {
  std::vector<StepEigensystem> eigensystems;  // N
  std::vector<CMat> u;                        // N step propagators
  std::vector<CMat> first;                    // N exchange matrices I
  std::vector<std::vector<CMat>> du;          // [j][k] dU_j/dc_{j,k}
  std::vector<CMat> right;                    // N+1: right[j] = U_{j-1}...U_0
  std::vector<CMat> left;                     // N+1: left[j] = U_N...U_j
  bool with_derivatives = false;
  double dt = 0.0;
  std::uint64_t pulse_hash = 0;

  int steps() const { return static_cast<int>(u.size()); }
};

std::uint64_t pulse_content_hash(const ControlPulse& pulse);

PropagationCache build_cache(const BilinearSystem& sys,
                             const ControlPulse& pulse,
                             bool with_derivatives);

// J = 1 - |Tr[P U P V^dagger] / dim_sub|^2, clamped into [0, 1] to absorb
// roundoff at the extremes; invariant under a global phase of the target.
double infidelity(const PropagationCache& cache, const BilinearSystem& sys);

// dJ/dc_{j,k}, flattened k*N + j. Requires a cache built with derivatives.
RVec gradient(const PropagationCache& cache, const BilinearSystem& sys);

// Symmetric NM x NM Hessian of J. Requires a cache built with derivatives.
RMat hessian(const PropagationCache& cache, const BilinearSystem& sys);

struct GradHessResult {
  double j_value = 0.0;
  RVec grad;
  RMat hess;
  bool has_hess = false;
};

// Convenience wrapper: build a cache and evaluate J (order 0), J + gradient
// (order 1) or J + gradient + Hessian (order 2).
GradHessResult evaluate(const BilinearSystem& sys, const ControlPulse& pulse,
                        int order);

// Same contract evaluated through the truncated-series propagator backend;
// derivatives are exact derivatives of the truncation itself.
GradHessResult evaluate_taylor(const BilinearSystem& sys,
                               const ControlPulse& pulse, int order,
                               int taylor_order);

// State-transfer path: F = |sum_k <psi_k| V^dagger U |psi_k> / K|^2 over an
// orthonormal state set. With states spanning the projected subspace this
// equals the unitary-path objective; derivatives are assembled from
// propagated derivative states using matrix-vector work only.
GradHessResult state_transfer_objective(const BilinearSystem& sys,
                                        const std::vector<CVec>& states,
                                        const ControlPulse& pulse, int order);

}  // namespace qoc
