#include "qoc/objective.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>

namespace qoc {

namespace {

// Tr[a * b] without forming the product
cxd trace_product(const CMat& a, const CMat& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

// P V^dagger P, the fixed overlap kernel of the gate fidelity
CMat overlap_kernel(const BilinearSystem& sys) {
  return mprod(mprod(sys.projector, sys.target.adjoint()), sys.projector);
}

void fnv_mix(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
}

// same-step second derivative provider, abstracted over the backend
using SameStepFn = std::function<CMat(int j, int k, int kp)>;

RMat hessian_impl(const PropagationCache& cache, const BilinearSystem& sys,
                  const SameStepFn& same_step) {
  if (!cache.with_derivatives) {
    throw std::logic_error("hessian: cache was built without derivatives");
  }
  const int n = cache.steps();
  const int m = static_cast<int>(sys.controls.size());
  const int dim_sub = sys.dim_sub();
  const CMat x = overlap_kernel(sys);
  const cxd t = trace_product(cache.right[n], x);

  // chain pieces reused across the (i, j) double loop:
  //   y(j,k)  = x left[j+1] dU_j                (left trace partner)
  //   z(j)    = right[j] x left[j+1]            (same-step trace partner)
  //   w(i,k') = u_{j-1} ... u_{i+1} dU_i right[i] at the current outer step j
  // so the cross term is Tr[y(j,k) w(i,k')] and the first-derivative traces
  // are Tr[y(j,k) right[j]]. w is advanced by one step propagator per outer
  // iteration rather than formed from right[i+1]^dagger, which would silently
  // assume unitary steps and break for truncated-series propagators.
  std::vector<std::vector<CMat>> y(n), w(n);
  std::vector<CMat> z(n);
  RMat tc_re(n, m), tc_im(n, m);
  for (int j = 0; j < n; ++j) {
    z[j] = mprod(mprod(cache.right[j], x), cache.left[j + 1]);
    const CMat xl = mprod(x, cache.left[j + 1]);
    y[j].resize(m);
    for (int k = 0; k < m; ++k) {
      y[j][k] = mprod(xl, cache.du[j][k]);
      const cxd tc = trace_product(y[j][k], cache.right[j]);
      tc_re(j, k) = tc.real();
      tc_im(j, k) = tc.imag();
    }
  }

  const double scale = -2.0 / (static_cast<double>(dim_sub) * dim_sub);
  RMat hess(n * m, n * m);
  for (int j = 0; j < n; ++j) {
    // bring w(i, k') for i < j - 1 up from step j - 1 to step j; the entry
    // created at iteration j - 1 is already at the right level
    for (int i = 0; i + 1 < j; ++i) {
      for (int kp = 0; kp < m; ++kp) {
        w[i][kp] = mprod(cache.u[j - 1], w[i][kp]);
      }
    }
    for (int i = 0; i <= j; ++i) {
      for (int k = 0; k < m; ++k) {
        for (int kp = 0; kp < m; ++kp) {
          if (i == j && kp > k) continue;
          cxd t_pq;
          if (i == j) {
            t_pq = trace_product(same_step(j, k, kp), z[j]);
          } else {
            t_pq = trace_product(y[j][k], w[i][kp]);
          }
          const cxd tc_p(tc_re(j, k), tc_im(j, k));
          const cxd tc_q(tc_re(i, kp), tc_im(i, kp));
          const double val =
              scale * (std::conj(t) * t_pq + std::conj(tc_q) * tc_p).real();
          const int p = k * n + j;
          const int q = kp * n + i;
          hess(p, q) = val;
          hess(q, p) = val;
        }
      }
    }
    w[j].resize(m);
    for (int kp = 0; kp < m; ++kp) {
      w[j][kp] = mprod(cache.du[j][kp], cache.right[j]);
    }
  }
  return hess;
}

}  // namespace

RVec flatten_pulse(const RMat& amplitudes) {
  const int n = static_cast<int>(amplitudes.rows());
  const int m = static_cast<int>(amplitudes.cols());
  RVec flat(n * m);
  for (int k = 0; k < m; ++k) {
    flat.segment(k * n, n) = amplitudes.col(k);
  }
  return flat;
}

RMat unflatten_pulse(const RVec& flat, int steps, int controls) {
  if (flat.size() != static_cast<Eigen::Index>(steps) * controls) {
    throw std::invalid_argument("unflatten_pulse: size mismatch");
  }
  RMat amp(steps, controls);
  for (int k = 0; k < controls; ++k) {
    amp.col(k) = flat.segment(k * steps, steps);
  }
  return amp;
}

int BilinearSystem::dim_sub() const {
  int r = 0;
  for (int i = 0; i < projector.rows(); ++i) {
    if (std::abs(projector(i, i).real() - 1.0) < 0.5) ++r;
  }
  return r;
}

void BilinearSystem::validate() const {
  const int d = dim();
  if (h0.cols() != d || projector.rows() != d || projector.cols() != d ||
      target.rows() != d || target.cols() != d) {
    throw std::invalid_argument("BilinearSystem: dimension mismatch");
  }
  for (const auto& hk : controls) {
    if (hk.rows() != d || hk.cols() != d) {
      throw std::invalid_argument("BilinearSystem: control dimension mismatch");
    }
  }
  if (initial.rows() != 0 && (initial.rows() != d || initial.cols() != d)) {
    throw std::invalid_argument("BilinearSystem: initial dimension mismatch");
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const cxd p = projector(i, j);
      const double want = (i == j) ? std::round(p.real()) : 0.0;
      if (std::abs(p - cxd(want, 0.0)) > 1e-12 ||
          (i == j && want != 0.0 && want != 1.0)) {
        throw std::invalid_argument(
            "BilinearSystem: projector must be diagonal 0/1");
      }
    }
  }
  if (dim_sub() == 0) {
    throw std::invalid_argument("BilinearSystem: projector has rank zero");
  }
  // the target must map the subspace into itself: (1 - P) V P = 0
  const CMat leak = (CMat::Identity(d, d) - projector) * target * projector;
  if (max_abs(leak) > 1e-10) {
    throw std::invalid_argument(
        "BilinearSystem: target does not preserve the projected subspace");
  }
}

std::uint64_t pulse_content_hash(const ControlPulse& pulse) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a 64-bit offset basis
  const std::int64_t n = pulse.steps(), m = pulse.controls();
  fnv_mix(h, &n, sizeof(n));
  fnv_mix(h, &m, sizeof(m));
  fnv_mix(h, &pulse.dt, sizeof(pulse.dt));
  fnv_mix(h, pulse.amplitudes.data(),
          sizeof(double) * static_cast<std::size_t>(pulse.amplitudes.size()));
  for (const auto& bd : pulse.bounds) {
    fnv_mix(h, &bd.first, sizeof(double));
    fnv_mix(h, &bd.second, sizeof(double));
  }
  return h;
}

PropagationCache build_cache(const BilinearSystem& sys,
                             const ControlPulse& pulse,
                             bool with_derivatives) {
  sys.validate();
  const int n = pulse.steps();
  const int m = pulse.controls();
  if (n < 1) {
    throw std::invalid_argument("build_cache: pulse must have at least 1 step");
  }
  if (m != static_cast<int>(sys.controls.size())) {
    throw std::invalid_argument(
        "build_cache: pulse/system control count mismatch");
  }
  if (!all_finite(pulse.amplitudes)) {
    throw std::invalid_argument("build_cache: non-finite pulse amplitudes");
  }
  const int d = sys.dim();

  PropagationCache cache;
  cache.dt = pulse.dt;
  cache.with_derivatives = with_derivatives;
  cache.pulse_hash = pulse_content_hash(pulse);
  cache.eigensystems.reserve(n);
  cache.u.reserve(n);

  for (int j = 0; j < n; ++j) {
    CMat h = sys.h0;
    for (int k = 0; k < m; ++k) {
      h += pulse.amplitudes(j, k) * sys.controls[k];
    }
    cache.eigensystems.push_back(eig_hermitian(h, pulse.dt));
    cache.u.push_back(step_propagator(cache.eigensystems.back()));
  }

  if (with_derivatives) {
    cache.first.reserve(n);
    cache.du.resize(n);
    for (int j = 0; j < n; ++j) {
      cache.first.push_back(first_exchange(cache.eigensystems[j]));
      cache.du[j].resize(m);
      for (int k = 0; k < m; ++k) {
        cache.du[j][k] = step_first_derivative(cache.eigensystems[j],
                                               cache.first[j], sys.controls[k]);
      }
    }
  }

  cache.right.resize(n + 1);
  cache.right[0] =
      sys.initial.rows() == d ? sys.initial : CMat::Identity(d, d);
  for (int j = 0; j < n; ++j) {
    cache.right[j + 1] = mprod(cache.u[j], cache.right[j]);
  }
  cache.left.resize(n + 1);
  cache.left[n] = CMat::Identity(d, d);
  for (int j = n - 1; j >= 0; --j) {
    cache.left[j] = mprod(cache.left[j + 1], cache.u[j]);
  }
  return cache;
}

double infidelity(const PropagationCache& cache, const BilinearSystem& sys) {
  const int dim_sub = sys.dim_sub();
  const cxd t = trace_product(cache.right[cache.steps()], overlap_kernel(sys));
  const double f =
      std::norm(t) / (static_cast<double>(dim_sub) * dim_sub);
  return std::min(std::max(1.0 - f, 0.0), 1.0);
}

RVec gradient(const PropagationCache& cache, const BilinearSystem& sys) {
  if (!cache.with_derivatives) {
    throw std::logic_error("gradient: cache was built without derivatives");
  }
  const int n = cache.steps();
  const int m = static_cast<int>(sys.controls.size());
  const int dim_sub = sys.dim_sub();
  const CMat x = overlap_kernel(sys);
  const cxd t = trace_product(cache.right[n], x);
  const double scale = -2.0 / (static_cast<double>(dim_sub) * dim_sub);

  RVec grad(n * m);
  for (int j = 0; j < n; ++j) {
    // t_c(j,k) = Tr[dU_j * right[j] x left[j+1]] by cyclic permutation
    const CMat z = mprod(mprod(cache.right[j], x), cache.left[j + 1]);
    for (int k = 0; k < m; ++k) {
      const cxd tc = trace_product(cache.du[j][k], z);
      grad(k * n + j) = scale * (std::conj(t) * tc).real();
    }
  }
  return grad;
}

RMat hessian(const PropagationCache& cache, const BilinearSystem& sys) {
  SameStepFn same_step = [&cache, &sys](int j, int k, int kp) {
    const SecondExchange s(cache.eigensystems[j], cache.first[j]);
    return step_second_derivative(cache.eigensystems[j], s, sys.controls[k],
                                  sys.controls[kp]);
  };
  return hessian_impl(cache, sys, same_step);
}

GradHessResult evaluate(const BilinearSystem& sys, const ControlPulse& pulse,
                        int order) {
  const PropagationCache cache = build_cache(sys, pulse, order >= 1);
  GradHessResult res;
  res.j_value = infidelity(cache, sys);
  if (order >= 1) res.grad = gradient(cache, sys);
  if (order >= 2) {
    res.hess = hessian(cache, sys);
    res.has_hess = true;
  }
  return res;
}

GradHessResult evaluate_taylor(const BilinearSystem& sys,
                               const ControlPulse& pulse, int order,
                               int taylor_order) {
  sys.validate();
  const int n = pulse.steps();
  const int m = pulse.controls();
  if (m != static_cast<int>(sys.controls.size())) {
    throw std::invalid_argument(
        "evaluate_taylor: pulse/system control count mismatch");
  }
  const int d = sys.dim();

  PropagationCache cache;
  cache.dt = pulse.dt;
  cache.with_derivatives = order >= 1;
  cache.pulse_hash = pulse_content_hash(pulse);
  std::vector<std::vector<CMat>> d2(n);
  cache.du.resize(n);
  for (int j = 0; j < n; ++j) {
    TaylorStepDerivatives td = taylor_step_derivatives(
        sys.h0, sys.controls, pulse.amplitudes.row(j).transpose(), pulse.dt,
        taylor_order);
    cache.u.push_back(std::move(td.u));
    if (order >= 1) cache.du[j] = std::move(td.du);
    if (order >= 2) d2[j] = std::move(td.d2u);
  }
  cache.right.resize(n + 1);
  cache.right[0] =
      sys.initial.rows() == d ? sys.initial : CMat::Identity(d, d);
  for (int j = 0; j < n; ++j) {
    cache.right[j + 1] = mprod(cache.u[j], cache.right[j]);
  }
  cache.left.resize(n + 1);
  cache.left[n] = CMat::Identity(d, d);
  for (int j = n - 1; j >= 0; --j) {
    cache.left[j] = mprod(cache.left[j + 1], cache.u[j]);
  }

  GradHessResult res;
  res.j_value = infidelity(cache, sys);
  if (order >= 1) res.grad = gradient(cache, sys);
  if (order >= 2) {
    SameStepFn same_step = [&d2, m](int j, int k, int kp) {
      return d2[j][static_cast<std::size_t>(kp) * m + k];
    };
    res.hess = hessian_impl(cache, sys, same_step);
    res.has_hess = true;
  }
  return res;
}

GradHessResult state_transfer_objective(const BilinearSystem& sys,
                                        const std::vector<CVec>& states,
                                        const ControlPulse& pulse, int order) {
  sys.validate();
  const int n_states = static_cast<int>(states.size());
  if (n_states == 0) {
    throw std::invalid_argument("state_transfer_objective: no states");
  }
  for (int a = 0; a < n_states; ++a) {
    for (int b = a; b < n_states; ++b) {
      const cxd ip = states[a].dot(states[b]);  // conjugates the left factor
      const cxd want = (a == b) ? cxd(1.0, 0.0) : cxd(0.0, 0.0);
      if (std::abs(ip - want) > 1e-10) {
        throw std::invalid_argument(
            "state_transfer_objective: states are not orthonormal");
      }
    }
  }

  const PropagationCache cache = build_cache(sys, pulse, order >= 1);
  const int n = cache.steps();
  const int m = pulse.controls();
  const int d = sys.dim();
  const double denom = static_cast<double>(n_states);

  // right states r[k][j] = right[j] |psi_k>, left rows l[k][j] built from
  // <psi_k| V^dagger left[j]; everything below is matrix-vector work
  std::vector<std::vector<CVec>> r(n_states), l(n_states);
  cxd t(0.0, 0.0);
  for (int s = 0; s < n_states; ++s) {
    r[s].resize(n + 1);
    r[s][0] = (sys.initial.rows() == d ? CVec(sys.initial * states[s])
                                       : states[s]);
    for (int j = 0; j < n; ++j) {
      r[s][j + 1] = cache.u[j] * r[s][j];
    }
    // l is stored as a column vector holding the conjugate-transposed row:
    // l[s][j]^H = <psi_s| V^dagger left[j]  <=>  l[s][j] = left[j]^H V |psi_s>
    l[s].resize(n + 1);
    l[s][n] = sys.target * states[s];
    for (int j = n - 1; j >= 0; --j) {
      l[s][j] = cache.u[j].adjoint() * l[s][j + 1];
    }
    t += l[s][0].dot(r[s][0]);  // <psi V^dagger U_tot psi> with U_tot = left[0] right[0]
  }

  GradHessResult res;
  const double f = std::norm(t) / (denom * denom);
  res.j_value = std::min(std::max(1.0 - f, 0.0), 1.0);
  if (order < 1) return res;

  const double scale = -2.0 / (denom * denom);
  // t_c(j,k) = sum_s <l[s][j+1]| dU_j |r[s][j]>
  std::vector<std::vector<cxd>> tc(n, std::vector<cxd>(m));
  RVec grad(n * m);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < m; ++k) {
      cxd acc(0.0, 0.0);
      for (int s = 0; s < n_states; ++s) {
        acc += l[s][j + 1].dot(cache.du[j][k] * r[s][j]);
      }
      tc[j][k] = acc;
      grad(k * n + j) = scale * (std::conj(t) * acc).real();
    }
  }
  res.grad = grad;
  if (order < 2) return res;

  RMat hess(n * m, n * m);
  // v[s][i*m+k'] carries U_{j-1}...U_{i+1} dU_i r[s][i], advanced with j
  std::vector<std::vector<CVec>> v(n_states,
                                   std::vector<CVec>(static_cast<std::size_t>(n) * m));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      for (int k = 0; k < m; ++k) {
        for (int kp = 0; kp < m; ++kp) {
          cxd t_pq(0.0, 0.0);
          for (int s = 0; s < n_states; ++s) {
            t_pq += l[s][j + 1].dot(cache.du[j][k] * v[s][i * m + kp]);
          }
          const double val =
              scale *
              (std::conj(t) * t_pq + std::conj(tc[i][kp]) * tc[j][k]).real();
          hess(k * n + j, kp * n + i) = val;
          hess(kp * n + i, k * n + j) = val;
        }
      }
    }
    // same-step block via the exact second step derivative
    const SecondExchange sx(cache.eigensystems[j], cache.first[j]);
    for (int k = 0; k < m; ++k) {
      for (int kp = 0; kp <= k; ++kp) {
        const CMat d2u = step_second_derivative(cache.eigensystems[j], sx,
                                                sys.controls[k],
                                                sys.controls[kp]);
        cxd t_pq(0.0, 0.0);
        for (int s = 0; s < n_states; ++s) {
          t_pq += l[s][j + 1].dot(d2u * r[s][j]);
        }
        const double val =
            scale *
            (std::conj(t) * t_pq + std::conj(tc[j][kp]) * tc[j][k]).real();
        hess(k * n + j, kp * n + j) = val;
        hess(kp * n + j, k * n + j) = val;
      }
    }
    // advance stored derivative states to the next j, then add step j's own
    for (int s = 0; s < n_states; ++s) {
      for (int i = 0; i < j; ++i) {
        for (int kp = 0; kp < m; ++kp) {
          v[s][i * m + kp] = cache.u[j] * v[s][i * m + kp];
        }
      }
      for (int kp = 0; kp < m; ++kp) {
        v[s][j * m + kp] = cache.du[j][kp] * r[s][j];
      }
    }
  }
  res.hess = hess;
  res.has_hess = true;
  return res;
}

}  // namespace qoc
