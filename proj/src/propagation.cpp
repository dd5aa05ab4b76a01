#include "qoc/propagation.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace qoc {

namespace {

thread_local std::uint64_t g_matmul_count = 0;

// exp(-i E dt) for one eigenvalue
inline cxd phase_factor(double e, double dt) {
  return std::exp(cxd(0.0, -e * dt));
}

// sin(x)/x, series below the point where the direct quotient loses digits
inline double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0);
  }
  return std::sin(x) / x;
}

// Spread threshold (units: phase, |E_max - E_min| * dt) below which the
// second exchange integral switches to its centered power series. Both
// branches are accurate to ~1e-14 * dt^2 at the crossover: the series
// converges geometrically in the spread, while the divided difference's
// subtraction only loses |eps / spread| = ~4e-15 of the dt^2 scale.
constexpr double kSecondSeriesSpread = 0.05;

}  // namespace

std::uint64_t matmul_count() { return g_matmul_count; }

void reset_matmul_count() { g_matmul_count = 0; }

CMat mprod(const CMat& a, const CMat& b) {
  ++g_matmul_count;
  return a * b;
}

double max_abs(const CMat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

bool all_finite(const CMat& m) { return m.allFinite(); }

bool all_finite(const RMat& m) { return m.allFinite(); }

StepEigensystem eig_hermitian(const CMat& h, double dt) {
  if (h.rows() != h.cols()) {
    throw std::invalid_argument("eig_hermitian: matrix must be square");
  }
  if (!h.allFinite()) {
    throw std::invalid_argument("eig_hermitian: non-finite entries");
  }
  const CMat sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eig_hermitian: eigensolver failed");
  }
  StepEigensystem es;
  es.energies = solver.eigenvalues();  // ascending
  es.basis = solver.eigenvectors();
  es.dt = dt;
  return es;
}

CMat step_propagator(const StepEigensystem& es) {
  const int dim = static_cast<int>(es.energies.size());
  CVec phases(dim);
  for (int n = 0; n < dim; ++n) {
    phases(n) = phase_factor(es.energies(n), es.dt);
  }
  // R * diag(phases) is a column scaling, only the closing product is a GEMM
  return mprod(es.basis * phases.asDiagonal(), es.basis.adjoint());
}

CMat first_exchange(const StepEigensystem& es, double degeneracy_tol) {
  const int dim = static_cast<int>(es.energies.size());
  const double dt = es.dt;
  if (dt <= 0.0) {
    throw std::invalid_argument("first_exchange: dt must be positive");
  }
  // The divided difference (e^{-iE_m dt} - e^{-iE_n dt}) / (E_m - E_n) is
  // evaluated in its midpoint form
  //   -i dt e^{-i dt (E_m + E_n)/2} sinc((E_m - E_n) dt / 2),
  // the same value with the catastrophic subtraction removed, so entries
  // stay accurate to machine precision through arbitrarily small gaps.
  // Pairs inside the degeneracy tolerance take the limit sinc -> 1.
  CMat out(dim, dim);
  for (int m = 0; m < dim; ++m) {
    const double em = es.energies(m);
    out(m, m) = cxd(0.0, -dt) * phase_factor(em, dt);
    for (int n = m + 1; n < dim; ++n) {
      const double en = es.energies(n);
      const double half_gap = 0.5 * (em - en) * dt;
      const double s =
          std::abs(em - en) * dt <= degeneracy_tol ? 1.0 : sinc(half_gap);
      const cxd val =
          cxd(0.0, -dt) * phase_factor(0.5 * (em + en), dt) * s;
      out(m, n) = val;
      out(n, m) = val;  // mirror: exact symmetry by construction
    }
  }
  return out;
}

SecondExchange::SecondExchange(const StepEigensystem& es, const CMat& first,
                               double degeneracy_tol)
    : energies_(es.energies),
      first_(first),
      dt_(es.dt),
      tol_(degeneracy_tol) {
  if (first.rows() != energies_.size() || first.cols() != energies_.size()) {
    throw std::invalid_argument(
        "SecondExchange: exchange matrix dimension mismatch");
  }
}

cxd SecondExchange::operator()(int n1, int n2, int n3) const {
  // Canonicalize the triple by (energy, index) so that every permutation of
  // the same indices takes the identical arithmetic path (bit-exact
  // permutation invariance).
  std::array<int, 3> idx = {n1, n2, n3};
  std::sort(idx.begin(), idx.end(), [this](int a, int b) {
    const double ea = energies_(a), eb = energies_(b);
    return ea < eb || (ea == eb && a < b);
  });
  const int a = idx[0], b = idx[1], c = idx[2];
  const double ea = energies_(a), eb = energies_(b), ec = energies_(c);

  // Narrow triples (every pairwise gap at most the spread) are summed as a
  // centered series; that branch covers the printed degenerate and
  // two-equal limits exactly. Wide triples recurse on the stored first
  // integrals: f[E_a, E_b, E_c] = (I(b,c) - I(a,b)) / (E_c - E_a), where the
  // denominator is guaranteed to exceed the series threshold.
  const double spread = (ec - ea) * dt_;
  if (spread <= std::max(tol_, kSecondSeriesSpread)) {
    return centered_series(ea, eb, ec);
  }
  return (first_(b, c) - first_(a, b)) / cxd(ec - ea, 0.0);
}

cxd SecondExchange::centered_series(double e1, double e2, double e3) const {
  // Second divided difference of f(E) = exp(-i E dt) expanded around the
  // centroid. Divided differences of monomials are the complete homogeneous
  // symmetric polynomials h, so with d_i = E_i - Ebar:
  //   f[E1, E2, E3] = e^{-i dt Ebar} sum_{l >= 2} (-i dt)^l / l! h_{l-2}(d)
  // The series converges geometrically once |d_i| dt is small; with the
  // spread capped at kSecondSeriesSpread a few terms reach machine accuracy.
  const double ebar = (e1 + e2 + e3) / 3.0;
  const double d1 = e1 - ebar, d2 = e2 - ebar, d3 = e3 - ebar;
  cxd coeff(-0.5 * dt_ * dt_, 0.0);  // (-i dt)^2 / 2!
  cxd sum = coeff;                   // l = 2 term: h_0 = 1
  double h2 = 1.0;                   // h_m(d2, d3)
  double h3 = 1.0;                   // h_m(d1, d2, d3)
  double d3pow = 1.0;
  for (int l = 3; l <= 40; ++l) {
    coeff *= cxd(0.0, -dt_) / static_cast<double>(l);
    d3pow *= d3;
    h2 = d2 * h2 + d3pow;
    h3 = d1 * h3 + h2;
    const cxd term = coeff * h3;
    sum += term;
    if (std::abs(term) <= 1e-20 * std::abs(sum)) break;
  }
  return std::exp(cxd(0.0, -dt_ * ebar)) * sum;
}

CMat step_first_derivative(const StepEigensystem& es, const CMat& first,
                           const CMat& h_k) {
  if (h_k.rows() != es.basis.rows() || h_k.cols() != es.basis.cols()) {
    throw std::invalid_argument("step_first_derivative: dimension mismatch");
  }
  const CMat hk_eig = mprod(mprod(es.basis.adjoint(), h_k), es.basis);
  return mprod(mprod(es.basis, hk_eig.cwiseProduct(first)),
               es.basis.adjoint());
}

CMat step_second_derivative(const StepEigensystem& es, const SecondExchange& s,
                            const CMat& h_k, const CMat& h_kp) {
  const int dim = static_cast<int>(es.energies.size());
  if (h_k.rows() != dim || h_kp.rows() != dim) {
    throw std::invalid_argument("step_second_derivative: dimension mismatch");
  }
  const CMat a = mprod(mprod(es.basis.adjoint(), h_k), es.basis);
  const CMat ap = mprod(mprod(es.basis.adjoint(), h_kp), es.basis);
  CMat g(dim, dim);
  for (int m = 0; m < dim; ++m) {
    for (int n = 0; n < dim; ++n) {
      cxd acc(0.0, 0.0);
      for (int p = 0; p < dim; ++p) {
        acc += (ap(m, p) * a(p, n) + a(m, p) * ap(p, n)) * s(n, p, m);
      }
      g(m, n) = acc;
    }
  }
  ++g_matmul_count;  // the weighted contraction above is one dim^3 kernel
  return mprod(mprod(es.basis, g), es.basis.adjoint());
}

TaylorStepDerivatives taylor_step_derivatives(const CMat& h0,
                                              const std::vector<CMat>& h_k,
                                              const RVec& c_row, double dt,
                                              int order) {
  if (order < 1) {
    throw std::invalid_argument("taylor_step_derivatives: order must be >= 1");
  }
  const int dim = static_cast<int>(h0.rows());
  const int n_ctrl = static_cast<int>(h_k.size());
  if (c_row.size() != n_ctrl) {
    throw std::invalid_argument(
        "taylor_step_derivatives: control count mismatch");
  }
  CMat h = h0;
  for (int k = 0; k < n_ctrl; ++k) {
    h += c_row(k) * h_k[k];
  }
  const cxd mi_dt(0.0, -dt);
  const CMat a = mi_dt * h;

  // cached powers a^0 .. a^order and inverse factorials
  std::vector<CMat> pw(order + 1);
  pw[0] = CMat::Identity(dim, dim);
  for (int l = 1; l <= order; ++l) {
    pw[l] = mprod(pw[l - 1], a);
  }
  std::vector<double> inv_fact(order + 1);
  inv_fact[0] = 1.0;
  for (int l = 1; l <= order; ++l) {
    inv_fact[l] = inv_fact[l - 1] / static_cast<double>(l);
  }

  TaylorStepDerivatives out;
  out.u = CMat::Zero(dim, dim);
  for (int l = 0; l <= order; ++l) {
    out.u += inv_fact[l] * pw[l];
  }

  // q[k][i] = a^i * (-i dt H_k); every word of the differentiated series is a
  // product of cached powers separated by control insertions
  std::vector<std::vector<CMat>> q(n_ctrl);
  for (int k = 0; k < n_ctrl; ++k) {
    const CMat bk = mi_dt * h_k[k];
    q[k].resize(order);
    for (int i = 0; i + 1 <= order; ++i) {
      q[k][i] = mprod(pw[i], bk);
    }
  }

  out.du.assign(n_ctrl, CMat::Zero(dim, dim));
  for (int k = 0; k < n_ctrl; ++k) {
    for (int l = 1; l <= order; ++l) {
      for (int i = 0; i <= l - 1; ++i) {
        out.du[k] += inv_fact[l] * mprod(q[k][i], pw[l - 1 - i]);
      }
    }
  }

  out.d2u.assign(static_cast<std::size_t>(n_ctrl) * n_ctrl,
                 CMat::Zero(dim, dim));
  for (int kp = 0; kp < n_ctrl; ++kp) {
    for (int k = kp; k < n_ctrl; ++k) {
      CMat acc = CMat::Zero(dim, dim);
      for (int l = 2; l <= order; ++l) {
        for (int i = 0; i <= l - 2; ++i) {
          for (int j = 0; i + j <= l - 2; ++j) {
            const int tail = l - 2 - i - j;
            acc += inv_fact[l] * (mprod(mprod(q[kp][i], q[k][j]), pw[tail]) +
                                  mprod(mprod(q[k][i], q[kp][j]), pw[tail]));
          }
        }
      }
      out.d2u[static_cast<std::size_t>(kp) * n_ctrl + k] = acc;
      out.d2u[static_cast<std::size_t>(k) * n_ctrl + kp] = acc;
    }
  }
  return out;
}

}  // namespace qoc
