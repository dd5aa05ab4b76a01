// Propagation-layer tests: eigensystems, step propagators, the exchange
// integrals I(m,n) and S(n1,n2,n3), per-step derivatives of the matrix
// exponential, and the truncated-series backend.
//
// The exchange integrals are checked against adaptive quadrature of their
// defining integrals, evaluated here from scratch:
//   I(m,n)       = -i dt Int_0^1 exp(-i dt [E_m a + E_n (1-a)]) da
//   S(n1,n2,n3)  = -dt^2 Int_0^1 Int_0^a
//                      exp(-i dt [E_1 (1-a) + E_2 (a-b) + E_3 b]) db da
// (the Hermite-Genocchi simplex form of the divided differences of
// f(E) = exp(-i E dt)). Derivatives of the exponential are checked against
// central finite differences of the propagator itself.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "qoc/linalg.hpp"
#include "qoc/propagation.hpp"

using qoc::CMat;
using qoc::cxd;
using qoc::RVec;
using qoc::SecondExchange;
using qoc::StepEigensystem;

namespace {

const cxd kI(0.0, 1.0);

CMat pauli_x() {
  CMat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMat pauli_z() {
  CMat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

CMat random_hermitian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = cxd(n(rng), n(rng));
  return 0.5 * (a + a.adjoint());
}

// Adaptive Simpson on a complex integrand (real and imaginary parts share
// one refinement so phase cancellation is resolved consistently).
cxd simpson_recurse(const std::function<cxd(double)>& f, double a, double b,
                    cxd fa, cxd fm, cxd fb, cxd whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const cxd flm = f(0.5 * (a + m));
  const cxd frm = f(0.5 * (m + b));
  const cxd left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const cxd right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const cxd sum = left + right;
  if (depth <= 0 || std::abs(sum - whole) <= 15.0 * tol)
    return sum + (sum - whole) / 15.0;
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

cxd integrate(const std::function<cxd(double)>& f, double a, double b,
              double tol = 1e-13) {
  if (a == b) return cxd(0.0, 0.0);
  const cxd fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const cxd whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 48);
}

cxd first_exchange_quadrature(double em, double en, double dt) {
  auto f = [&](double a) {
    return std::exp(-kI * dt * (em * a + en * (1.0 - a)));
  };
  return -kI * dt * integrate(f, 0.0, 1.0);
}

cxd second_exchange_quadrature(double e1, double e2, double e3, double dt) {
  auto outer = [&](double a) {
    auto inner = [&](double b) {
      return std::exp(-kI * dt * (e1 * (1.0 - a) + e2 * (a - b) + e3 * b));
    };
    return integrate(inner, 0.0, a, 1e-14);
  };
  return -dt * dt * integrate(outer, 0.0, 1.0, 1e-13);
}

// Eigensystem with prescribed energies in a random unitary basis, so the
// exchange integrals see realistic (non-diagonal) surroundings.
StepEigensystem synthetic_eigensystem(const RVec& energies, double dt,
                                      std::mt19937_64& rng) {
  const int dim = static_cast<int>(energies.size());
  const CMat h = random_hermitian(dim, rng);
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  CMat basis = es.eigenvectors();
  StepEigensystem out;
  out.energies = energies;
  out.basis = basis;
  out.dt = dt;
  return out;
}

CMat build_hamiltonian(const CMat& h0, const std::vector<CMat>& hk,
                       const RVec& c) {
  CMat h = h0;
  for (int k = 0; k < static_cast<int>(hk.size()); ++k) h += c[k] * hk[k];
  return h;
}

// Central finite difference of the exact propagator along control k.
CMat fd_step_derivative(const CMat& h0, const std::vector<CMat>& hk,
                        const RVec& c, double dt, int k, double h) {
  RVec cp = c, cm = c;
  cp[k] += h;
  cm[k] -= h;
  const CMat up =
      qoc::step_propagator(qoc::eig_hermitian(build_hamiltonian(h0, hk, cp), dt));
  const CMat um =
      qoc::step_propagator(qoc::eig_hermitian(build_hamiltonian(h0, hk, cm), dt));
  return (up - um) / (2.0 * h);
}

CMat fd_second_derivative(const CMat& h0, const std::vector<CMat>& hk,
                          const RVec& c, double dt, int k, int kp, double h) {
  auto first = [&](const RVec& cc) {
    const StepEigensystem es = qoc::eig_hermitian(build_hamiltonian(h0, hk, cc), dt);
    return qoc::step_first_derivative(es, qoc::first_exchange(es), hk[k]);
  };
  RVec cp = c, cm = c;
  cp[kp] += h;
  cm[kp] -= h;
  return (first(cp) - first(cm)) / (2.0 * h);
}

double rel_err(const CMat& got, const CMat& want) {
  const double scale = std::max(qoc::max_abs(want), 1e-12);
  return qoc::max_abs(got - want) / scale;
}

}  // namespace

TEST_CASE("eig_hermitian: zero and diagonal inputs") {
  const StepEigensystem zero = qoc::eig_hermitian(CMat::Zero(2, 2), 1.0);
  CHECK(std::abs(zero.energies[0]) <= 1e-15);
  CHECK(std::abs(zero.energies[1]) <= 1e-15);
  CHECK(qoc::max_abs(zero.basis - CMat::Identity(2, 2)) <= 1e-12);

  const StepEigensystem sz = qoc::eig_hermitian(pauli_z(), 1.0);
  CHECK(sz.energies[0] == doctest::Approx(-1.0));
  CHECK(sz.energies[1] == doctest::Approx(1.0));
  // ascending order puts |1> (energy -1) first; columns are basis vectors
  // up to phase
  CHECK(std::abs(sz.basis(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(sz.basis(0, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(sz.basis(0, 0)) <= 1e-14);
  CHECK(std::abs(sz.basis(1, 1)) <= 1e-14);
}

TEST_CASE("eig_hermitian: reconstruction and unitarity on random input") {
  std::mt19937_64 rng(7001);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 9;
    const CMat h = random_hermitian(dim, rng);
    const StepEigensystem es = qoc::eig_hermitian(h, 0.7);
    for (int i = 1; i < dim; ++i) CHECK(es.energies[i] >= es.energies[i - 1]);
    const CMat recon =
        es.basis * es.energies.asDiagonal().toDenseMatrix().cast<cxd>() *
        es.basis.adjoint();
    CHECK(qoc::max_abs(recon - h) <= 1e-10 * qoc::max_abs(h));
    CHECK(qoc::max_abs(es.basis * es.basis.adjoint() - CMat::Identity(dim, dim)) <=
          1e-12 * dim);
  }
}

TEST_CASE("eig_hermitian: non-finite entries rejected") {
  CMat h = CMat::Zero(2, 2);
  h(0, 1) = cxd(std::numeric_limits<double>::quiet_NaN(), 0.0);
  h(1, 0) = h(0, 1);
  CHECK_THROWS(qoc::eig_hermitian(h, 1.0));
}

TEST_CASE("step_propagator: closed forms and unitarity") {
  const StepEigensystem zero = qoc::eig_hermitian(CMat::Zero(3, 3), 2.5);
  CHECK(qoc::max_abs(qoc::step_propagator(zero) - CMat::Identity(3, 3)) <= 1e-14);

  // exp(-i sigma_z pi) = diag(e^{-i pi}, e^{i pi}) = -identity
  const StepEigensystem sz = qoc::eig_hermitian(pauli_z(), qoc::kPi);
  CHECK(qoc::max_abs(qoc::step_propagator(sz) + CMat::Identity(2, 2)) <= 1e-12);

  std::mt19937_64 rng(7002);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 5;
    const StepEigensystem es = qoc::eig_hermitian(random_hermitian(dim, rng), 0.9);
    const CMat u = qoc::step_propagator(es);
    CHECK(qoc::max_abs(u * u.adjoint() - CMat::Identity(dim, dim)) <= 1e-12 * dim);
  }
}

TEST_CASE("first_exchange: closed-form values") {
  std::mt19937_64 rng(7003);

  // degenerate pair at E = 0, dt = 1 -> -i
  RVec deg(2);
  deg << 0.0, 0.0;
  const StepEigensystem es0 = synthetic_eigensystem(deg, 1.0, rng);
  const CMat i0 = qoc::first_exchange(es0);
  CHECK(std::abs(i0(0, 1) - cxd(0.0, -1.0)) <= 1e-14);

  // E = (-1, 1), dt = pi -> (e^{-i pi} - e^{i pi}) / (-2) = 0
  RVec pm(2);
  pm << -1.0, 1.0;
  const StepEigensystem es1 = synthetic_eigensystem(pm, qoc::kPi, rng);
  const CMat i1 = qoc::first_exchange(es1);
  CHECK(std::abs(i1(0, 1)) <= 1e-12);
}

TEST_CASE("first_exchange: quadrature oracle, symmetry, magnitude bound") {
  std::mt19937_64 rng(7004);
  std::uniform_real_distribution<double> e(-4.0, 4.0);
  for (double dt : {0.13, 1.0, 2.7}) {
    RVec energies(6);
    for (int i = 0; i < 4; ++i) energies[i] = e(rng);
    energies[4] = energies[0] + 3e-9;  // near-degenerate pair
    energies[5] = energies[1];         // exact tie
    std::sort(energies.data(), energies.data() + energies.size());
    const StepEigensystem es = synthetic_eigensystem(energies, dt, rng);
    const CMat im = qoc::first_exchange(es);
    for (int m = 0; m < 6; ++m) {
      for (int n = 0; n < 6; ++n) {
        CHECK(im(m, n) == im(n, m));  // mirrored construction: exact
        CHECK(std::abs(im(m, n)) <= dt * (1.0 + 1e-12));
        const cxd want = first_exchange_quadrature(energies[m], energies[n], dt);
        CHECK(std::abs(im(m, n) - want) <= 1e-9);
      }
    }
  }
}

TEST_CASE("first_exchange: continuity across the degeneracy threshold") {
  std::mt19937_64 rng(7005);
  const double en = 0.37;
  for (double gap : {1e-9, 2e-8, 1e-7}) {
    RVec energies(2);
    energies << en, en + gap;
    const StepEigensystem es = synthetic_eigensystem(energies, 1.0, rng);
    const CMat im = qoc::first_exchange(es);
    const cxd limit = -kI * std::exp(-kI * en);
    CHECK(std::abs(im(0, 1) - limit) <= 1e-7);
  }
}

TEST_CASE("second_exchange: degenerate branches and permutation invariance") {
  std::mt19937_64 rng(7006);

  RVec deg(3);
  deg << 0.0, 0.0, 0.0;
  const StepEigensystem es0 = synthetic_eigensystem(deg, 1.0, rng);
  const SecondExchange s0(es0, qoc::first_exchange(es0));
  CHECK(std::abs(s0(0, 1, 2) - cxd(-0.5, 0.0)) <= 1e-14);

  RVec distinct(3);
  distinct << 0.0, 1.0, 2.0;
  const StepEigensystem es1 = synthetic_eigensystem(distinct, 1.0, rng);
  const SecondExchange s1(es1, qoc::first_exchange(es1));
  const cxd ref = s1(0, 1, 2);
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                           {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms) CHECK(s1(p[0], p[1], p[2]) == ref);
}

TEST_CASE("second_exchange: quadrature oracle across branch structure") {
  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> e(-3.0, 3.0);

  // random energies: mostly distinct triples with one tie and one near-tie
  for (double dt : {0.1, 1.0}) {
    RVec energies(5);
    energies << e(rng), e(rng), e(rng), 0.0, 0.0;
    energies[3] = energies[0];         // exact tie
    energies[4] = energies[1] + 2e-9;  // below phase-gap tolerance at dt <= 1
    const StepEigensystem es = synthetic_eigensystem(energies, dt, rng);
    const SecondExchange s(es, qoc::first_exchange(es));
    for (int a = 0; a < 5; ++a)
      for (int b = a; b < 5; ++b)
        for (int c = b; c < 5; ++c) {
          const cxd want = second_exchange_quadrature(energies[a], energies[b],
                                                      energies[c], dt);
          CHECK(std::abs(s(a, b, c) - want) <= 1e-9);
        }
  }

  // the spec's printed two-equal example: energies (0, 1), dt = 0.1
  RVec two(2);
  two << 0.0, 1.0;
  const StepEigensystem es2 = synthetic_eigensystem(two, 0.1, rng);
  const SecondExchange s2(es2, qoc::first_exchange(es2));
  CHECK(std::abs(s2(0, 0, 1) - second_exchange_quadrature(0.0, 0.0, 1.0, 0.1)) <=
        1e-9);
}

TEST_CASE("second_exchange: continuity near two- and three-way degeneracy") {
  std::mt19937_64 rng(7008);
  const double dt = 1.0;
  const double base = -0.8;

  // two-way: triple (base, base + gap, 1.1) approaching the two-equal branch
  for (double gap : {1e-9, 5e-8}) {
    RVec energies(3);
    energies << base, base + gap, 1.1;
    const StepEigensystem es = synthetic_eigensystem(energies, dt, rng);
    const SecondExchange s(es, qoc::first_exchange(es));
    RVec limit_e(3);
    limit_e << base, base, 1.1;
    const StepEigensystem esl = synthetic_eigensystem(limit_e, dt, rng);
    const SecondExchange sl(esl, qoc::first_exchange(esl));
    CHECK(std::abs(s(0, 1, 2) - sl(0, 1, 2)) <= 1e-7 * dt * dt);
  }

  // three-way: all gaps tiny -> fully degenerate limit (-dt^2/2) e^{-i E dt}
  RVec tri(3);
  tri << base, base + 1e-9, base + 2e-9;
  const StepEigensystem es = synthetic_eigensystem(tri, dt, rng);
  const SecondExchange s(es, qoc::first_exchange(es));
  const cxd limit = -0.5 * dt * dt * std::exp(-kI * base * dt);
  CHECK(std::abs(s(0, 1, 2) - limit) <= 1e-7 * dt * dt);
}

TEST_CASE("step_first_derivative: closed forms") {
  std::mt19937_64 rng(7009);

  // zero control direction -> zero derivative
  const StepEigensystem es = qoc::eig_hermitian(random_hermitian(4, rng), 0.8);
  const CMat zero = qoc::step_first_derivative(es, qoc::first_exchange(es),
                                               CMat::Zero(4, 4));
  CHECK(qoc::max_abs(zero) <= 1e-15);

  // derivative along a diagonal Hamiltonian itself: d/dc e^{-i c E dt} at
  // c = 1 has diagonal entries -i dt E_n e^{-i E_n dt}
  CMat hdiag = CMat::Zero(3, 3);
  hdiag(0, 0) = -0.5;
  hdiag(1, 1) = 0.3;
  hdiag(2, 2) = 1.7;
  const double dt = 0.6;
  const StepEigensystem esd = qoc::eig_hermitian(hdiag, dt);
  const CMat du =
      qoc::step_first_derivative(esd, qoc::first_exchange(esd), hdiag);
  for (int n = 0; n < 3; ++n) {
    const double en = std::real(hdiag(n, n));
    const cxd want = -kI * dt * en * std::exp(-kI * en * dt);
    CHECK(std::abs(du(n, n) - want) <= 1e-12);
  }
}

TEST_CASE("step_first_derivative: finite differences, two-level example") {
  const CMat h0 = pauli_x();
  const std::vector<CMat> hk = {pauli_z()};
  RVec c(1);
  c << 0.3;
  const double dt = 0.5;
  const StepEigensystem es = qoc::eig_hermitian(build_hamiltonian(h0, hk, c), dt);
  const CMat got = qoc::step_first_derivative(es, qoc::first_exchange(es), hk[0]);
  const CMat want = fd_step_derivative(h0, hk, c, dt, 0, 1e-5);
  CHECK(qoc::max_abs(got - want) <= 1e-8);
}

TEST_CASE("step derivatives: randomized finite-difference sweep") {
  std::mt19937_64 rng(7010);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int first_checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = (trial % 3 == 0) ? 2 : (trial % 3 == 1) ? 5 : 9;
    const int m = 1 + (trial % 2);
    const double dt = 0.3 + 0.5 * std::abs(u(rng));
    const CMat h0 = random_hermitian(dim, rng);
    std::vector<CMat> hk;
    for (int k = 0; k < m; ++k) hk.push_back(random_hermitian(dim, rng));
    RVec c(m);
    for (int k = 0; k < m; ++k) c[k] = u(rng);

    const StepEigensystem es = qoc::eig_hermitian(build_hamiltonian(h0, hk, c), dt);
    const CMat im = qoc::first_exchange(es);
    for (int k = 0; k < m; ++k) {
      const CMat got = qoc::step_first_derivative(es, im, hk[k]);
      const CMat want = fd_step_derivative(h0, hk, c, dt, k, 1e-5);
      CHECK(rel_err(got, want) <= 1e-6);
      ++first_checked;
    }
  }
  CHECK(first_checked >= 100);
}

TEST_CASE("step_second_derivative: finite differences and exact symmetry") {
  std::mt19937_64 rng(7011);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  // two-level closed case first: H = sigma_x + c sigma_z, k = k' = z
  {
    const CMat h0 = pauli_x();
    const std::vector<CMat> hk = {pauli_z()};
    RVec c(1);
    c << 0.3;
    const double dt = 0.5;
    const StepEigensystem es =
        qoc::eig_hermitian(build_hamiltonian(h0, hk, c), dt);
    const CMat im = qoc::first_exchange(es);
    const SecondExchange s(es, im);
    const CMat got = qoc::step_second_derivative(es, s, hk[0], hk[0]);
    const CMat want = fd_second_derivative(h0, hk, c, dt, 0, 0, 1e-5);
    CHECK(qoc::max_abs(got - want) <= 1e-6);
  }

  for (int trial = 0; trial < 20; ++trial) {
    const int dim = (trial % 2 == 0) ? 2 : 5;
    const double dt = 0.4 + 0.4 * std::abs(u(rng));
    const CMat h0 = random_hermitian(dim, rng);
    const std::vector<CMat> hk = {random_hermitian(dim, rng),
                                  random_hermitian(dim, rng)};
    RVec c(2);
    c << u(rng), u(rng);
    const StepEigensystem es = qoc::eig_hermitian(build_hamiltonian(h0, hk, c), dt);
    const CMat im = qoc::first_exchange(es);
    const SecondExchange s(es, im);
    for (int k = 0; k < 2; ++k)
      for (int kp = 0; kp < 2; ++kp) {
        const CMat got = qoc::step_second_derivative(es, s, hk[k], hk[kp]);
        const CMat want = fd_second_derivative(h0, hk, c, dt, k, kp, 1e-4);
        CHECK(rel_err(got, want) <= 1e-5);
        const CMat swapped = qoc::step_second_derivative(es, s, hk[kp], hk[k]);
        CHECK(qoc::max_abs(got - swapped) <= 1e-15);
      }
  }

  // zero direction annihilates the block
  const StepEigensystem es = qoc::eig_hermitian(random_hermitian(3, rng), 1.0);
  const CMat im = qoc::first_exchange(es);
  const SecondExchange s(es, im);
  CHECK(qoc::max_abs(qoc::step_second_derivative(es, s, CMat::Zero(3, 3),
                                                 random_hermitian(3, rng))) <=
        1e-15);
}

TEST_CASE("taylor_step_derivatives: zero background closed form") {
  const CMat h0 = CMat::Zero(2, 2);
  const std::vector<CMat> hk = {pauli_x()};
  RVec c(1);
  c << 0.0;
  const double dt = 0.7;
  const auto t = qoc::taylor_step_derivatives(h0, hk, c, dt, 6);
  CHECK(qoc::max_abs(t.u - CMat::Identity(2, 2)) <= 1e-15);
  CHECK(qoc::max_abs(t.du[0] - (-kI * dt) * hk[0]) <= 1e-15);
  // only the quadratic term contributes: d2/dc2 (-i dt c H_k)^2 / 2
  const CMat want2 = (-kI * dt) * (-kI * dt) * hk[0] * hk[0];
  CHECK(qoc::max_abs(t.d2u[0] - want2) <= 1e-15);
}

TEST_CASE("taylor_step_derivatives: L = 0 rejected") {
  const CMat h0 = pauli_x();
  const std::vector<CMat> hk = {pauli_z()};
  RVec c(1);
  c << 0.2;
  CHECK_THROWS(qoc::taylor_step_derivatives(h0, hk, c, 1.0, 0));
}

TEST_CASE("taylor_step_derivatives: multinomial enumeration at L = 4") {
  // direct power-series oracle: U_L = sum_l (-i dt)^l H^l / l! with the
  // product-rule sums for the first and second control derivatives
  std::mt19937_64 rng(7012);
  const int dim = 2, m = 2, order = 4;
  const double dt = 0.9;
  const CMat h0 = random_hermitian(dim, rng);
  const std::vector<CMat> hk = {random_hermitian(dim, rng),
                                random_hermitian(dim, rng)};
  RVec c(m);
  c << 0.4, -0.7;
  const CMat h = build_hamiltonian(h0, hk, c);

  std::vector<CMat> powers = {CMat::Identity(dim, dim)};
  for (int l = 1; l <= order; ++l) powers.push_back(powers.back() * h);

  auto coeff = [&](int l) {
    cxd f(1.0, 0.0);
    for (int i = 1; i <= l; ++i) f *= -kI * dt / static_cast<double>(i);
    return f;
  };

  CMat u = CMat::Zero(dim, dim);
  for (int l = 0; l <= order; ++l) u += coeff(l) * powers[l];

  std::vector<CMat> du(m, CMat::Zero(dim, dim));
  for (int k = 0; k < m; ++k)
    for (int l = 1; l <= order; ++l)
      for (int a = 0; a <= l - 1; ++a)
        du[k] += coeff(l) * powers[a] * hk[k] * powers[l - 1 - a];

  std::vector<CMat> d2u(m * m, CMat::Zero(dim, dim));
  for (int kp = 0; kp < m; ++kp)
    for (int k = 0; k < m; ++k)
      for (int l = 2; l <= order; ++l)
        for (int a = 0; a + 2 <= l; ++a)
          for (int b = 0; a + b + 2 <= l; ++b) {
            const int tail = l - 2 - a - b;
            d2u[kp * m + k] += coeff(l) * (powers[a] * hk[kp] * powers[b] *
                                               hk[k] * powers[tail] +
                                           powers[a] * hk[k] * powers[b] *
                                               hk[kp] * powers[tail]);
          }

  const auto t = qoc::taylor_step_derivatives(h0, hk, c, dt, order);
  CHECK(qoc::max_abs(t.u - u) <= 1e-13);
  for (int k = 0; k < m; ++k) CHECK(qoc::max_abs(t.du[k] - du[k]) <= 1e-13);
  for (int i = 0; i < m * m; ++i)
    CHECK(qoc::max_abs(t.d2u[i] - d2u[i]) <= 1e-13);
}

TEST_CASE("taylor_step_derivatives: matches diagonalization at L = 12") {
  std::mt19937_64 rng(7013);
  const int dim = 2;
  CMat h0 = random_hermitian(dim, rng);
  std::vector<CMat> hk = {random_hermitian(dim, rng)};
  RVec c(1);
  c << 0.5;
  // scale so |H| dt stays at 0.1
  const double dt = 0.1 / qoc::max_abs(build_hamiltonian(h0, hk, c));

  const auto t = qoc::taylor_step_derivatives(h0, hk, c, dt, 12);
  const StepEigensystem es = qoc::eig_hermitian(build_hamiltonian(h0, hk, c), dt);
  const CMat im = qoc::first_exchange(es);
  const SecondExchange s(es, im);
  CHECK(qoc::max_abs(t.u - qoc::step_propagator(es)) <= 1e-10);
  CHECK(qoc::max_abs(t.du[0] - qoc::step_first_derivative(es, im, hk[0])) <=
        1e-10);
  CHECK(qoc::max_abs(t.d2u[0] -
                     qoc::step_second_derivative(es, s, hk[0], hk[0])) <= 1e-10);
}

TEST_CASE("taylor_step_derivatives: derivatives of the truncation at L = 3") {
  // at a coarse truncation the derivatives must match finite differences of
  // the truncated propagator itself, not of the exact one
  std::mt19937_64 rng(7014);
  const int dim = 2, order = 3;
  const CMat h0 = random_hermitian(dim, rng);
  const std::vector<CMat> hk = {random_hermitian(dim, rng),
                                random_hermitian(dim, rng)};
  RVec c(2);
  c << 0.6, -0.3;
  const double dt = 0.8;

  const auto t = qoc::taylor_step_derivatives(h0, hk, c, dt, order);
  const double h = 1e-5;
  for (int k = 0; k < 2; ++k) {
    RVec cp = c, cm = c;
    cp[k] += h;
    cm[k] -= h;
    const CMat fd = (qoc::taylor_step_derivatives(h0, hk, cp, dt, order).u -
                     qoc::taylor_step_derivatives(h0, hk, cm, dt, order).u) /
                    (2.0 * h);
    CHECK(qoc::max_abs(t.du[k] - fd) <= 1e-7);
    for (int kp = 0; kp < 2; ++kp) {
      RVec qp = c, qm = c;
      qp[kp] += h;
      qm[kp] -= h;
      const CMat fd2 =
          (qoc::taylor_step_derivatives(h0, hk, qp, dt, order).du[k] -
           qoc::taylor_step_derivatives(h0, hk, qm, dt, order).du[k]) /
          (2.0 * h);
      CHECK(qoc::max_abs(t.d2u[kp * 2 + k] - fd2) <= 1e-7);
    }
  }
}

TEST_CASE("taylor_step_derivatives: monotone convergence toward the exact U") {
  std::mt19937_64 rng(7015);
  const int dim = 3;
  CMat h0 = random_hermitian(dim, rng);
  std::vector<CMat> hk = {random_hermitian(dim, rng)};
  RVec c(1);
  c << 0.4;
  const double dt = 0.5 / qoc::max_abs(build_hamiltonian(h0, hk, c));
  const CMat exact =
      qoc::step_propagator(qoc::eig_hermitian(build_hamiltonian(h0, hk, c), dt));

  double prev = std::numeric_limits<double>::infinity();
  for (int order = 1; order <= 20; ++order) {
    const double err =
        qoc::max_abs(qoc::taylor_step_derivatives(h0, hk, c, dt, order).u - exact);
    if (prev < 1e-14) break;  // floor reached
    CHECK(err <= prev * (1.0 + 1e-9) + 1e-15);
    prev = err;
  }
  CHECK(prev <= 1e-12);
}
