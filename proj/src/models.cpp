#include "qoc/models.hpp"

#include <cmath>
#include <stdexcept>

namespace qoc {

namespace {

// lowering operator on a single truncated oscillator
CMat lowering(int levels) {
  CMat b = CMat::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) {
    b(n - 1, n) = std::sqrt(static_cast<double>(n));
  }
  return b;
}

CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace

DerivedCouplings derived_couplings(const TransmonParams& params) {
  const double det1 = params.w1 - params.wr;
  const double det2 = params.w2 - params.wr;
  if (det1 == 0.0 || det2 == 0.0) {
    throw std::invalid_argument(
        "derived_couplings: dispersive assumption requires nonzero "
        "transmon-cavity detunings");
  }
  DerivedCouplings out;
  out.j_coupling = params.g1 * params.g2 * (det1 + det2) / (det1 * det2);
  out.w1_dressed = params.w1 + params.g1 * params.g1 / det1;
  out.w2_dressed = params.w2 + params.g2 * params.g2 / det2;
  out.delta = out.w1_dressed - out.w2_dressed;
  return out;
}

GateTarget cnot_target(int levels) {
  if (levels < 2) {
    throw std::invalid_argument("cnot_target: need at least 2 levels");
  }
  const int dim = levels * levels;
  GateTarget out;
  out.v = CMat::Identity(dim, dim);
  // |10> <-> |11|: control is transmon 1 (slow index)
  const int i10 = levels;
  const int i11 = levels + 1;
  out.v(i10, i10) = 0.0;
  out.v(i11, i11) = 0.0;
  out.v(i10, i11) = 1.0;
  out.v(i11, i10) = 1.0;
  out.projector = CMat::Zero(dim, dim);
  for (int n1 = 0; n1 < 2; ++n1) {
    for (int n2 = 0; n2 < 2; ++n2) {
      const int idx = n1 * levels + n2;
      out.projector(idx, idx) = 1.0;
    }
  }
  return out;
}

BilinearSystem transmon_effective_system(const TransmonParams& params) {
  if (params.levels < 2) {
    throw std::invalid_argument(
        "transmon_effective_system: need at least 2 levels");
  }
  const DerivedCouplings dc = derived_couplings(params);
  const int levels = params.levels;
  const int dim = levels * levels;

  const CMat b = lowering(levels);
  const CMat id = CMat::Identity(levels, levels);
  const CMat b1 = kron(b, id);  // transmon 1 on the slow index
  const CMat b2 = kron(id, b);  // transmon 2 on the fast index
  const CMat n1 = b1.adjoint() * b1;
  const CMat n2 = b2.adjoint() * b2;

  BilinearSystem sys;
  sys.h0 = dc.delta * n1 +
           0.5 * params.d1 * n1 * (n1 - CMat::Identity(dim, dim)) +
           0.5 * params.d2 * n2 * (n2 - CMat::Identity(dim, dim)) +
           dc.j_coupling * (b1.adjoint() * b2 + b1 * b2.adjoint());
  sys.controls = {b1.adjoint() + b1};

  const GateTarget target = cnot_target(levels);
  sys.projector = target.projector;
  sys.target = target.v;
  sys.initial = CMat::Identity(dim, dim);
  return sys;
}

BilinearSystem two_level_system() {
  CMat sx(2, 2), sz(2, 2);
  sx << 0, 1, 1, 0;
  sz << 1, 0, 0, -1;
  BilinearSystem sys;
  sys.h0 = sx;
  sys.controls = {sz};
  sys.projector = CMat::Identity(2, 2);
  sys.target = sx;
  sys.initial = CMat::Identity(2, 2);
  return sys;
}

ModelProblem two_level_example(double t, int n) {
  if (n < 1) {
    throw std::invalid_argument("two_level_example: need at least one step");
  }
  if (t <= 0.0) {
    throw std::invalid_argument("two_level_example: duration must be positive");
  }
  return ModelProblem{two_level_system(), t / n, n};
}

}  // namespace qoc
