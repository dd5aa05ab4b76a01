#pragma once

#include "qoc/linalg.hpp"
#include "qoc/objective.hpp"

namespace qoc {

// Effective two-transmon cross-resonance model (two qutrits after cavity
// elimination). All frequencies are angular, in rad/ns; a laboratory
// frequency f in GHz enters as 2*pi*f. The drive addresses transmon 1 and
// the frame rotates at the dressed frequency of transmon 2.
struct TransmonParams {
  double w1 = kTwoPi * 5.15;        // transmon 1 frequency
  double w2 = kTwoPi * 5.5;         // transmon 2 frequency
  double wr = kTwoPi * 7.5;         // cavity frequency
  double g1 = kTwoPi * 0.1;         // transmon 1 - cavity coupling
  double g2 = kTwoPi * 0.1;         // transmon 2 - cavity coupling
  double d1 = -kTwoPi * 0.35;       // transmon 1 anharmonicity
  double d2 = -kTwoPi * 0.35;       // transmon 2 anharmonicity
  double omega_max = kTwoPi * 0.2;  // drive amplitude bound
  int levels = 3;                   // truncation per transmon
};

// Schrieffer-Wolff outputs: effective exchange coupling, dressed
// frequencies, and the rotating-frame detuning delta = w1_dressed -
// w2_dressed.
struct DerivedCouplings {
  double j_coupling = 0.0;
  double w1_dressed = 0.0;
  double w2_dressed = 0.0;
  double delta = 0.0;
};

// J = g1 g2 (D1 + D2) / (D1 D2), w_dressed = w + g^2 / D with D = w - wr.
// Throws if either detuning D vanishes (dispersive assumption).
DerivedCouplings derived_couplings(const TransmonParams& params);

struct GateTarget {
  CMat v;
  CMat projector;
};

// CNOT with transmon 1 as control, embedded in the two-qutrit space as the
// identity outside the qubit subspace, plus the diagonal projector onto the
// qubit subspace (indices n1 * levels + n2 with n1, n2 in {0, 1}).
GateTarget cnot_target(int levels = 3);

// H0 = delta * n1 + (d1/2) n1 (n1 - 1) + (d2/2) n2 (n2 - 1)
//        + J (b1^dag b2 + b1 b2^dag),      H1 = b1^dag + b1,
// in the |n1 n2> product basis with n2 varying fastest. Target/projector
// from cnot_target; initial = identity.
BilinearSystem transmon_effective_system(const TransmonParams& params);

// Two-level example: H0 = sigma_x, H1 = sigma_z, target = sigma_x (X gate),
// projector = identity.
BilinearSystem two_level_system();

struct ModelProblem {
  BilinearSystem system;
  double dt = 0.0;
  int steps = 0;
};

// Two-level example over duration t split into n equal steps (dt = t / n).
ModelProblem two_level_example(double t, int n);

}  // namespace qoc
