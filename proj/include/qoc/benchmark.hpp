#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qoc/objective.hpp"
#include "qoc/optimize.hpp"

namespace qoc {

enum class PropagatorBackend { Diagonalization, Taylor };

PropagatorBackend backend_from_string(const std::string& name);
std::string backend_name(PropagatorBackend backend);

// One optimization problem instance: system, time grid, and per-control
// amplitude bounds (used both as the optimizer box and as the sampling range
// for random initial pulses).
struct ProblemSpec {
  BilinearSystem system;
  double dt = 1.0;
  int steps = 1;
  std::vector<std::pair<double, double>> bounds;  // per control [min, max]
  PropagatorBackend backend = PropagatorBackend::Diagonalization;
  int taylor_order = 12;

  int controls() const { return static_cast<int>(system.controls.size()); }
  double duration() const { return dt * steps; }
};

// Counter-based generator used to derive per-seed random streams: the
// sequence is fully determined by the 64-bit seed, independent of platform
// and of how many values other seeds consumed.
std::uint64_t splitmix64_next(std::uint64_t& state);
// uniform double in [0, 1) with 53 random bits
double splitmix64_uniform(std::uint64_t& state);

// Initial pulse for one seed: amplitudes drawn uniformly over each control's
// bound interval, steps-major within each control (column k filled before
// column k+1). Identical seed -> identical pulse.
RMat initial_pulse(std::uint64_t seed, int steps,
                   const std::vector<std::pair<double, double>>& bounds);

// Objective over the flattened pulse vector (layout k*steps + j) evaluating
// J / gradient / Hessian on the problem's system and backend.
Objective make_pulse_objective(const ProblemSpec& problem);

struct SeedRecord {
  int seed_index = 0;
  std::uint64_t seed = 0;
  std::string mode;
  bool failed = false;
  std::string error;
  double final_j = 0.0;
  int iterations = 0;
  long infidelity_evaluations = 0;
  long gradient_evaluations = 0;
  long hessian_evaluations = 0;
  std::string reason;
  double wall_seconds = 0.0;
  RMat final_pulse;
};

struct ModeSummary {
  std::string mode;
  int seed_count = 0;
  int failures = 0;
  double best_j = 0.0;
  int best_seed_index = -1;
  double mean_j = 0.0;
  double mean_infidelity_evaluations = 0.0;
  double mean_iterations = 0.0;
  double mean_wall_seconds = 0.0;
  // decade histogram of final J: counts[i] holds J in [edges[i], edges[i+1])
  std::vector<double> histogram_edges;
  std::vector<int> histogram_counts;
};

struct CampaignResult {
  double duration = 0.0;
  int steps = 0;
  std::uint64_t base_seed = 0;
  std::vector<SeedRecord> records;  // seed-major, modes in call order
  std::vector<ModeSummary> summaries;
};

// Decade histogram over [1e-16, 1]: J below 1e-16 lands in the first bin,
// J = 1 in the last; counts always sum to the number of values.
void decade_histogram(const std::vector<double>& values,
                      std::vector<double>& edges, std::vector<int>& counts);

// Paired multistart campaign: per seed index i the pulse drawn from seed
// base_seed + i is handed to every mode. Individual run failures are
// recorded and the campaign continues. Deterministic for a fixed base seed
// (wall times aside). `workers` bounds the number of concurrent runs.
CampaignResult multistart(const ProblemSpec& problem, int seed_count,
                          std::uint64_t base_seed,
                          const std::vector<OptimizerConfig>& modes,
                          int workers = 1);

// One-sided paired sign test that a beats b: pairs differing by at most
// tie_tol are discarded; returns P[Binom(n, 1/2) >= wins] where wins counts
// a(i) < b(i). Returns 1.0 when no informative pairs remain.
double sign_test_p(const std::vector<double>& a, const std::vector<double>& b,
                   double tie_tol = 1e-12);

}  // namespace qoc
