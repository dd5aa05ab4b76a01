#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qoc/benchmark.hpp"
#include "qoc/models.hpp"
#include "qoc/optimize.hpp"

namespace qoc {

// Invalid configuration input (unknown keys, bad values, unreadable files).
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Transmon parameters as they appear in config files: laboratory
// frequencies in GHz (converted to angular rad/ns when the system is built).
struct TransmonConfig {
  double w1_ghz = 5.15;
  double w2_ghz = 5.5;
  double wr_ghz = 7.5;
  double g1_ghz = 0.1;
  double g2_ghz = 0.1;
  double anharmonicity1_ghz = -0.35;
  double anharmonicity2_ghz = -0.35;
  double drive_bound_ghz = 0.2;
  int levels = 3;

  TransmonParams to_params() const;
};

struct ExperimentConfig {
  std::string model = "transmon";  // transmon | two-level | custom
  std::vector<double> durations;   // ns
  double dt = 2.0;                 // used when steps == 0
  int steps = 0;                   // 0: derive N = T / dt; else dt = T / steps
  std::vector<std::string> modes = {"newton-exact-hessian"};
  int seeds = 1;
  std::uint64_t base_seed = 1000;
  std::string output_dir = "qoc-out";
  int workers = 1;
  std::string backend = "diagonalization";
  int taylor_order = 12;
  OptimizerConfig optimizer;  // mode field ignored; `modes` governs
  TransmonConfig transmon;
  std::string custom_file;  // model == custom: JSON file with matrices
  // per-control [min, max]; empty = model default (transmon: +-drive bound)
  std::vector<std::pair<double, double>> control_bounds;
};

// Parse + validate a JSON config text. Unknown keys anywhere are an error
// listing their full field paths; invalid values report their field path.
ExperimentConfig parse_config(const std::string& json_text);

// parse_config over the contents of `path`
ExperimentConfig load_config(const std::string& path);

// Canonical serialization: every field explicit, keys sorted. Feeding the
// output back through parse_config reproduces the same configuration.
std::string serialize_config(const ExperimentConfig& cfg);

// Number of steps for one duration entry (validates divisibility when dt
// governs the grid).
int resolve_steps(const ExperimentConfig& cfg, double duration);

// Assemble the optimization problem for one duration from the configured
// model (reads the custom matrix file when model == custom).
ProblemSpec build_problem(const ExperimentConfig& cfg, double duration);

// OptimizerConfig per requested mode, sharing the configured common fields.
std::vector<OptimizerConfig> resolve_modes(const ExperimentConfig& cfg);

}  // namespace qoc
