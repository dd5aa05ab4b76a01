#pragma once

#include <string>
#include <vector>

#include "qoc/benchmark.hpp"
#include "qoc/config.hpp"

namespace qoc {

// Results of executing an ExperimentConfig: one paired campaign per duration.
struct ExperimentOutcome {
  std::vector<CampaignResult> campaigns;
  int total_runs = 0;
  int failed_runs = 0;

  bool all_failed() const { return total_runs > 0 && failed_runs == total_runs; }
};

// Execute the paired multistart campaign for every configured duration.
// Individual run failures are recorded in the seed records; throws only on
// configuration/model assembly errors.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

// File emission (all writes funnel through these single-threaded helpers).
// Numbers are printed with round-trip precision so emitted tables parse back
// to the exact computed values.
std::string format_double(double v);

// per-seed records as tab-separated text, one row per (seed, mode) run
void write_seed_records(const std::string& path, const CampaignResult& result);

// campaign summary (per duration x mode aggregates + pairwise sign tests)
// as structured text (JSON)
void write_summary(const std::string& path, const ExperimentConfig& cfg,
                   const ExperimentOutcome& outcome);

// histogram table: duration, mode, bin_lo, bin_hi, count
void write_histograms(const std::string& path, const ExperimentOutcome& outcome);

// best/mean-vs-duration table: duration, mode, best_j, mean_j, aggregates
void write_sweep_table(const std::string& path, const ExperimentOutcome& outcome);

// optimized pulse of the best seed of one mode: step, t, amplitudes
void write_best_pulse(const std::string& path, const CampaignResult& result,
                      const std::string& mode, double dt);

// Write the full output bundle into cfg.output_dir (created if needed):
// records_T*.tsv, best_pulse_T*_<mode>.tsv, histograms.tsv, sweep.tsv,
// summary.json, and the resolved config as config.json.
void write_experiment_outputs(const ExperimentConfig& cfg,
                              const ExperimentOutcome& outcome);

// simple TSV reader (used to verify emitted files parse back)
std::vector<std::vector<std::string>> read_tsv(const std::string& path);

}  // namespace qoc
