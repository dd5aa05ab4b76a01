#include "qoc/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qoc {

namespace {

std::string duration_tag(double t) {
  // compact duration label for file names (200 -> "200", 4.71 -> "4.71")
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  return out;
}

std::vector<double> mode_final_js(const CampaignResult& result,
                                  const std::string& mode) {
  std::vector<double> out;
  for (const SeedRecord& r : result.records) {
    if (r.mode == mode && !r.failed) out.push_back(r.final_j);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  const std::vector<OptimizerConfig> modes = resolve_modes(cfg);
  ExperimentOutcome outcome;
  for (double t : cfg.durations) {
    const ProblemSpec problem = build_problem(cfg, t);
    CampaignResult result =
        multistart(problem, cfg.seeds, cfg.base_seed, modes, cfg.workers);
    outcome.total_runs += static_cast<int>(result.records.size());
    for (const SeedRecord& r : result.records) {
      if (r.failed) ++outcome.failed_runs;
    }
    outcome.campaigns.push_back(std::move(result));
  }
  return outcome;
}

void write_seed_records(const std::string& path, const CampaignResult& result) {
  std::ofstream out = open_out(path);
  out << "seed_index\tseed\tmode\tfinal_j\titerations\tinfidelity_evaluations"
         "\tgradient_evaluations\thessian_evaluations\treason\tstatus"
         "\twall_seconds\n";
  for (const SeedRecord& r : result.records) {
    out << r.seed_index << '\t' << r.seed << '\t' << r.mode << '\t'
        << format_double(r.final_j) << '\t' << r.iterations << '\t'
        << r.infidelity_evaluations << '\t' << r.gradient_evaluations << '\t'
        << r.hessian_evaluations << '\t' << r.reason << '\t'
        << (r.failed ? "failed: " + r.error : std::string("ok")) << '\t'
        << format_double(r.wall_seconds) << '\n';
  }
}

void write_summary(const std::string& path, const ExperimentConfig& cfg,
                   const ExperimentOutcome& outcome) {
  nlohmann::json j;
  j["model"] = cfg.model;
  j["seeds"] = cfg.seeds;
  j["base_seed"] = cfg.base_seed;
  j["modes"] = cfg.modes;
  nlohmann::json campaigns = nlohmann::json::array();
  for (const CampaignResult& c : outcome.campaigns) {
    nlohmann::json jc;
    jc["duration"] = c.duration;
    jc["steps"] = c.steps;
    nlohmann::json summaries = nlohmann::json::array();
    for (const ModeSummary& s : c.summaries) {
      nlohmann::json js;
      js["mode"] = s.mode;
      js["seed_count"] = s.seed_count;
      js["failures"] = s.failures;
      js["best_j"] = s.best_j;
      js["best_seed_index"] = s.best_seed_index;
      js["mean_j"] = s.mean_j;
      js["mean_infidelity_evaluations"] = s.mean_infidelity_evaluations;
      js["mean_iterations"] = s.mean_iterations;
      js["mean_wall_seconds"] = s.mean_wall_seconds;
      summaries.push_back(js);
    }
    jc["mode_summaries"] = summaries;
    // pairwise one-sided sign tests on the paired per-seed infidelities
    nlohmann::json tests = nlohmann::json::array();
    for (std::size_t a = 0; a < c.summaries.size(); ++a) {
      for (std::size_t b = 0; b < c.summaries.size(); ++b) {
        if (a == b) continue;
        const std::vector<double> ja = mode_final_js(c, c.summaries[a].mode);
        const std::vector<double> jb = mode_final_js(c, c.summaries[b].mode);
        if (ja.size() != jb.size() || ja.empty()) continue;
        nlohmann::json jt;
        jt["better"] = c.summaries[a].mode;
        jt["worse"] = c.summaries[b].mode;
        jt["p_value"] = sign_test_p(ja, jb);
        tests.push_back(jt);
      }
    }
    jc["sign_tests"] = tests;
    campaigns.push_back(jc);
  }
  j["campaigns"] = campaigns;
  open_out(path) << j.dump(2) << "\n";
}

void write_histograms(const std::string& path,
                      const ExperimentOutcome& outcome) {
  std::ofstream out = open_out(path);
  out << "duration\tmode\tbin_lo\tbin_hi\tcount\n";
  for (const CampaignResult& c : outcome.campaigns) {
    for (const ModeSummary& s : c.summaries) {
      for (std::size_t i = 0; i < s.histogram_counts.size(); ++i) {
        out << format_double(c.duration) << '\t' << s.mode << '\t'
            << format_double(s.histogram_edges[i]) << '\t'
            << format_double(s.histogram_edges[i + 1]) << '\t'
            << s.histogram_counts[i] << '\n';
      }
    }
  }
}

void write_sweep_table(const std::string& path,
                       const ExperimentOutcome& outcome) {
  std::ofstream out = open_out(path);
  out << "duration\tmode\tbest_j\tmean_j\tmean_infidelity_evaluations"
         "\tmean_iterations\tfailures\tmean_wall_seconds\n";
  for (const CampaignResult& c : outcome.campaigns) {
    for (const ModeSummary& s : c.summaries) {
      out << format_double(c.duration) << '\t' << s.mode << '\t'
          << format_double(s.best_j) << '\t' << format_double(s.mean_j) << '\t'
          << format_double(s.mean_infidelity_evaluations) << '\t'
          << format_double(s.mean_iterations) << '\t' << s.failures << '\t'
          << format_double(s.mean_wall_seconds) << '\n';
    }
  }
}

void write_best_pulse(const std::string& path, const CampaignResult& result,
                      const std::string& mode, double dt) {
  const SeedRecord* best = nullptr;
  for (const SeedRecord& r : result.records) {
    if (r.mode != mode || r.failed) continue;
    if (!best || r.final_j < best->final_j) best = &r;
  }
  if (!best) return;
  std::ofstream out = open_out(path);
  out << "step\tt_start";
  for (int k = 0; k < best->final_pulse.cols(); ++k) {
    out << "\tamplitude_" << k;
  }
  out << '\n';
  for (int jstep = 0; jstep < best->final_pulse.rows(); ++jstep) {
    out << jstep << '\t' << format_double(jstep * dt);
    for (int k = 0; k < best->final_pulse.cols(); ++k) {
      out << '\t' << format_double(best->final_pulse(jstep, k));
    }
    out << '\n';
  }
}

void write_experiment_outputs(const ExperimentConfig& cfg,
                              const ExperimentOutcome& outcome) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  for (const CampaignResult& c : outcome.campaigns) {
    const std::string tag = duration_tag(c.duration);
    write_seed_records((dir / ("records_T" + tag + ".tsv")).string(), c);
    const double dt = c.duration / c.steps;
    for (const ModeSummary& s : c.summaries) {
      write_best_pulse(
          (dir / ("best_pulse_T" + tag + "_" + s.mode + ".tsv")).string(), c,
          s.mode, dt);
    }
  }
  write_histograms((dir / "histograms.tsv").string(), outcome);
  write_sweep_table((dir / "sweep.tsv").string(), outcome);
  write_summary((dir / "summary.json").string(), cfg, outcome);
  open_out((dir / "config.json").string()) << serialize_config(cfg);
}

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace qoc
