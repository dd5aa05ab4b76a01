#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qoc/derivative_check.hpp"
#include "qoc/experiment.hpp"
#include "qoc/models.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitCampaignFailure = 3;

struct Overrides {
  int seeds = -1;
  std::string modes;
  std::string out;
  int workers = -1;
  std::string backend;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seeds", ov.seeds, "override seed count");
  cmd->add_option("--modes", ov.modes,
                  "override optimizer modes (comma-separated)");
  cmd->add_option("--out", ov.out, "override output directory");
  cmd->add_option("--workers", ov.workers, "override worker count");
  cmd->add_option("--backend", ov.backend,
                  "override propagator backend (diagonalization | taylor)");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply_overrides(qoc::ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.seeds >= 0) {
    if (ov.seeds < 1) throw qoc::ConfigError("--seeds: must be >= 1");
    cfg.seeds = ov.seeds;
  }
  if (!ov.modes.empty()) {
    const std::vector<std::string> modes = split_csv(ov.modes);
    if (modes.empty()) throw qoc::ConfigError("--modes: empty mode list");
    for (const std::string& m : modes) {
      try {
        qoc::mode_from_string(m);
      } catch (const std::invalid_argument& e) {
        throw qoc::ConfigError(std::string("--modes: ") + e.what());
      }
    }
    cfg.modes = modes;
  }
  if (!ov.out.empty()) cfg.output_dir = ov.out;
  if (ov.workers >= 0) {
    if (ov.workers < 1) throw qoc::ConfigError("--workers: must be >= 1");
    cfg.workers = ov.workers;
  }
  if (!ov.backend.empty()) {
    try {
      qoc::backend_from_string(ov.backend);
    } catch (const std::invalid_argument& e) {
      throw qoc::ConfigError(std::string("--backend: ") + e.what());
    }
    cfg.backend = ov.backend;
  }
}

int run_campaign(const std::string& config_path, const Overrides& ov) {
  qoc::ExperimentConfig cfg = qoc::load_config(config_path);
  apply_overrides(cfg, ov);
  const qoc::ExperimentOutcome outcome = qoc::run_experiment(cfg);
  qoc::write_experiment_outputs(cfg, outcome);

  for (const qoc::CampaignResult& c : outcome.campaigns) {
    std::printf("T = %g ns (N = %d)\n", c.duration, c.steps);
    for (const qoc::ModeSummary& s : c.summaries) {
      std::printf(
          "  %-21s best J = %-12.4e mean J = %-12.4e mean evals = %-8.1f"
          " failures = %d\n",
          s.mode.c_str(), s.best_j, s.mean_j, s.mean_infidelity_evaluations,
          s.failures);
    }
  }
  std::printf("outputs written to %s\n", cfg.output_dir.c_str());

  if (outcome.all_failed()) {
    std::fprintf(stderr, "error: every run in the campaign failed\n");
    return kExitCampaignFailure;
  }
  return kExitOk;
}

int check_derivatives(const std::string& config_path, const Overrides& ov) {
  qoc::ExperimentConfig cfg = qoc::load_config(config_path);
  apply_overrides(cfg, ov);

  bool ok = true;
  for (double t : cfg.durations) {
    const qoc::ProblemSpec problem = qoc::build_problem(cfg, t);
    const qoc::DerivativeReport rep =
        qoc::derivative_report(problem, cfg.base_seed);
    const bool pass = rep.grad_rel_err <= 1e-6 && rep.hess_rel_err <= 1e-5;
    ok = ok && pass;
    std::printf(
        "T = %-8g J = %.6e  max rel err: gradient %.3e  hessian %.3e  "
        "asymmetry %.3e  [%s]\n",
        t, rep.j_value, rep.grad_rel_err, rep.hess_rel_err, rep.hess_asymmetry,
        pass ? "ok" : "FAIL");
  }
  if (!ok) {
    std::fprintf(stderr,
                 "error: derivative check exceeded tolerance (1e-6 gradient, "
                 "1e-5 hessian)\n");
    return kExitCampaignFailure;
  }
  return kExitOk;
}

int demo_two_level(const std::string& out_dir) {
  const double t = 3.0 * qoc::kPi / 2.0;
  const qoc::ModelProblem problem = qoc::two_level_example(t, 2);

  qoc::ProblemSpec spec;
  spec.system = problem.system;
  spec.dt = problem.dt;
  spec.steps = problem.steps;
  spec.bounds = {{-4.0, 4.0}};
  const qoc::Objective objective = qoc::make_pulse_objective(spec);

  qoc::RVec x0(2), lo(2), hi(2);
  x0 << -0.915, 2.251;
  lo << -1.2, -4.0;
  hi << 1.2, 4.0;

  std::printf("two-level demo: H = sigma_x + c(t) sigma_z, X-gate target\n");
  std::printf("T = 3*pi/2, N = 2, start c = (%.3f, %.3f), box [%g, %g] x [%g, %g]\n",
              x0(0), x0(1), lo(0), hi(0), lo(1), hi(1));
  std::printf("global optimum c = (0, 0) with J = 0; suboptimal stationary "
              "point near c = (0.000, 2.285)\n\n");
  std::printf("%-21s %-22s %-12s %-6s %-5s %s\n", "mode", "final c", "J",
              "nf", "iters", "reason");

  struct Row {
    const char* name;
    qoc::OptimizerConfig cfg;
  };
  std::vector<Row> rows;
  {
    qoc::OptimizerConfig newton;
    newton.mode = qoc::Mode::NewtonExactHessian;
    rows.push_back({"newton-exact-hessian", newton});
    qoc::OptimizerConfig bfgs;
    bfgs.mode = qoc::Mode::Bfgs;
    rows.push_back({"bfgs", bfgs});
    qoc::OptimizerConfig gd;
    gd.mode = qoc::Mode::GradientDescent;
    rows.push_back({"gradient-descent", gd});
  }

  for (Row& row : rows) {
    row.cfg.target_f = 0.0;  // infidelity cannot go below zero
    row.cfg.record_iterates = !out_dir.empty();
    const qoc::OptimizationReport rep =
        qoc::minimize(objective, x0, lo, hi, row.cfg);
    char point[64];
    std::snprintf(point, sizeof(point), "(%+.4f, %+.4f)", rep.final_x(0),
                  rep.final_x(1));
    std::printf("%-21s %-22s %-12.4e %-6ld %-5d %s\n", row.name, point,
                rep.final_f, rep.infidelity_evaluations, rep.iterations,
                qoc::termination_name(rep.reason).c_str());
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      const std::string path =
          (std::filesystem::path(out_dir) /
           (std::string("demo_iterates_") + row.name + ".tsv"))
              .string();
      std::ofstream out(path);
      out << "iteration\tc0\tc1\n";
      for (std::size_t i = 0; i < rep.iterates.size(); ++i) {
        out << i << '\t' << qoc::format_double(rep.iterates[i](0)) << '\t'
            << qoc::format_double(rep.iterates[i](1)) << '\n';
      }
    }
  }
  if (!out_dir.empty()) {
    std::printf("\niterate trails written to %s\n", out_dir.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "GRAPE quantum optimal control with exact gradients and Hessians"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::string demo_out;

  CLI::App* run = app.add_subcommand(
      "run", "execute the configured paired multistart campaign");
  run->add_option("config", config_path, "JSON config file")->required();
  add_override_flags(run, ov);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run the campaign across the configured duration grid");
  sweep->add_option("config", config_path, "JSON config file")->required();
  add_override_flags(sweep, ov);

  CLI::App* check = app.add_subcommand(
      "check-derivatives",
      "compare analytical derivatives against finite differences");
  check->add_option("config", config_path, "JSON config file")->required();
  add_override_flags(check, ov);

  CLI::App* demo = app.add_subcommand(
      "demo-two-level", "run the two-level landscape demonstration");
  demo->add_option("--out", demo_out, "write per-mode iterate trails here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || sweep->parsed()) {
      return run_campaign(config_path, ov);
    }
    if (check->parsed()) {
      return check_derivatives(config_path, ov);
    }
    return demo_two_level(demo_out);
  } catch (const qoc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCampaignFailure;
  }
}
