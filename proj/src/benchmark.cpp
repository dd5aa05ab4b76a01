#include "qoc/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace qoc {

PropagatorBackend backend_from_string(const std::string& name) {
  if (name == "diagonalization") return PropagatorBackend::Diagonalization;
  if (name == "taylor") return PropagatorBackend::Taylor;
  throw std::invalid_argument("unknown propagator backend: " + name);
}

std::string backend_name(PropagatorBackend backend) {
  return backend == PropagatorBackend::Diagonalization ? "diagonalization"
                                                       : "taylor";
}

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double splitmix64_uniform(std::uint64_t& state) {
  return static_cast<double>(splitmix64_next(state) >> 11) *
         (1.0 / 9007199254740992.0);
}

RMat initial_pulse(std::uint64_t seed, int steps,
                   const std::vector<std::pair<double, double>>& bounds) {
  if (steps < 1 || bounds.empty()) {
    throw std::invalid_argument("initial_pulse: need steps >= 1 and bounds");
  }
  std::uint64_t state = seed;
  const int controls = static_cast<int>(bounds.size());
  RMat amps(steps, controls);
  for (int k = 0; k < controls; ++k) {
    const auto [lo, hi] = bounds[k];
    if (!(lo < hi)) {
      throw std::invalid_argument("initial_pulse: empty bound interval");
    }
    for (int j = 0; j < steps; ++j) {
      amps(j, k) = lo + splitmix64_uniform(state) * (hi - lo);
    }
  }
  return amps;
}

Objective make_pulse_objective(const ProblemSpec& problem) {
  return [problem](const RVec& x, int order) {
    ControlPulse pulse;
    pulse.amplitudes = unflatten_pulse(x, problem.steps, problem.controls());
    pulse.dt = problem.dt;
    pulse.bounds = problem.bounds;
    const GradHessResult r =
        problem.backend == PropagatorBackend::Taylor
            ? evaluate_taylor(problem.system, pulse, order,
                              problem.taylor_order)
            : evaluate(problem.system, pulse, order);
    ObjectiveEval out;
    out.f = r.j_value;
    out.grad = r.grad;
    out.hess = r.hess;
    return out;
  };
}

void decade_histogram(const std::vector<double>& values,
                      std::vector<double>& edges, std::vector<int>& counts) {
  constexpr int kDecades = 16;  // [1e-16, 1] in decade bins
  edges.resize(kDecades + 1);
  for (int i = 0; i <= kDecades; ++i) {
    edges[i] = std::pow(10.0, -kDecades + i);
  }
  counts.assign(kDecades, 0);
  for (double v : values) {
    const double clamped = std::min(std::max(v, 1e-16), 1.0);
    int bin = static_cast<int>(std::floor(std::log10(clamped))) + kDecades;
    bin = std::min(std::max(bin, 0), kDecades - 1);
    ++counts[bin];
  }
}

namespace {

ModeSummary summarize(const std::string& mode,
                      const std::vector<SeedRecord>& records) {
  ModeSummary s;
  s.mode = mode;
  std::vector<double> js;
  double jsum = 0.0, nfsum = 0.0, itsum = 0.0, wallsum = 0.0;
  for (const SeedRecord& r : records) {
    if (r.mode != mode) continue;
    ++s.seed_count;
    if (r.failed) {
      ++s.failures;
      continue;
    }
    js.push_back(r.final_j);
    jsum += r.final_j;
    nfsum += static_cast<double>(r.infidelity_evaluations);
    itsum += r.iterations;
    wallsum += r.wall_seconds;
    if (s.best_seed_index < 0 || r.final_j < s.best_j) {
      s.best_j = r.final_j;
      s.best_seed_index = r.seed_index;
    }
  }
  const int ok = static_cast<int>(js.size());
  if (ok > 0) {
    s.mean_j = jsum / ok;
    s.mean_infidelity_evaluations = nfsum / ok;
    s.mean_iterations = itsum / ok;
    s.mean_wall_seconds = wallsum / ok;
  }
  decade_histogram(js, s.histogram_edges, s.histogram_counts);
  return s;
}

}  // namespace

CampaignResult multistart(const ProblemSpec& problem, int seed_count,
                          std::uint64_t base_seed,
                          const std::vector<OptimizerConfig>& modes,
                          int workers) {
  if (seed_count < 1) {
    throw std::invalid_argument("multistart: seed count must be >= 1");
  }
  if (modes.empty()) {
    throw std::invalid_argument("multistart: need at least one mode");
  }
  problem.system.validate();

  CampaignResult out;
  out.duration = problem.duration();
  out.steps = problem.steps;
  out.base_seed = base_seed;

  const int n_modes = static_cast<int>(modes.size());
  const int n_runs = seed_count * n_modes;
  out.records.resize(n_runs);

  const Objective objective = make_pulse_objective(problem);

  RVec lo(problem.steps * problem.controls());
  RVec hi(problem.steps * problem.controls());
  for (int k = 0; k < problem.controls(); ++k) {
    for (int j = 0; j < problem.steps; ++j) {
      lo(k * problem.steps + j) = problem.bounds[k].first;
      hi(k * problem.steps + j) = problem.bounds[k].second;
    }
  }

  // infidelity lives in [0, 1]: a run reporting exactly 0 has hit the
  // objective's lower bound and may stop
  std::vector<OptimizerConfig> run_modes = modes;
  for (OptimizerConfig& mc : run_modes) {
    if (std::isinf(mc.target_f) && mc.target_f < 0.0) mc.target_f = 0.0;
  }

  auto run_one = [&](int run_index) {
    const int seed_index = run_index / n_modes;
    const int mode_index = run_index % n_modes;
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(seed_index);
    SeedRecord rec;
    rec.seed_index = seed_index;
    rec.seed = seed;
    rec.mode = mode_name(modes[mode_index].mode);
    try {
      const RMat amps = initial_pulse(seed, problem.steps, problem.bounds);
      const RVec x0 = flatten_pulse(amps);
      const OptimizationReport rep = minimize(objective, x0, lo, hi,
                                              run_modes[mode_index]);
      rec.final_j = rep.final_f;
      rec.iterations = rep.iterations;
      rec.infidelity_evaluations = rep.infidelity_evaluations;
      rec.gradient_evaluations = rep.gradient_evaluations;
      rec.hessian_evaluations = rep.hessian_evaluations;
      rec.reason = termination_name(rep.reason);
      rec.wall_seconds = rep.wall_seconds;
      rec.final_pulse =
          unflatten_pulse(rep.final_x, problem.steps, problem.controls());
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    out.records[run_index] = std::move(rec);
  };

  workers = std::max(1, std::min(workers, n_runs));
  if (workers == 1) {
    for (int i = 0; i < n_runs; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const int i = next.fetch_add(1);
          if (i >= n_runs) break;
          run_one(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  for (const OptimizerConfig& cfg : modes) {
    out.summaries.push_back(summarize(mode_name(cfg.mode), out.records));
  }
  return out;
}

double sign_test_p(const std::vector<double>& a, const std::vector<double>& b,
                   double tie_tol) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("sign_test_p: length mismatch");
  }
  int wins = 0, informative = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (std::abs(d) <= tie_tol) continue;
    ++informative;
    if (d < 0.0) ++wins;
  }
  if (informative == 0) return 1.0;

  // P[Binom(n, 1/2) >= wins] computed from log binomial coefficients
  double p = 0.0;
  for (int k = wins; k <= informative; ++k) {
    double log_c = 0.0;
    for (int i = 0; i < k; ++i) {
      log_c += std::log(static_cast<double>(informative - i)) -
               std::log(static_cast<double>(i + 1));
    }
    p += std::exp(log_c - informative * std::log(2.0));
  }
  return std::min(p, 1.0);
}

}  // namespace qoc
