#include "qoc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace qoc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void collect_unknown_keys(const json& obj, const std::string& prefix,
                          const std::set<std::string>& allowed,
                          std::vector<std::string>& unknown) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      unknown.push_back(prefix.empty() ? it.key() : prefix + "." + it.key());
    }
  }
}

double get_number(const json& obj, const std::string& key,
                  const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

long get_integer(const json& obj, const std::string& key,
                 const std::string& path, long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& path, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

void check_positive(double v, const std::string& path) {
  if (!(v > 0.0)) fail(path, "must be positive");
}

void check_fraction(double v, const std::string& path) {
  if (!(v > 0.0 && v < 1.0)) fail(path, "must lie strictly between 0 and 1");
}

void parse_optimizer(const json& obj, OptimizerConfig& opt) {
  const std::string path = "optimizer";
  const std::string style =
      get_string(obj, "constraint_style", path,
                 constraint_style_name(opt.constraint_style));
  try {
    opt.constraint_style = constraint_style_from_string(style);
  } catch (const std::invalid_argument& e) {
    fail(path + ".constraint_style", e.what());
  }
  opt.optimality_tol =
      get_number(obj, "optimality_tol", path, opt.optimality_tol);
  opt.step_tol = get_number(obj, "step_tol", path, opt.step_tol);
  opt.max_iterations = static_cast<int>(
      get_integer(obj, "max_iterations", path, opt.max_iterations));
  opt.penalty_sigma = get_number(obj, "penalty_sigma", path, opt.penalty_sigma);
  opt.fixed_step = get_number(obj, "fixed_step", path, opt.fixed_step);
  opt.barrier_mu0 = get_number(obj, "barrier_mu0", path, opt.barrier_mu0);
  opt.barrier_reduction =
      get_number(obj, "barrier_reduction", path, opt.barrier_reduction);
  opt.barrier_mu_floor =
      get_number(obj, "barrier_mu_floor", path, opt.barrier_mu_floor);
  opt.barrier_kappa = get_number(obj, "barrier_kappa", path, opt.barrier_kappa);
  opt.barrier_inner_budget = static_cast<int>(
      get_integer(obj, "barrier_inner_budget", path, opt.barrier_inner_budget));
  opt.fraction_to_boundary =
      get_number(obj, "fraction_to_boundary", path, opt.fraction_to_boundary);
  opt.armijo_c1 = get_number(obj, "armijo_c1", path, opt.armijo_c1);
  opt.backtrack_rho = get_number(obj, "backtrack_rho", path, opt.backtrack_rho);
  opt.max_backtracks = static_cast<int>(
      get_integer(obj, "max_backtracks", path, opt.max_backtracks));

  check_positive(opt.optimality_tol, path + ".optimality_tol");
  check_positive(opt.step_tol, path + ".step_tol");
  if (opt.max_iterations < 1) fail(path + ".max_iterations", "must be >= 1");
  check_positive(opt.penalty_sigma, path + ".penalty_sigma");
  check_positive(opt.fixed_step, path + ".fixed_step");
  check_positive(opt.barrier_mu0, path + ".barrier_mu0");
  check_fraction(opt.barrier_reduction, path + ".barrier_reduction");
  check_positive(opt.barrier_mu_floor, path + ".barrier_mu_floor");
  check_positive(opt.barrier_kappa, path + ".barrier_kappa");
  if (opt.barrier_inner_budget < 1) {
    fail(path + ".barrier_inner_budget", "must be >= 1");
  }
  check_fraction(opt.fraction_to_boundary, path + ".fraction_to_boundary");
  check_fraction(opt.armijo_c1, path + ".armijo_c1");
  check_fraction(opt.backtrack_rho, path + ".backtrack_rho");
  if (opt.max_backtracks < 1) fail(path + ".max_backtracks", "must be >= 1");
}

void parse_transmon(const json& obj, TransmonConfig& t) {
  const std::string path = "transmon";
  t.w1_ghz = get_number(obj, "w1_ghz", path, t.w1_ghz);
  t.w2_ghz = get_number(obj, "w2_ghz", path, t.w2_ghz);
  t.wr_ghz = get_number(obj, "wr_ghz", path, t.wr_ghz);
  t.g1_ghz = get_number(obj, "g1_ghz", path, t.g1_ghz);
  t.g2_ghz = get_number(obj, "g2_ghz", path, t.g2_ghz);
  t.anharmonicity1_ghz =
      get_number(obj, "anharmonicity1_ghz", path, t.anharmonicity1_ghz);
  t.anharmonicity2_ghz =
      get_number(obj, "anharmonicity2_ghz", path, t.anharmonicity2_ghz);
  t.drive_bound_ghz =
      get_number(obj, "drive_bound_ghz", path, t.drive_bound_ghz);
  t.levels = static_cast<int>(get_integer(obj, "levels", path, t.levels));
  check_positive(t.drive_bound_ghz, path + ".drive_bound_ghz");
  if (t.levels < 2) fail(path + ".levels", "must be >= 2");
}

CMat parse_complex_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty matrix");
  const int rows = static_cast<int>(j.size());
  int cols = -1;
  CMat out;
  for (int r = 0; r < rows; ++r) {
    const json& row = j.at(r);
    if (!row.is_array()) fail(path, "expected an array of rows");
    if (cols < 0) {
      cols = static_cast<int>(row.size());
      out = CMat::Zero(rows, cols);
    } else if (static_cast<int>(row.size()) != cols) {
      fail(path, "ragged rows");
    }
    for (int c = 0; c < cols; ++c) {
      const json& e = row.at(c);
      if (e.is_number()) {
        out(r, c) = e.get<double>();
      } else if (e.is_array() && e.size() == 2 && e.at(0).is_number() &&
                 e.at(1).is_number()) {
        out(r, c) = cxd(e.at(0).get<double>(), e.at(1).get<double>());
      } else {
        fail(path, "matrix entries must be numbers or [re, im] pairs");
      }
    }
  }
  return out;
}

BilinearSystem load_custom_system(
    const std::string& file, std::vector<std::pair<double, double>>& bounds) {
  std::ifstream in(file);
  if (!in) throw ConfigError("custom_file: cannot read " + file);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("custom_file: invalid JSON in " + file + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("custom_file: expected a JSON object");
  std::vector<std::string> unknown;
  collect_unknown_keys(
      j, "custom_file",
      {"h0", "controls", "projector", "target", "initial", "bounds"}, unknown);
  if (!unknown.empty()) {
    std::string msg = "unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  for (const char* key : {"h0", "controls", "projector", "target"}) {
    if (!j.contains(key)) {
      throw ConfigError(std::string("custom_file.") + key + ": missing");
    }
  }
  BilinearSystem sys;
  sys.h0 = parse_complex_matrix(j.at("h0"), "custom_file.h0");
  if (!j.at("controls").is_array() || j.at("controls").empty()) {
    fail("custom_file.controls", "expected a non-empty array of matrices");
  }
  for (std::size_t k = 0; k < j.at("controls").size(); ++k) {
    sys.controls.push_back(
        parse_complex_matrix(j.at("controls").at(k),
                             "custom_file.controls[" + std::to_string(k) + "]"));
  }
  sys.projector =
      parse_complex_matrix(j.at("projector"), "custom_file.projector");
  sys.target = parse_complex_matrix(j.at("target"), "custom_file.target");
  sys.initial = j.contains("initial")
                    ? parse_complex_matrix(j.at("initial"), "custom_file.initial")
                    : CMat(CMat::Identity(sys.h0.rows(), sys.h0.cols()));
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    if (!b.is_array()) fail("custom_file.bounds", "expected an array");
    bounds.clear();
    for (const json& e : b) {
      if (!e.is_array() || e.size() != 2 || !e.at(0).is_number() ||
          !e.at(1).is_number()) {
        fail("custom_file.bounds", "entries must be [min, max] pairs");
      }
      bounds.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    }
  }
  return sys;
}

}  // namespace

TransmonParams TransmonConfig::to_params() const {
  TransmonParams p;
  p.w1 = kTwoPi * w1_ghz;
  p.w2 = kTwoPi * w2_ghz;
  p.wr = kTwoPi * wr_ghz;
  p.g1 = kTwoPi * g1_ghz;
  p.g2 = kTwoPi * g2_ghz;
  p.d1 = kTwoPi * anharmonicity1_ghz;
  p.d2 = kTwoPi * anharmonicity2_ghz;
  p.omega_max = kTwoPi * drive_bound_ghz;
  p.levels = levels;
  return p;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  std::vector<std::string> unknown;
  collect_unknown_keys(
      j, "",
      {"model", "durations", "duration", "dt", "steps", "modes", "seeds",
       "base_seed", "output_dir", "workers", "backend", "taylor_order",
       "optimizer", "transmon", "custom_file", "control_bounds"},
      unknown);
  if (j.contains("optimizer")) {
    if (!j.at("optimizer").is_object()) fail("optimizer", "expected an object");
    collect_unknown_keys(
        j.at("optimizer"), "optimizer",
        {"constraint_style", "optimality_tol", "step_tol", "max_iterations",
         "penalty_sigma", "fixed_step", "barrier_mu0", "barrier_reduction",
         "barrier_mu_floor", "barrier_kappa", "barrier_inner_budget",
         "fraction_to_boundary", "armijo_c1", "backtrack_rho",
         "max_backtracks"},
        unknown);
  }
  if (j.contains("transmon")) {
    if (!j.at("transmon").is_object()) fail("transmon", "expected an object");
    collect_unknown_keys(j.at("transmon"), "transmon",
                         {"w1_ghz", "w2_ghz", "wr_ghz", "g1_ghz", "g2_ghz",
                          "anharmonicity1_ghz", "anharmonicity2_ghz",
                          "drive_bound_ghz", "levels"},
                         unknown);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  ExperimentConfig cfg;
  cfg.model = get_string(j, "model", "", cfg.model);
  if (cfg.model != "transmon" && cfg.model != "two-level" &&
      cfg.model != "custom") {
    fail("model", "must be one of transmon, two-level, custom");
  }

  if (j.contains("duration") && j.contains("durations")) {
    fail("duration", "give either duration or durations, not both");
  }
  if (j.contains("duration")) {
    const json& v = j.at("duration");
    if (!v.is_number()) fail("duration", "expected a number");
    cfg.durations = {v.get<double>()};
  } else if (j.contains("durations")) {
    const json& v = j.at("durations");
    if (!v.is_array() || v.empty()) {
      fail("durations", "expected a non-empty array of numbers");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v.at(i).is_number()) {
        fail("durations[" + std::to_string(i) + "]", "expected a number");
      }
      cfg.durations.push_back(v.at(i).get<double>());
    }
  } else {
    fail("duration", "missing gate duration(s)");
  }
  for (std::size_t i = 0; i < cfg.durations.size(); ++i) {
    if (!(cfg.durations[i] > 0.0)) {
      fail("durations[" + std::to_string(i) + "]", "must be positive");
    }
  }

  if (j.contains("dt") && j.contains("steps")) {
    fail("dt", "give either dt or steps, not both");
  }
  if (j.contains("steps")) {
    cfg.steps = static_cast<int>(get_integer(j, "steps", "", 0));
    if (cfg.steps < 1) fail("steps", "must be >= 1");
    cfg.dt = 0.0;
  } else if (j.contains("dt")) {
    cfg.dt = get_number(j, "dt", "", cfg.dt);
    check_positive(cfg.dt, "dt");
  } else if (cfg.model == "two-level") {
    cfg.steps = 2;  // default grid for the two-level example
    cfg.dt = 0.0;
  }

  if (j.contains("modes")) {
    const json& v = j.at("modes");
    if (!v.is_array() || v.empty()) {
      fail("modes", "expected a non-empty array of mode names");
    }
    cfg.modes.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v.at(i).is_string()) {
        fail("modes[" + std::to_string(i) + "]", "expected a string");
      }
      const std::string name = v.at(i).get<std::string>();
      try {
        mode_from_string(name);
      } catch (const std::invalid_argument& e) {
        fail("modes[" + std::to_string(i) + "]", e.what());
      }
      cfg.modes.push_back(name);
    }
  }

  cfg.seeds = static_cast<int>(get_integer(j, "seeds", "", cfg.seeds));
  if (cfg.seeds < 1) fail("seeds", "must be >= 1");
  cfg.base_seed = static_cast<std::uint64_t>(
      get_integer(j, "base_seed", "", static_cast<long>(cfg.base_seed)));
  cfg.output_dir = get_string(j, "output_dir", "", cfg.output_dir);
  cfg.workers = static_cast<int>(get_integer(j, "workers", "", cfg.workers));
  if (cfg.workers < 1) fail("workers", "must be >= 1");
  cfg.backend = get_string(j, "backend", "", cfg.backend);
  try {
    backend_from_string(cfg.backend);
  } catch (const std::invalid_argument& e) {
    fail("backend", e.what());
  }
  cfg.taylor_order =
      static_cast<int>(get_integer(j, "taylor_order", "", cfg.taylor_order));
  if (cfg.taylor_order < 1) fail("taylor_order", "must be >= 1");

  if (j.contains("optimizer")) parse_optimizer(j.at("optimizer"), cfg.optimizer);
  if (j.contains("transmon")) parse_transmon(j.at("transmon"), cfg.transmon);
  cfg.custom_file = get_string(j, "custom_file", "", cfg.custom_file);
  if (cfg.model == "custom" && cfg.custom_file.empty()) {
    fail("custom_file", "required when model = custom");
  }

  if (j.contains("control_bounds")) {
    const json& v = j.at("control_bounds");
    if (!v.is_array()) fail("control_bounds", "expected an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& e = v.at(i);
      if (!e.is_array() || e.size() != 2 || !e.at(0).is_number() ||
          !e.at(1).is_number()) {
        fail("control_bounds[" + std::to_string(i) + "]",
             "expected a [min, max] pair");
      }
      const double lo = e.at(0).get<double>();
      const double hi = e.at(1).get<double>();
      if (!(lo < hi)) {
        fail("control_bounds[" + std::to_string(i) + "]", "min must be < max");
      }
      cfg.control_bounds.emplace_back(lo, hi);
    }
  }

  // validate duration/grid compatibility up front
  for (double t : cfg.durations) resolve_steps(cfg, t);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["model"] = cfg.model;
  j["durations"] = cfg.durations;
  if (cfg.steps > 0) {
    j["steps"] = cfg.steps;
  } else {
    j["dt"] = cfg.dt;
  }
  j["modes"] = cfg.modes;
  j["seeds"] = cfg.seeds;
  j["base_seed"] = cfg.base_seed;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["backend"] = cfg.backend;
  j["taylor_order"] = cfg.taylor_order;
  json opt;
  opt["constraint_style"] = constraint_style_name(cfg.optimizer.constraint_style);
  opt["optimality_tol"] = cfg.optimizer.optimality_tol;
  opt["step_tol"] = cfg.optimizer.step_tol;
  opt["max_iterations"] = cfg.optimizer.max_iterations;
  opt["penalty_sigma"] = cfg.optimizer.penalty_sigma;
  opt["fixed_step"] = cfg.optimizer.fixed_step;
  opt["barrier_mu0"] = cfg.optimizer.barrier_mu0;
  opt["barrier_reduction"] = cfg.optimizer.barrier_reduction;
  opt["barrier_mu_floor"] = cfg.optimizer.barrier_mu_floor;
  opt["barrier_kappa"] = cfg.optimizer.barrier_kappa;
  opt["barrier_inner_budget"] = cfg.optimizer.barrier_inner_budget;
  opt["fraction_to_boundary"] = cfg.optimizer.fraction_to_boundary;
  opt["armijo_c1"] = cfg.optimizer.armijo_c1;
  opt["backtrack_rho"] = cfg.optimizer.backtrack_rho;
  opt["max_backtracks"] = cfg.optimizer.max_backtracks;
  j["optimizer"] = opt;
  json tr;
  tr["w1_ghz"] = cfg.transmon.w1_ghz;
  tr["w2_ghz"] = cfg.transmon.w2_ghz;
  tr["wr_ghz"] = cfg.transmon.wr_ghz;
  tr["g1_ghz"] = cfg.transmon.g1_ghz;
  tr["g2_ghz"] = cfg.transmon.g2_ghz;
  tr["anharmonicity1_ghz"] = cfg.transmon.anharmonicity1_ghz;
  tr["anharmonicity2_ghz"] = cfg.transmon.anharmonicity2_ghz;
  tr["drive_bound_ghz"] = cfg.transmon.drive_bound_ghz;
  tr["levels"] = cfg.transmon.levels;
  j["transmon"] = tr;
  if (!cfg.custom_file.empty()) j["custom_file"] = cfg.custom_file;
  if (!cfg.control_bounds.empty()) {
    json b = json::array();
    for (const auto& [lo, hi] : cfg.control_bounds) b.push_back({lo, hi});
    j["control_bounds"] = b;
  }
  return j.dump(2) + "\n";
}

int resolve_steps(const ExperimentConfig& cfg, double duration) {
  if (cfg.steps > 0) return cfg.steps;
  const double q = duration / cfg.dt;
  const double rounded = std::round(q);
  if (rounded < 1.0 || std::abs(q - rounded) > 1e-9) {
    std::ostringstream msg;
    msg << "durations: dt = " << cfg.dt << " does not divide T = " << duration
        << " into an integer number of steps";
    throw ConfigError(msg.str());
  }
  return static_cast<int>(rounded);
}

ProblemSpec build_problem(const ExperimentConfig& cfg, double duration) {
  ProblemSpec prob;
  prob.steps = resolve_steps(cfg, duration);
  prob.dt = duration / prob.steps;
  prob.backend = backend_from_string(cfg.backend);
  prob.taylor_order = cfg.taylor_order;

  if (cfg.model == "transmon") {
    const TransmonParams params = cfg.transmon.to_params();
    try {
      prob.system = transmon_effective_system(params);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("transmon: ") + e.what());
    }
    prob.bounds = cfg.control_bounds.empty()
                      ? std::vector<std::pair<double, double>>{
                            {-params.omega_max, params.omega_max}}
                      : cfg.control_bounds;
  } else if (cfg.model == "two-level") {
    prob.system = two_level_system();
    prob.bounds = cfg.control_bounds.empty()
                      ? std::vector<std::pair<double, double>>{{-4.0, 4.0}}
                      : cfg.control_bounds;
  } else {
    std::vector<std::pair<double, double>> file_bounds;
    prob.system = load_custom_system(cfg.custom_file, file_bounds);
    prob.bounds = !cfg.control_bounds.empty() ? cfg.control_bounds : file_bounds;
    if (prob.bounds.empty()) {
      throw ConfigError(
          "control_bounds: required for model = custom (in the config or the "
          "matrix file)");
    }
  }

  if (prob.bounds.size() != prob.system.controls.size()) {
    throw ConfigError("control_bounds: need one [min, max] pair per control");
  }
  try {
    prob.system.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return prob;
}

std::vector<OptimizerConfig> resolve_modes(const ExperimentConfig& cfg) {
  std::vector<OptimizerConfig> out;
  for (const std::string& name : cfg.modes) {
    OptimizerConfig mc = cfg.optimizer;
    mc.mode = mode_from_string(name);
    out.push_back(mc);
  }
  return out;
}

}  // namespace qoc
