#include "qoc/optimize.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qoc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// minimal diagonal offset added on top of |lambda_min| when the barrier
// Hessian is not positive definite
constexpr double kShiftEpsilon = 1e-8;
// floor used by the adaptive damping term lm_state * max(|lambda_min|, floor)
constexpr double kLmFloor = 1e-2;
constexpr double kLmZeroBelow = 1e-3;

struct CountingObjective {
  const Objective& fn;
  long nf = 0, ng = 0, nh = 0;

  ObjectiveEval operator()(const RVec& x, int order) {
    ++nf;
    if (order >= 1) ++ng;
    if (order >= 2) ++nh;
    return fn(x, order);
  }
};

bool strictly_inside(const RVec& x, const RVec& lo, const RVec& hi) {
  for (int i = 0; i < x.size(); ++i) {
    if (std::isfinite(lo(i)) && x(i) <= lo(i)) return false;
    if (std::isfinite(hi(i)) && x(i) >= hi(i)) return false;
  }
  return true;
}

// -mu * sum over finite-bounded components of log(x-lo) + log(hi-x)
double barrier_term(const RVec& x, const RVec& lo, const RVec& hi, double mu) {
  if (mu == 0.0) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    if (std::isfinite(lo(i))) acc += std::log(x(i) - lo(i));
    if (std::isfinite(hi(i))) acc += std::log(hi(i) - x(i));
  }
  return -mu * acc;
}

RVec barrier_gradient(const RVec& g, const RVec& x, const RVec& lo,
                      const RVec& hi, double mu) {
  RVec out = g;
  if (mu == 0.0) return out;
  for (int i = 0; i < x.size(); ++i) {
    if (std::isfinite(lo(i))) out(i) -= mu / (x(i) - lo(i));
    if (std::isfinite(hi(i))) out(i) += mu / (hi(i) - x(i));
  }
  return out;
}

// infinity norm of the projected-gradient step, the box KKT measure
double projected_gradient_norm(const RVec& x, const RVec& g, const RVec& lo,
                               const RVec& hi) {
  double out = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double moved = std::min(std::max(x(i) - g(i), lo(i)), hi(i));
    out = std::max(out, std::abs(moved - x(i)));
  }
  return out;
}

// largest step along p keeping tau of the distance to every active wall
double fraction_to_boundary_cap(const RVec& x, const RVec& p, const RVec& lo,
                                const RVec& hi, double tau) {
  double amax = kInf;
  for (int i = 0; i < x.size(); ++i) {
    if (p(i) < 0.0 && std::isfinite(lo(i))) {
      amax = std::min(amax, tau * (x(i) - lo(i)) / -p(i));
    } else if (p(i) > 0.0 && std::isfinite(hi(i))) {
      amax = std::min(amax, tau * (hi(i) - x(i)) / p(i));
    }
  }
  return amax;
}

// Shared barrier/unconstrained engine for the Newton and BFGS modes. With
// barrier disabled (mu0 = 0, infinite bounds) the same loop is plain damped
// Newton / BFGS with Armijo backtracking.
OptimizationReport barrier_engine(CountingObjective& obj, const RVec& x0,
                                  const RVec& lo, const RVec& hi,
                                  const OptimizerConfig& cfg, bool newton) {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = static_cast<int>(x0.size());
  const bool barrier = cfg.constraint_style == ConstraintStyle::Barrier;

  OptimizationReport rep;
  RVec x = x0;
  if (barrier) {
    for (int i = 0; i < n; ++i) {
      const double width = hi(i) - lo(i);
      const double margin = 1e-9 * (std::isfinite(width) ? width : 1.0);
      if (std::isfinite(lo(i)) && x(i) < lo(i) + margin) {
        x(i) = lo(i) + margin;
        rep.start_clipped = true;
      }
      if (std::isfinite(hi(i)) && x(i) > hi(i) - margin) {
        x(i) = hi(i) - margin;
        rep.start_clipped = true;
      }
    }
  }

  double mu = barrier ? cfg.barrier_mu0 : 0.0;
  int inner_iters = 0;
  double lm_state = 0.0;
  RMat bfgs_b = RMat::Identity(n, n);

  const int order = newton ? 2 : 1;
  ObjectiveEval cur = obj(x, order);
  if (!std::isfinite(cur.f)) {
    throw std::runtime_error("minimize: objective returned a non-finite value at the start");
  }
  RVec best_x = x;
  double best_f = cur.f;
  rep.reason = TerminationReason::MaxIterations;
  if (cfg.record_iterates) rep.iterates.push_back(x);

  int it = 0;
  const bool start_at_target = cur.f <= cfg.target_f;
  if (start_at_target) rep.reason = TerminationReason::Optimality;
  while (!start_at_target && it < cfg.max_iterations) {
    ++it;
    const RVec gphi = barrier_gradient(cur.grad, x, lo, hi, mu);

    // search direction
    RVec p;
    if (newton) {
      RMat hphi = cur.hess;
      if (mu > 0.0) {
        for (int i = 0; i < n; ++i) {
          double add = 0.0;
          if (std::isfinite(lo(i))) {
            const double s = x(i) - lo(i);
            add += mu / (s * s);
          }
          if (std::isfinite(hi(i))) {
            const double s = hi(i) - x(i);
            add += mu / (s * s);
          }
          hphi(i, i) += add;
        }
      }
      Eigen::SelfAdjointEigenSolver<RMat> eig(hphi,
                                              Eigen::EigenvaluesOnly);
      const double lmin = eig.eigenvalues().minCoeff();
      double shift = 0.0;
      if (lmin <= 0.0) {
        shift = std::abs(lmin) + kShiftEpsilon;
        if (lm_state > 0.0) {
          shift += lm_state * std::max(std::abs(lmin), kLmFloor);
        }
      }
      if (shift > 0.0) hphi.diagonal().array() += shift;
      Eigen::LDLT<RMat> ldlt(hphi);
      if (ldlt.info() == Eigen::Success) {
        p = ldlt.solve(-gphi);
      } else {
        p = -gphi;
      }
      if (p.dot(gphi) >= 0.0) p = -gphi;
    } else {
      Eigen::LLT<RMat> llt(bfgs_b);
      if (llt.info() == Eigen::Success) {
        p = llt.solve(-gphi);
      } else {
        bfgs_b = RMat::Identity(n, n);
        p = -gphi;
      }
      if (p.dot(gphi) >= 0.0) {
        bfgs_b = RMat::Identity(n, n);
        p = -gphi;
      }
    }

    const double gp = gphi.dot(p);
    const double phi0 = cur.f + barrier_term(x, lo, hi, mu);

    double alpha = 1.0;
    if (barrier) {
      alpha = std::min(
          1.0, fraction_to_boundary_cap(x, p, lo, hi, cfg.fraction_to_boundary));
    }

    // Armijo backtracking with a strict-feasibility precheck (trial points
    // outside the open box are rejected without an objective evaluation)
    bool accepted = false;
    int bt = 0;
    RVec xt;
    double ft = 0.0;
    while (bt <= cfg.max_backtracks) {
      xt = x + alpha * p;
      if (!barrier || strictly_inside(xt, lo, hi)) {
        ft = obj(xt, 0).f;
        if (std::isfinite(ft)) {
          const double phit = ft + barrier_term(xt, lo, hi, mu);
          if (phit <= phi0 + cfg.armijo_c1 * alpha * gp) {
            accepted = true;
            break;
          }
        }
      }
      alpha *= cfg.backtrack_rho;
      ++bt;
    }
    if (!accepted) {
      rep.reason = TerminationReason::LineSearchFailure;
      break;
    }

    if (newton) {
      if (bt >= cfg.lm_grow_backtracks) {
        lm_state = std::max(lm_state * cfg.lm_grow, 1.0);
      } else if (bt == 0) {
        lm_state /= cfg.lm_decay;
        if (lm_state < kLmZeroBelow) lm_state = 0.0;
      }
    }

    const double step_inf = (alpha * p).cwiseAbs().maxCoeff();
    const RVec x_prev = x;
    const RVec gphi_prev = gphi;
    x = xt;
    cur = obj(x, order);
    if (!std::isfinite(cur.f)) {
      throw std::runtime_error("minimize: objective returned a non-finite value");
    }
    if (cur.f < best_f) {
      best_f = cur.f;
      best_x = x;
    }
    rep.history.push_back(best_f);
    if (cfg.record_iterates) rep.iterates.push_back(x);

    if (cur.f <= cfg.target_f) {
      rep.reason = TerminationReason::Optimality;
      break;
    }

    // barrier gradient at the new point under the *current* mu: used both
    // for the BFGS curvature pair and for the mu-advance gate
    const RVec gphi_new = barrier_gradient(cur.grad, x, lo, hi, mu);
    if (!newton) {
      const RVec s = x - x_prev;
      const RVec y = gphi_new - gphi_prev;
      bfgs_b = bfgs_update(bfgs_b, s, y, cfg.curvature_skip_tol);
    }

    const double pg = projected_gradient_norm(x, cur.grad, lo, hi);
    if (pg <= cfg.optimality_tol) {
      rep.reason = TerminationReason::Optimality;
      break;
    }
    if (step_inf <= cfg.step_tol) {
      rep.reason = TerminationReason::StepSize;
      break;
    }

    if (barrier && mu > cfg.barrier_mu_floor) {
      ++inner_iters;
      const double inner_opt = gphi_new.cwiseAbs().maxCoeff();
      if (inner_opt < cfg.barrier_kappa * mu ||
          inner_iters >= cfg.barrier_inner_budget) {
        mu = std::max(mu * cfg.barrier_reduction, cfg.barrier_mu_floor);
        inner_iters = 0;
        if (!newton) bfgs_b = RMat::Identity(n, n);
      }
    }
  }

  rep.final_x = best_x;
  rep.final_f = best_f;
  rep.iterations = it;
  rep.infidelity_evaluations = obj.nf;
  rep.gradient_evaluations = obj.ng;
  rep.hessian_evaluations = obj.nh;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return rep;
}

}  // namespace

Mode mode_from_string(const std::string& name) {
  if (name == "newton-exact-hessian") return Mode::NewtonExactHessian;
  if (name == "bfgs") return Mode::Bfgs;
  if (name == "gradient-descent") return Mode::GradientDescent;
  throw std::invalid_argument("unknown optimizer mode: " + name);
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::NewtonExactHessian:
      return "newton-exact-hessian";
    case Mode::Bfgs:
      return "bfgs";
    case Mode::GradientDescent:
      return "gradient-descent";
  }
  return "?";
}

ConstraintStyle constraint_style_from_string(const std::string& name) {
  if (name == "barrier") return ConstraintStyle::Barrier;
  if (name == "penalty") return ConstraintStyle::Penalty;
  if (name == "none") return ConstraintStyle::None;
  throw std::invalid_argument("unknown constraint style: " + name);
}

std::string constraint_style_name(ConstraintStyle style) {
  switch (style) {
    case ConstraintStyle::Barrier:
      return "barrier";
    case ConstraintStyle::Penalty:
      return "penalty";
    case ConstraintStyle::None:
      return "none";
  }
  return "?";
}

std::string termination_name(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::Optimality:
      return "optimality";
    case TerminationReason::StepSize:
      return "step";
    case TerminationReason::MaxIterations:
      return "max-iter";
    case TerminationReason::LineSearchFailure:
      return "line-search-failure";
    case TerminationReason::Divergence:
      return "divergence";
  }
  return "?";
}

RMat bfgs_update(const RMat& b, const RVec& s, const RVec& y,
                 double curvature_skip_tol, bool* skipped) {
  if (b.rows() != s.size() || s.size() != y.size()) {
    throw std::invalid_argument("bfgs_update: dimension mismatch");
  }
  if (skipped) *skipped = false;
  const double ys = y.dot(s);
  if (ys <= curvature_skip_tol * s.norm() * y.norm()) {
    if (skipped) *skipped = true;
    return b;
  }
  const RVec bs = b * s;
  const double sbs = s.dot(bs);
  RMat out = b;
  out += (y * y.transpose()) / ys;
  out -= (bs * bs.transpose()) / sbs;
  return out;
}

LineSearchResult line_search(const std::function<double(const RVec&)>& f,
                             const RVec& x, const RVec& p, const RVec& g,
                             double f0, double alpha0,
                             const OptimizerConfig& cfg) {
  const double gp = g.dot(p);
  if (gp >= 0.0) {
    throw std::invalid_argument("line_search: p is not a descent direction");
  }
  LineSearchResult res;
  double alpha = alpha0;
  for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
    const double ft = f(x + alpha * p);
    if (std::isfinite(ft) && ft <= f0 + cfg.armijo_c1 * alpha * gp) {
      res.alpha = alpha;
      res.backtracks = bt;
      res.success = true;
      return res;
    }
    alpha *= cfg.backtrack_rho;
  }
  res.backtracks = cfg.max_backtracks + 1;
  return res;
}

Objective penalty_wrap(const Objective& objective, const RVec& lo,
                       const RVec& hi, double sigma) {
  if (sigma <= 0.0) {
    throw std::invalid_argument("penalty_wrap: sigma must be positive");
  }
  return [objective, lo, hi, sigma](const RVec& x, int order) {
    ObjectiveEval out = objective(x, order);
    for (int i = 0; i < x.size(); ++i) {
      double viol = 0.0;
      if (x(i) < lo(i)) {
        viol = x(i) - lo(i);
      } else if (x(i) > hi(i)) {
        viol = x(i) - hi(i);
      }
      if (viol != 0.0) {
        out.f += sigma * viol * viol;
        if (order >= 1) out.grad(i) += 2.0 * sigma * viol;
        if (order >= 2) out.hess(i, i) += 2.0 * sigma;
      }
    }
    return out;
  };
}

OptimizationReport minimize(const Objective& objective, const RVec& x0,
                            const RVec& lo, const RVec& hi,
                            const OptimizerConfig& cfg) {
  if (lo.size() != x0.size() || hi.size() != x0.size()) {
    throw std::invalid_argument("minimize: bounds dimension mismatch");
  }
  if (cfg.mode == Mode::GradientDescent) {
    return gradient_descent_fixed(objective, x0, cfg);
  }
  const bool newton = cfg.mode == Mode::NewtonExactHessian;
  if (cfg.constraint_style == ConstraintStyle::Penalty) {
    const Objective wrapped = penalty_wrap(objective, lo, hi, cfg.penalty_sigma);
    CountingObjective counting{wrapped};
    const RVec inf_lo = RVec::Constant(x0.size(), -kInf);
    const RVec inf_hi = RVec::Constant(x0.size(), kInf);
    return barrier_engine(counting, x0, inf_lo, inf_hi, cfg, newton);
  }
  if (cfg.constraint_style == ConstraintStyle::None) {
    CountingObjective counting{objective};
    const RVec inf_lo = RVec::Constant(x0.size(), -kInf);
    const RVec inf_hi = RVec::Constant(x0.size(), kInf);
    return barrier_engine(counting, x0, inf_lo, inf_hi, cfg, newton);
  }
  CountingObjective counting{objective};
  return barrier_engine(counting, x0, lo, hi, cfg, newton);
}

OptimizationReport gradient_descent_fixed(const Objective& objective,
                                          const RVec& x0,
                                          const OptimizerConfig& cfg) {
  if (cfg.fixed_step <= 0.0) {
    throw std::invalid_argument(
        "gradient_descent_fixed: fixed_step must be positive");
  }
  const auto t_start = std::chrono::steady_clock::now();
  CountingObjective obj{objective};

  OptimizationReport rep;
  RVec x = x0;
  ObjectiveEval cur = obj(x, 1);
  RVec best_x = x;
  double best_f = cur.f;
  double prev_f = cur.f;
  int rising = 0;
  rep.reason = TerminationReason::MaxIterations;
  if (cfg.record_iterates) rep.iterates.push_back(x);

  int it = 0;
  const bool start_at_target = cur.f <= cfg.target_f;
  if (start_at_target) rep.reason = TerminationReason::Optimality;
  while (!start_at_target && it < cfg.max_iterations) {
    ++it;
    const RVec step = cfg.fixed_step * cur.grad;
    x -= step;
    cur = obj(x, 1);
    if (!std::isfinite(cur.f)) {
      rep.reason = TerminationReason::Divergence;
      break;
    }
    if (cur.f < best_f) {
      best_f = cur.f;
      best_x = x;
    }
    rep.history.push_back(best_f);
    if (cfg.record_iterates) rep.iterates.push_back(x);

    if (cur.f <= cfg.target_f) {
      rep.reason = TerminationReason::Optimality;
      break;
    }

    if (cur.f > prev_f) {
      if (++rising >= 10) {
        rep.reason = TerminationReason::Divergence;
        break;
      }
    } else {
      rising = 0;
    }
    prev_f = cur.f;

    if (cur.grad.cwiseAbs().maxCoeff() <= cfg.optimality_tol) {
      rep.reason = TerminationReason::Optimality;
      break;
    }
    if (step.cwiseAbs().maxCoeff() <= cfg.step_tol) {
      rep.reason = TerminationReason::StepSize;
      break;
    }
  }

  rep.final_x = best_x;
  rep.final_f = best_f;
  rep.iterations = it;
  rep.infidelity_evaluations = obj.nf;
  rep.gradient_evaluations = obj.ng;
  rep.hessian_evaluations = obj.nh;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return rep;
}

}  // namespace qoc
