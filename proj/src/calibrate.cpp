#include "supcal/calibrate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "supcal/errors.hpp"
#include "supcal/parallel.hpp"

namespace supcal {

using Eigen::VectorXd;

LossKind parse_loss_kind(const std::string& s) {
  if (s == "full") return LossKind::Full;
  if (s == "odom") return LossKind::OdomOnly;
  if (s == "ape") return LossKind::APE;
  if (s == "mse") return LossKind::MSE;
  if (s == "innov") return LossKind::Innov;
  throw Error(ErrorCode::InvalidConfig, "unknown loss '" + s + "' (full|odom|ape|mse|innov)");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::Full: return "full";
    case LossKind::OdomOnly: return "odom";
    case LossKind::APE: return "ape";
    case LossKind::MSE: return "mse";
    case LossKind::Innov: return "innov";
  }
  return "?";
}

StepRule parse_step_rule(const std::string& s) {
  if (s == "doubling") return StepRule::Doubling;
  if (s == "spectral") return StepRule::Spectral;
  throw Error(ErrorCode::InvalidConfig, "unknown step rule '" + s + "' (doubling|spectral)");
}

std::string to_string(StepRule r) { return r == StepRule::Spectral ? "spectral" : "doubling"; }

void CalibrationConfig::validate() const {
  if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be at least 1");
  if (!(armijo.c1 > 0.0 && armijo.c1 < 1.0)) throw Error(ErrorCode::InvalidConfig, "armijo c1 must lie in (0, 1)");
  if (!(armijo.shrink > 0.0 && armijo.shrink < 1.0)) throw Error(ErrorCode::InvalidConfig, "armijo shrink must lie in (0, 1)");
  if (!(armijo.eta0 > 0.0)) throw Error(ErrorCode::InvalidConfig, "armijo eta0 must be positive");
  if (armijo.max_backtracks < 0) throw Error(ErrorCode::InvalidConfig, "max_backtracks must be non-negative");
  if (!(grad_tol >= 0.0)) throw Error(ErrorCode::InvalidConfig, "grad_tol must be non-negative");
  if (!(fd_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "fd_step must be positive");
}

namespace {

// Keyframes only matter to the supervisory term.
Problem without_keyframes(const Problem& p) {
  Problem out = p;
  out.filter.keyframes.clear();
  return out;
}

double plain_objective(const Problem& problem, const VectorXd& theta, LossKind kind) {
  const FilterRun fr = run(problem.inputs, problem.meas, problem.model.realize(theta), problem.filter);
  switch (kind) {
    case LossKind::APE: return baseline_ape(fr);
    case LossKind::MSE: return baseline_mse(fr.trajectory, problem.ground_truth);
    case LossKind::Innov: return baseline_innov(fr);
    case LossKind::OdomOnly: return fr.odom_loss;
    case LossKind::Full: break;
  }
  throw Error(ErrorCode::InvalidConfig, "full loss needs the supervisory pass");
}

bool is_baseline(LossKind k) { return k == LossKind::APE || k == LossKind::MSE || k == LossKind::Innov; }

double projected_grad_norm(const NoiseModel& m, const VectorXd& theta, const VectorXd& grad) {
  if (grad.size() == 0) return 0.0;
  return (theta - m.project(theta - grad)).cwiseAbs().maxCoeff();
}

}  // namespace

double objective(const Problem& problem, const VectorXd& theta, LossKind kind) {
  if (kind == LossKind::Full) {
    return total_loss_and_grad(problem, theta, true, DerivativeOptions{}, false).total;
  }
  if (kind == LossKind::MSE && problem.ground_truth.empty()) {
    throw Error(ErrorCode::InvalidConfig, "mse loss needs ground truth");
  }
  return plain_objective(problem.filter.keyframes.empty() ? problem : without_keyframes(problem), theta, kind);
}

ObjectiveEval objective_and_gradient(const Problem& problem, const VectorXd& theta, const CalibrationConfig& cfg) {
  ObjectiveEval out;
  if (!is_baseline(cfg.loss)) {
    const LossReport rep = total_loss_and_grad(problem, theta, cfg.loss == LossKind::Full, cfg.deriv, true);
    out.value = rep.total;
    out.grad = rep.grad_total;
    out.passes = 1;
    return out;
  }
  const Problem pb = problem.filter.keyframes.empty() ? problem : without_keyframes(problem);
  out.value = objective(pb, theta, cfg.loss);
  const int p = static_cast<int>(theta.size());
  out.grad = VectorXd::Zero(p);
  parallel_for(p, cfg.deriv.workers, [&](int j) {
    VectorXd tp = theta, tm = theta;
    tp[j] += cfg.fd_step;
    tm[j] -= cfg.fd_step;
    tp = pb.model.project(tp);
    tm = pb.model.project(tm);
    const double span = tp[j] - tm[j];
    if (span <= 0.0) return;
    out.grad[j] = (objective(pb, tp, cfg.loss) - objective(pb, tm, cfg.loss)) / span;
  });
  out.passes = 1 + 2 * p;
  return out;
}

namespace {

CalibrationResult descend(const CalibrationConfig& cfg, const Problem& problem, const VectorXd& theta0) {
  cfg.validate();
  const NoiseModel& model = problem.model;
  if (theta0.size() != model.size()) throw Error(ErrorCode::DimensionMismatch, "initial theta has the wrong length");
  if (!model.in_bounds(theta0)) throw Error(ErrorCode::BoundsViolation, "initial theta outside the feasible box");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  CalibrationResult res;
  IterationTrace& trace = res.trace;
  VectorXd theta = theta0;
  ObjectiveEval cur = objective_and_gradient(problem, theta, cfg);
  trace.filter_passes += cur.passes;
  double eta_prev = cfg.armijo.eta0;
  VectorXd s_prev, y_prev;
  const double inf = std::numeric_limits<double>::infinity();

  for (int it = 0;; ++it) {
    IterationRecord rec;
    rec.iter = it;
    rec.theta = theta;
    rec.loss = cur.value;
    rec.grad_norm = projected_grad_norm(model, theta, cur.grad);
    if (rec.grad_norm <= cfg.grad_tol) {
      rec.wall_time = elapsed();
      trace.iterations.push_back(rec);
      trace.converged = true;
      trace.stop_reason = "gradient below tolerance";
      break;
    }
    if (it >= cfg.max_iter) {
      rec.wall_time = elapsed();
      trace.iterations.push_back(rec);
      trace.stop_reason = "max_iter reached";
      break;
    }

    // Backtracking; the first trial also carries the gradient since it is usually accepted.
    double eta_start = cfg.armijo.eta0;
    if (it > 0 && cfg.step_rule == StepRule::Spectral) {
      const double sy = s_prev.dot(y_prev);
      if (sy > 0.0) eta_start = std::clamp(s_prev.squaredNorm() / sy, 1e-12, 1e12);
    } else if (it > 0 && cfg.warm_start) {
      eta_start = std::min(cfg.armijo.eta0, 2.0 * eta_prev);
    }
    bool accepted = false;
    ObjectiveEval next;
    VectorXd next_theta;
    int backtracks = 0;
    double eta_used = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double eta = attempt == 0 ? eta_start : 0.5 * eta_start;
      for (int b = 0; b <= cfg.armijo.max_backtracks; ++b, eta *= cfg.armijo.shrink) {
        const VectorXd raw = theta - eta * cur.grad;
        const VectorXd trial = cfg.project_then_evaluate ? model.project(raw) : raw;
        double value = inf;
        ObjectiveEval ev;
        if (model.in_bounds(trial)) {
          try {
            if (b == 0 && attempt == 0) {
              ev = objective_and_gradient(problem, trial, cfg);
              trace.filter_passes += ev.passes;
              value = ev.value;
            } else {
              value = objective(problem, trial, cfg.loss);
              trace.filter_passes += 1;
            }
          } catch (const Error& e) {
            if (!is_numerical(e.code())) throw;
          }
        }
        if (!std::isfinite(value)) value = inf;
        const double decrease = cfg.armijo.c1 * cur.grad.dot(theta - trial);
        if (value <= cur.value - decrease) {
          accepted = true;
          eta_used = eta;
          next_theta = cfg.project_then_evaluate ? trial : model.project(trial);
          if (b == 0 && attempt == 0 && cfg.project_then_evaluate) {
            next = std::move(ev);
          } else {
            next = objective_and_gradient(problem, next_theta, cfg);
            trace.filter_passes += next.passes;
          }
          break;
        }
        ++backtracks;
      }
    }
    rec.backtracks = backtracks;
    if (!accepted) {
      rec.wall_time = elapsed();
      trace.iterations.push_back(rec);
      trace.line_search_stalled = true;
      trace.stop_reason = "line search stalled";
      break;
    }
    rec.step = eta_used;
    rec.wall_time = elapsed();
    trace.iterations.push_back(rec);
    eta_prev = eta_used;
    s_prev = next_theta - theta;
    y_prev = next.grad - cur.grad;
    theta = next_theta;
    cur = std::move(next);
  }
  res.theta = theta;
  res.loss = cur.value;
  return res;
}

}  // namespace

CalibrationResult solve(const CalibrationConfig& cfg, const Problem& problem, const VectorXd& theta0) {
  return descend(cfg, problem, theta0);
}

CalibrationResult run_baseline(const CalibrationConfig& cfg, const Problem& problem, const VectorXd& theta0) {
  if (!is_baseline(cfg.loss)) throw Error(ErrorCode::InvalidConfig, "run_baseline needs loss ape, mse or innov");
  return descend(cfg, problem, theta0);
}

}  // namespace supcal
