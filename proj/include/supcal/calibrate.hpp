#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "supcal/derivative_filter.hpp"
#include "supcal/losses.hpp"
#include "supcal/pipeline.hpp"

namespace supcal {

enum class LossKind { Full, OdomOnly, APE, MSE, Innov };

LossKind parse_loss_kind(const std::string& s);
std::string to_string(LossKind k);

// Initial trial step of each line search after the first iteration.
enum class StepRule { Doubling, Spectral };

StepRule parse_step_rule(const std::string& s);
std::string to_string(StepRule r);

struct ArmijoConfig {
  double c1 = 1e-4;
  double shrink = 0.5;
  double eta0 = 1.0;
  int max_backtracks = 30;
};

struct CalibrationConfig {
  LossKind loss = LossKind::Full;
  int max_iter = 100;
  double grad_tol = 1e-4;  // on the inf-norm of the projected gradient
  ArmijoConfig armijo;
  double fd_step = 1e-4;   // baselines only
  std::uint64_t seed = 0;
  // Trial points are projected before they are evaluated; false projects after acceptance instead.
  bool project_then_evaluate = true;
  // Next iteration starts its line search from twice the last accepted step (capped at eta0).
  bool warm_start = true;
  // Spectral: Barzilai-Borwein ratio s's / s'y from the last accepted step, eta0 when s'y <= 0.
  StepRule step_rule = StepRule::Spectral;
  DerivativeOptions deriv;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  Eigen::VectorXd theta;   // iterate the record belongs to
  double loss = 0.0;
  double grad_norm = 0.0;  // inf-norm of the projected gradient
  double step = 0.0;       // accepted eta, 0 when no step was taken
  int backtracks = 0;
  double wall_time = 0.0;  // seconds since solve started
};

struct IterationTrace {
  std::vector<IterationRecord> iterations;
  bool converged = false;
  bool line_search_stalled = false;
  std::string stop_reason;
  int filter_passes = 0;
};

struct CalibrationResult {
  Eigen::VectorXd theta;
  double loss = 0.0;
  IterationTrace trace;
};

// Scalar objective of the chosen kind; MSE needs problem.ground_truth.
double objective(const Problem& problem, const Eigen::VectorXd& theta, LossKind kind);

// Analytic gradient for Full / OdomOnly, central differences (projected probes) otherwise.
struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  int passes = 0;
};
ObjectiveEval objective_and_gradient(const Problem& problem, const Eigen::VectorXd& theta,
                                     const CalibrationConfig& cfg);

// Projected gradient descent with Armijo backtracking.
CalibrationResult solve(const CalibrationConfig& cfg, const Problem& problem, const Eigen::VectorXd& theta0);
// Same loop with finite-difference gradients; cfg.loss must be APE, MSE or Innov.
CalibrationResult run_baseline(const CalibrationConfig& cfg, const Problem& problem, const Eigen::VectorXd& theta0);

}  // namespace supcal
