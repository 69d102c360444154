#pragma once

#include <Eigen/Core>
#include <vector>

#include "supcal/derivative_filter.hpp"
#include "supcal/pipeline.hpp"
#include "supcal/state_filter.hpp"

namespace supcal {

// Additive 2 pi constants are left out of every loss.

double odom_step_loss(const StepRecord& rec);
double odom_step_gradient(const StepRecord& rec, const Eigen::MatrixXd& dS, const Eigen::VectorXd& dr);
double odom_loss(const std::vector<StepRecord>& records);
Eigen::VectorXd grad_odom(const std::vector<StepRecord>& records, const std::vector<StepSensitivity>& steps);

struct LoopBlock {
  int frame_a = 0, frame_b = 0;  // frame indices in the state
  int col_a = 0, col_b = 0;      // column offsets inside the keyframe block
  lie::GroupElement y;
  Vector6d r;
  Eigen::MatrixXd H_a, H_b;
  Matrix6d psi, psi_inv;
  // Rows of P_s H^T C^-1 belonging to frames a and b, restricted to this loop's columns.
  Eigen::MatrixXd Z_a, Z_b;
};

struct SupervisoryAssembly {
  std::vector<LoopBlock> loops;
  int ns = 0;                 // keyframe block dimension
  Eigen::MatrixXd Ps;         // keyframe block of the final covariance
  double logdet_C = 0.0;
  double quad = 0.0;          // v' C^-1 v
  double value = 0.0;
  bool woodbury = false;
  // Gradient ingredients.
  Eigen::MatrixXd HtCinvH;    // H' C^-1 H
  Eigen::VectorXd u;          // H' C^-1 v
  Eigen::VectorXd Psu;        // P_s u
  std::vector<Vector6d> w;    // C^-1 v per loop

  int rows() const { return 6 * static_cast<int>(loops.size()); }
  Eigen::VectorXd v() const;
  Eigen::MatrixXd dense_H() const;
  Eigen::MatrixXd dense_Psi() const;
  Eigen::MatrixXd dense_C() const;
};

constexpr double kPsiFloor = 1e-12;

enum class SupSolver { Auto, Dense, Woodbury };

SupervisoryAssembly sup_assemble(const AugmentedState& s, const std::vector<SupervisoryMeasurement>& loops,
                                 SupSolver solver = SupSolver::Auto);
double sup_loss(const AugmentedState& s, const std::vector<SupervisoryMeasurement>& loops);
Eigen::VectorXd grad_sup(const SupervisoryAssembly& a, const SensitivityBank& bank, const AugmentedState& s,
                         DhMode mode = DhMode::Analytic, double fd_eps = 1e-6);

struct LossReport {
  double odom = 0.0;
  double sup = 0.0;
  double total = 0.0;
  Eigen::VectorXd grad_odom;
  Eigen::VectorXd grad_sup;
  Eigen::VectorXd grad_total;
};

// Full objective: odometry plus supervisory terms; `with_sup` false gives the odometry-only loss.
LossReport total_loss_and_grad(const Problem& problem, const Eigen::VectorXd& theta, bool with_sup,
                               const DerivativeOptions& opt, bool need_grad = true);

// Baseline criteria over a filter run.
double baseline_ape(const FilterRun& run);
double baseline_mse(const std::vector<TrajectoryPoint>& estimate, const std::vector<lie::GroupElement>& truth);
double baseline_innov(const FilterRun& run);

}  // namespace supcal
