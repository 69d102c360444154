#pragma once

#include <Eigen/Core>
#include <vector>

#include "supcal/noise_param.hpp"
#include "supcal/sensor_models.hpp"
#include "supcal/state_filter.hpp"

namespace supcal {

enum class DhMode { Zero, Analytic, FiniteDiff };

DhMode parse_dh_mode(const std::string& s);

struct DerivativeOptions {
  DhMode dh_mode = DhMode::Analytic;
  double fd_eps = 1e-6;
  int workers = 1;
};

// Per theta component: dP/dtheta_j and d zeta/dtheta_j, where zeta is the
// body-frame error of the true state relative to the estimate. The estimate
// itself therefore moves as X exp(-h dzeta_j).
struct SensitivityBank {
  std::vector<Eigen::MatrixXd> dP;
  std::vector<Eigen::VectorXd> dzeta;

  int size() const { return static_cast<int>(dP.size()); }
};

// What one update contributed, per theta component.
struct StepSensitivity {
  std::vector<Eigen::MatrixXd> dS;
  std::vector<Eigen::VectorXd> dr;
  Eigen::VectorXd odom_grad;  // d/dtheta of 0.5 log|S| + 0.5 r' S^-1 r
};

SensitivityBank initial_bank(int num_params, const AugmentedState& s);

void d_predict(SensitivityBank& bank, const ImuInput& u, const RealizedNoise& noise,
               const DerivativeOptions& opt);

// `s_prior` is the state the record was computed from (frame layout and kinds).
StepSensitivity d_update(SensitivityBank& bank, const StepRecord& rec, const AugmentedState& s_prior,
                         const RealizedNoise& noise, const DerivativeOptions& opt,
                         bool keep_step_terms = false);

// Mirrors maybe_append on the bank after a keyframe was added to `s_after`.
void d_append(SensitivityBank& bank, const AugmentedState& s_after);

// d H / dtheta_j for a record, given the prior-frame error sensitivities.
Eigen::MatrixXd dh_term(const StepRecord& rec, const Eigen::VectorXd& dzeta_odom, DhMode mode,
                        double fd_eps);

}  // namespace supcal
