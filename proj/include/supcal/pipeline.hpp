#pragma once

#include <Eigen/Core>
#include <vector>

#include "supcal/derivative_filter.hpp"
#include "supcal/noise_param.hpp"
#include "supcal/state_filter.hpp"

namespace supcal {

// One calibration or evaluation window.
struct Problem {
  std::vector<ImuInput> inputs;  // inputs[k] moves step k to k+1
  MeasurementStream meas;
  FilterConfig filter;
  NoiseModel model;
  std::vector<lie::GroupElement> ground_truth;  // optional, one per step

  int steps() const { return static_cast<int>(inputs.size()); }
};

struct PassOptions {
  bool derivatives = false;
  DerivativeOptions deriv;
  bool keep_records = false;
  bool keep_step_terms = false;
};

struct PassResult {
  FilterRun run;
  SensitivityBank bank;
  Eigen::VectorXd odom_grad;
  std::vector<StepSensitivity> step_terms;
};

// Filter and, when asked, the sensitivity recursion in lockstep.
PassResult run_pass(const Problem& problem, const Eigen::VectorXd& theta, const PassOptions& opt);

}  // namespace supcal
