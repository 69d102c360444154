#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "supcal/calibrate.hpp"
#include "supcal/noise_param.hpp"
#include "supcal/pipeline.hpp"

namespace supcal {

enum class LoopSplit { LoopMinus, LoopPlus, Custom };

LoopSplit parse_loop_split(const std::string& s);
std::string to_string(LoopSplit s);

// Body-frame motion profile; rates in rad/s, accelerations in m/s^2.
struct MotionProfile {
  double speed = 2.0;           // initial forward speed
  double loop_period = 20.0;    // one full turn over this many seconds in the calibration stage
  double cal_wobble = 0.1;      // roll/pitch rate amplitude
  double cal_heave = 0.3;       // vertical acceleration amplitude
  double test_yaw_amp = 0.15;   // yaw-rate amplitude in the test stage
  double test_yaw_freq = 0.2;
  double test_surge = 0.1;      // forward acceleration amplitude in the test stage
};

struct ScenarioSpec {
  double duration_cal = 20.0;
  double duration_test = 70.0;
  double rate = 100.0;
  FixedNoise true_noise;
  int keyframes = 40;
  int keyframe_stride = 0;  // 0 spreads the keyframes evenly over the calibration stage
  LoopSplit loops = LoopSplit::LoopPlus;
  int custom_loops = 0;     // number of pairs for LoopSplit::Custom
  double loop_sigma = 1e-3;
  int gps_every = 10;       // steps between position fixes
  bool gps_in_test = false;
  Matrix9d P0 = Matrix9d::Identity() * 1e-6;
  MotionProfile motion;
  std::uint64_t seed = 0;

  int cal_steps() const;
  int test_steps() const;
  double dt() const { return 1.0 / rate; }
};

struct Scenario {
  Problem calibration;                   // GPS + VO + loops, ground truth attached
  Problem test;                          // open-loop stage starting at the last calibration state
  std::vector<lie::GroupElement> truth;  // all cal_steps + test_steps + 1 states
  std::vector<ImuInput> true_inputs;     // noise-free
  std::vector<int> keyframe_steps;
};

// Keyframe steps of the calibration stage and the loop pairs drawn from them.
std::vector<int> keyframe_schedule(const ScenarioSpec& spec);
std::vector<std::pair<int, int>> loop_pairs(const ScenarioSpec& spec, std::mt19937_64& rng);

// `model` is attached to both problems.
Scenario generate(const ScenarioSpec& spec, const NoiseModel& model);

// Distance between zero-mean Gaussians with covariances A and B.
double wasserstein2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct SensorRow {
  std::string name;
  std::vector<double> true_values;
  std::vector<double> estimate;
};

struct EvalMetrics {
  double test_mse = 0.0;
  double avg_w2 = 0.0;
  std::map<std::string, double> w2;  // per covariance block
  std::vector<SensorRow> table;      // diagonals per sensor
};

// Test-stage filter with `theta`, MSE against truth and covariance errors against the true noise.
EvalMetrics evaluate(const Eigen::VectorXd& theta, const Scenario& scenario, const FixedNoise& true_noise);

struct MonteCarloSpec {
  int runs = 20;
  double alpha = 1.0;
  // Sampling intervals for beta; true variance = (alpha beta)^2 per diagonal entry.
  double q_lo = 1e-4, q_hi = 2e-4;
  double u_lo = 2e-3, u_hi = 10e-3;
  double b_lo = 1e-4, b_hi = 6e-4;
  int iterations = 20;
  ScenarioSpec scenario;
  CalibrationConfig optimizer;
  std::vector<ParamBlock> blocks;  // parameterization shared by both losses
  FixedNoise fixed;                // targets no block covers
  Eigen::VectorXd theta0;          // identical initialization
  std::uint64_t seed = 0;
  int workers = 1;
};

struct MonteCarloRun {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  FixedNoise true_noise;
  EvalMetrics odom, full;
};

struct MonteCarloReport {
  std::vector<MonteCarloRun> runs;
  int succeeded = 0;
  double mean_mse_odom = 0.0, mean_mse_full = 0.0;
  double mean_w2_odom = 0.0, mean_w2_full = 0.0;
};

// Seed of run i, a function of (seed, i) only.
std::uint64_t run_seed(std::uint64_t seed, int index);
FixedNoise sample_true_noise(const MonteCarloSpec& mc, std::mt19937_64& rng);
MonteCarloReport monte_carlo(const MonteCarloSpec& mc);
// Recomputes the means from the per-run entries.
void aggregate(MonteCarloReport& rep);

}  // namespace supcal
