#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "supcal/lie.hpp"
#include "supcal/noise_param.hpp"
#include "supcal/sensor_models.hpp"

namespace supcal {

// Error convention of the filter: X = X_est * exp(zeta) per frame.
constexpr int kOdomDim = 18;

struct FilterConfig {
  lie::GroupElement x0;
  Matrix9d P0 = Matrix9d::Identity() * 1e-6;
  Eigen::Vector3d gravity = kDefaultGravity;
  // Steps after whose update the current frame is duplicated into the state.
  std::vector<int> keyframes;
  int max_augmented = 64;
  bool pose_only_keyframes = true;
  double innovation_cond_limit = 1e12;
  bool joseph = false;
  // Eigenvalue floor on P every n steps; 0 = only symmetrize.
  int psd_floor_interval = 0;
};

struct MeasurementStream {
  // Indexed by step k; entry 0 is never used.
  std::vector<std::optional<UnaryMeasurement>> unary;
  std::vector<std::optional<BinaryMeasurement>> binary;
  std::vector<SupervisoryMeasurement> supervisory;

  void resize(int steps);
  int steps() const { return static_cast<int>(unary.size()) - 1; }
};

class AugmentedState {
 public:
  std::vector<lie::GroupElement> frames;  // prev, curr, keyframes...
  std::vector<int> keyframe_steps;
  Eigen::MatrixXd P;
  int step = 0;
  double t = 0.0;
  int keyframe_dim = 6;

  int dim() const { return static_cast<int>(P.rows()); }
  int num_keyframes() const { return static_cast<int>(keyframe_steps.size()); }
  int offset(int frame) const { return frame < 2 ? 9 * frame : kOdomDim + keyframe_dim * (frame - 2); }
  int frame_dim(int frame) const { return frame < 2 ? 9 : keyframe_dim; }
  const lie::GroupElement& prev() const { return frames[0]; }
  const lie::GroupElement& curr() const { return frames[1]; }
  // Frame index holding the keyframe recorded at `step`.
  int keyframe_frame(int step) const;
};

struct StepRecord {
  int k = 0;
  bool has_unary = false;
  bool has_binary = false;
  Eigen::VectorXd r;
  Eigen::MatrixXd H;      // m x 18, prediction Jacobian over [prev | curr]
  Eigen::MatrixXd Sigma;  // m x m
  Eigen::MatrixXd S;
  Eigen::MatrixXd W;      // S^-1
  double logdet_S = 0.0;
  Eigen::MatrixXd K;      // n x m
  Eigen::MatrixXd A;      // prior P H0^T
  Eigen::MatrixXd prior_cols;  // prior P[:, 0:18]
  Eigen::VectorXd correction;  // K r
  lie::GroupElement prior_prev, prior_curr;
  std::optional<UnaryMeasurement> unary;
  std::optional<BinaryMeasurement> binary;
  bool appended = false;

  int rows() const { return static_cast<int>(r.size()); }
};

struct TrajectoryPoint {
  int k = 0;
  double t = 0.0;
  lie::GroupElement x;
  double trace_P = 0.0;  // trace of the current-frame block
};

AugmentedState initial_state(const FilterConfig& cfg);
AugmentedState predict(AugmentedState s, const ImuInput& u, const RealizedNoise& noise,
                       const FilterConfig& cfg);
// Stacks the available unary/binary measurement rows; no rows leaves the state unchanged.
std::pair<AugmentedState, StepRecord> update(AugmentedState s, const UnaryMeasurement* unary,
                                             const BinaryMeasurement* binary,
                                             const RealizedNoise& noise, const FilterConfig& cfg);
AugmentedState maybe_append(AugmentedState s, const FilterConfig& cfg, bool* appended = nullptr);

// Innovation pieces only, no state change. Used by the update and by line-search probes.
StepRecord innovation(const AugmentedState& s, const UnaryMeasurement* unary,
                      const BinaryMeasurement* binary, const RealizedNoise& noise,
                      const FilterConfig& cfg);
void apply_correction(AugmentedState& s, const StepRecord& rec, const FilterConfig& cfg);

// Brings P back to exact symmetry; optional eigenvalue floor.
void condition_covariance(Eigen::MatrixXd& P, bool floor_eigenvalues);

struct FilterRun {
  std::vector<TrajectoryPoint> trajectory;  // entry k is the posterior at step k
  AugmentedState final_state;
  std::vector<StepRecord> records;          // filled when requested
  double odom_loss = 0.0;
  double innovation_sq = 0.0;  // sum of |r|^2
  int measured_steps = 0;
};

FilterRun run(const std::vector<ImuInput>& inputs, const MeasurementStream& meas,
              const RealizedNoise& noise, const FilterConfig& cfg, bool keep_records = false);

}  // namespace supcal
