#include "supcal/simulator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "supcal/errors.hpp"
#include "supcal/parallel.hpp"

namespace supcal {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using lie::GroupElement;
using lie::GroupKind;

LoopSplit parse_loop_split(const std::string& s) {
  if (s == "minus" || s == "loop-" || s == "LoopMinus") return LoopSplit::LoopMinus;
  if (s == "plus" || s == "loop+" || s == "LoopPlus") return LoopSplit::LoopPlus;
  if (s == "custom" || s == "Custom") return LoopSplit::Custom;
  throw Error(ErrorCode::InvalidConfig, "unknown loop split '" + s + "' (minus|plus|custom)");
}

std::string to_string(LoopSplit s) {
  switch (s) {
    case LoopSplit::LoopMinus: return "minus";
    case LoopSplit::LoopPlus: return "plus";
    case LoopSplit::Custom: return "custom";
  }
  return "?";
}

int ScenarioSpec::cal_steps() const { return static_cast<int>(std::lround(duration_cal * rate)); }
int ScenarioSpec::test_steps() const { return static_cast<int>(std::lround(duration_test * rate)); }

namespace {

VectorXd gaussian(std::mt19937_64& rng, const MatrixXd& cov) {
  std::normal_distribution<double> nd(0.0, 1.0);
  VectorXd z(cov.rows());
  for (int i = 0; i < z.size(); ++i) z[i] = nd(rng);
  // eigen square root tolerates singular covariances
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
  return es.eigenvectors() * (es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z);
}

void check_spec(const ScenarioSpec& s) {
  if (!(s.rate > 0.0) || 1.0 / s.rate > 1.0) throw Error(ErrorCode::InvalidConfig, "rate must be at least 1 Hz");
  if (s.cal_steps() < 1 || s.test_steps() < 0) throw Error(ErrorCode::InvalidConfig, "bad stage durations");
  if (s.keyframes < 0) throw Error(ErrorCode::InvalidConfig, "negative keyframe count");
  if (s.gps_every < 1) throw Error(ErrorCode::InvalidConfig, "gps_every must be at least 1");
  if (!(s.loop_sigma > 0.0)) throw Error(ErrorCode::InvalidConfig, "loop_sigma must be positive");
}

}  // namespace

std::vector<int> keyframe_schedule(const ScenarioSpec& spec) {
  check_spec(spec);
  std::vector<int> out;
  if (spec.keyframes == 0) return out;
  const int N = spec.cal_steps();
  const int stride = spec.keyframe_stride > 0 ? spec.keyframe_stride : N / spec.keyframes;
  if (stride < 1 || stride * spec.keyframes > N) {
    throw Error(ErrorCode::InvalidConfig, "keyframes do not fit in the calibration stage");
  }
  std::vector<int> all;
  for (int i = 0; i < spec.keyframes; ++i) all.push_back(stride * (i + 1));
  if (spec.loops != LoopSplit::LoopMinus) return all;
  for (size_t i = 1; i < all.size(); i += 2) out.push_back(all[i]);
  return out;
}

std::vector<std::pair<int, int>> loop_pairs(const ScenarioSpec& spec, std::mt19937_64& rng) {
  const std::vector<int> kf = keyframe_schedule(spec);
  std::vector<std::pair<int, int>> pairs;
  for (size_t a = 0; a < kf.size(); ++a)
    for (size_t b = a + 1; b < kf.size(); ++b) pairs.emplace_back(kf[a], kf[b]);
  if (spec.loops != LoopSplit::Custom) return pairs;
  if (spec.custom_loops < 0 || spec.custom_loops > static_cast<int>(pairs.size())) {
    throw Error(ErrorCode::InvalidConfig, "custom loop count exceeds the available pairs");
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(spec.custom_loops);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

Scenario generate(const ScenarioSpec& spec, const NoiseModel& model) {
  check_spec(spec);
  const int Nc = spec.cal_steps(), Nt = spec.test_steps(), N = Nc + Nt;
  const double dt = spec.dt();
  const MotionProfile& mp = spec.motion;
  const FixedNoise& tn = spec.true_noise;
  std::mt19937_64 rng(spec.seed);
  std::mt19937_64 loop_rng(spec.seed ^ 0x5bd1e995a1b2c3d4ULL);

  Scenario sc;
  GroupElement x = GroupElement::se2_3(Matrix3d::Identity(), Vector3d::Zero(), Vector3d(mp.speed, 0.0, 0.0));
  sc.truth.push_back(x);
  std::vector<ImuInput> measured;
  MeasurementStream meas;
  meas.resize(N);
  for (int k = 0; k < N; ++k) {
    const double t = k * dt;
    const Vector3d vb = x.rotation().transpose() * x.velocity();
    Vector3d omega, extra;
    if (k < Nc) {
      omega = Vector3d(mp.cal_wobble * std::sin(0.7 * t), 0.5 * mp.cal_wobble * std::cos(0.5 * t),
                       2.0 * M_PI / mp.loop_period);
      extra = x.rotation().transpose() * Vector3d(0.0, 0.0, mp.cal_heave * std::sin(0.9 * t));
    } else {
      omega = Vector3d(0.05 * std::sin(0.3 * t), 0.05 * std::cos(0.4 * t),
                       mp.test_yaw_amp * std::sin(mp.test_yaw_freq * t));
      extra = Vector3d(mp.test_surge * std::sin(0.5 * t), 0.0, 0.0);
    }
    ImuInput u;
    u.dt = dt;
    u.omega = omega;
    // specific force of a body keeping its body-frame velocity, plus the extra term
    u.accel = omega.cross(vb) + extra - x.rotation().transpose() * kDefaultGravity;
    sc.true_inputs.push_back(u);
    const GroupElement prev = x;
    x = propagate(x, u);
    sc.truth.push_back(x);

    ImuInput um = u;
    um.omega += gaussian(rng, tn.Q_g);
    um.accel += gaussian(rng, tn.Q_a);
    measured.push_back(um);
    const bool gps_stage = k + 1 <= Nc || spec.gps_in_test;
    if (gps_stage && (k + 1) % spec.gps_every == 0) {
      meas.unary[k + 1] = UnaryMeasurement{x.position() + Vector3d(gaussian(rng, tn.Sigma_u))};
    }
    const GroupElement rel = (prev.inverse() * x).to(GroupKind::SE3);
    meas.binary[k + 1] = BinaryMeasurement{lie::exp(GroupKind::SE3, gaussian(rng, tn.Sigma_b)) * rel};
  }

  sc.keyframe_steps = keyframe_schedule(spec);
  std::vector<SupervisoryMeasurement> loops;
  std::vector<int> used;
  for (auto [i, j] : loop_pairs(spec, loop_rng)) {
    SupervisoryMeasurement m;
    m.i = i;
    m.j = j;
    m.psi = Matrix6d::Identity() * spec.loop_sigma * spec.loop_sigma;
    const GroupElement rel = (sc.truth[i].inverse() * sc.truth[j]).to(GroupKind::SE3);
    m.y = lie::exp(GroupKind::SE3, gaussian(loop_rng, m.psi)) * rel;
    loops.push_back(m);
    used.push_back(i);
    used.push_back(j);
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  Problem& cal = sc.calibration;
  cal.inputs.assign(measured.begin(), measured.begin() + Nc);
  cal.meas.resize(Nc);
  for (int k = 1; k <= Nc; ++k) {
    cal.meas.unary[k] = meas.unary[k];
    cal.meas.binary[k] = meas.binary[k];
  }
  cal.meas.supervisory = loops;
  cal.filter.x0 = sc.truth.front();
  cal.filter.P0 = spec.P0;
  cal.filter.keyframes = used;
  cal.filter.max_augmented = std::max(cal.filter.max_augmented, static_cast<int>(used.size()));
  cal.model = model;
  cal.ground_truth.assign(sc.truth.begin(), sc.truth.begin() + Nc + 1);

  Problem& test = sc.test;
  test.inputs.assign(measured.begin() + Nc, measured.end());
  test.meas.resize(Nt);
  for (int k = 1; k <= Nt; ++k) {
    test.meas.unary[k] = meas.unary[Nc + k];
    test.meas.binary[k] = meas.binary[Nc + k];
  }
  test.filter.x0 = sc.truth[Nc];
  test.filter.P0 = spec.P0;
  test.model = model;
  test.ground_truth.assign(sc.truth.begin() + Nc, sc.truth.end());
  return sc;
}

double wasserstein2(const MatrixXd& A, const MatrixXd& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "wasserstein2 needs square matrices of equal size");
  }
  auto psd_sqrt = [](const MatrixXd& M) {
    const MatrixXd S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-12 * scale || (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw Error(ErrorCode::NonPSDInput, "wasserstein2 input is not symmetric PSD");
    }
    return MatrixXd(es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                    es.eigenvectors().transpose());
  };
  const MatrixXd As = psd_sqrt(A);
  psd_sqrt(B);
  const MatrixXd mid = psd_sqrt(As * B * As);
  const double w2 = A.trace() + B.trace() - 2.0 * mid.trace();
  return std::sqrt(std::max(0.0, w2));
}

EvalMetrics evaluate(const VectorXd& theta, const Scenario& scenario, const FixedNoise& true_noise) {
  const Problem& test = scenario.test;
  const RealizedNoise est = test.model.realize(theta);
  EvalMetrics m;
  const FilterRun fr = run(test.inputs, test.meas, est, test.filter);
  m.test_mse = baseline_mse(fr.trajectory, test.ground_truth);

  const std::pair<NoiseTarget, std::string> targets[] = {
      {NoiseTarget::Gyro, "Q_g"}, {NoiseTarget::Accel, "Q_a"}, {NoiseTarget::Unary, "Sigma_u"}, {NoiseTarget::Binary, "Sigma_b"}};
  const MatrixXd truths[] = {true_noise.Q_g, true_noise.Q_a, true_noise.Sigma_u, true_noise.Sigma_b};
  int counted = 0;
  for (int i = 0; i < 4; ++i) {
    if (!test.model.covers(targets[i].first)) continue;
    const double w = wasserstein2(est.target(targets[i].first), truths[i]);
    m.w2[targets[i].second] = w;
    m.avg_w2 += w;
    ++counted;
  }
  if (counted > 0) m.avg_w2 /= counted;

  auto diag = [](const MatrixXd& M) {
    std::vector<double> d(M.rows());
    for (Eigen::Index i = 0; i < M.rows(); ++i) d[i] = M(i, i);
    return d;
  };
  m.table.push_back({"GPS", diag(true_noise.Sigma_u), diag(est.Sigma_u)});
  m.table.push_back({"IMU", {true_noise.Q_g(0, 0), true_noise.Q_a(0, 0)}, {est.Q_g(0, 0), est.Q_a(0, 0)}});
  m.table.push_back({"VO", diag(true_noise.Sigma_b), diag(est.Sigma_b)});
  return m;
}

std::uint64_t run_seed(std::uint64_t seed, int index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

FixedNoise sample_true_noise(const MonteCarloSpec& mc, std::mt19937_64& rng) {
  auto draw = [&](double lo, double hi, int n) {
    std::uniform_real_distribution<double> ud(lo, hi);
    VectorXd d(n);
    for (int i = 0; i < n; ++i) {
      const double s = mc.alpha * ud(rng);
      d[i] = s * s;
    }
    return d;
  };
  FixedNoise n;
  n.Q_g = draw(mc.q_lo, mc.q_hi, 3).asDiagonal();
  n.Q_a = draw(mc.q_lo, mc.q_hi, 3).asDiagonal();
  n.Sigma_u = draw(mc.u_lo, mc.u_hi, 3).asDiagonal();
  n.Sigma_b = draw(mc.b_lo, mc.b_hi, 6).asDiagonal();
  return n;
}

void aggregate(MonteCarloReport& rep) {
  rep.succeeded = 0;
  rep.mean_mse_odom = rep.mean_mse_full = rep.mean_w2_odom = rep.mean_w2_full = 0.0;
  for (const auto& r : rep.runs) {
    if (!r.ok) continue;
    ++rep.succeeded;
    rep.mean_mse_odom += r.odom.test_mse;
    rep.mean_mse_full += r.full.test_mse;
    rep.mean_w2_odom += r.odom.avg_w2;
    rep.mean_w2_full += r.full.avg_w2;
  }
  if (rep.succeeded == 0) return;
  rep.mean_mse_odom /= rep.succeeded;
  rep.mean_mse_full /= rep.succeeded;
  rep.mean_w2_odom /= rep.succeeded;
  rep.mean_w2_full /= rep.succeeded;
}

MonteCarloReport monte_carlo(const MonteCarloSpec& mc) {
  if (mc.runs < 1) throw Error(ErrorCode::InvalidConfig, "monte carlo needs at least one run");
  const NoiseModel model(mc.blocks, mc.fixed);
  if (mc.theta0.size() != model.size()) throw Error(ErrorCode::DimensionMismatch, "theta0 does not match the blocks");
  MonteCarloReport rep;
  rep.runs.resize(mc.runs);
  parallel_for(mc.runs, mc.workers, [&](int i) {
    MonteCarloRun& r = rep.runs[i];
    r.index = i;
    r.seed = run_seed(mc.seed, i);
    std::mt19937_64 rng(r.seed);
    r.true_noise = sample_true_noise(mc, rng);
    try {
      ScenarioSpec spec = mc.scenario;
      spec.true_noise = r.true_noise;
      spec.seed = r.seed;
      const Scenario sc = generate(spec, model);
      CalibrationConfig cfg = mc.optimizer;
      cfg.max_iter = mc.iterations;
      cfg.loss = LossKind::OdomOnly;
      const CalibrationResult odom = solve(cfg, sc.calibration, mc.theta0);
      cfg.loss = LossKind::Full;
      const CalibrationResult full = solve(cfg, sc.calibration, mc.theta0);
      r.odom = evaluate(odom.theta, sc, r.true_noise);
      r.full = evaluate(full.theta, sc, r.true_noise);
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
  });
  aggregate(rep);
  return rep;
}

}  // namespace supcal
