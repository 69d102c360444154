#include "supcal/config.hpp"

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <set>

#include "supcal/errors.hpp"

namespace supcal {

using nlohmann::json;
namespace fs = std::filesystem;

Mode parse_mode(const std::string& s) {
  if (s == "simulate") return Mode::Simulate;
  if (s == "calibrate") return Mode::Calibrate;
  if (s == "gradcheck") return Mode::Gradcheck;
  if (s == "evaluate") return Mode::Evaluate;
  if (s == "montecarlo") return Mode::MonteCarlo;
  throw Error(ErrorCode::InvalidConfig, "unknown mode '" + s + "'");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Simulate: return "simulate";
    case Mode::Calibrate: return "calibrate";
    case Mode::Gradcheck: return "gradcheck";
    case Mode::Evaluate: return "evaluate";
    case Mode::MonteCarlo: return "montecarlo";
  }
  return "?";
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + why);
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    if (!ok.count(k)) bad(where.empty() ? k : where + "." + k, "unknown key");
  }
}

double num(const json& j, const std::string& key) {
  if (!j.is_number()) bad(key, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) bad(key, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& key) {
  if (!j.is_boolean()) bad(key, "expected true or false");
  return j.get<bool>();
}

std::string str(const json& j, const std::string& key) {
  if (!j.is_string()) bad(key, "expected a string");
  return j.get<std::string>();
}

Eigen::VectorXd vec(const json& j, const std::string& key) {
  if (!j.is_array()) bad(key, "expected a list of numbers");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = num(j[i], key);
  return v;
}

std::pair<double, double> range(const json& j, const std::string& key) {
  const Eigen::VectorXd v = vec(j, key);
  if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] >= v[0])) bad(key, "expected [lo, hi] with 0 < lo <= hi");
  return {v[0], v[1]};
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

// Variances used when the document leaves them out.
FixedNoise reference_truth() {
  FixedNoise n;
  n.Q_g = Eigen::Matrix3d::Identity() * 1e-6;
  n.Q_a = Eigen::Matrix3d::Identity() * 1e-4;
  n.Sigma_u = Eigen::Vector3d(4.0, 9.0, 1.0).asDiagonal();
  Vector6d b;
  b << 1e-4, 2.5e-3, 1e-4, 1e-6, 1e-6, 2.5e-5;
  n.Sigma_b = b.asDiagonal();
  return n;
}

FixedNoise reference_init() {
  FixedNoise n;
  n.Q_g = Eigen::Matrix3d::Identity() * 0.1;
  n.Q_a = Eigen::Matrix3d::Identity() * 0.1;
  n.Sigma_u = Eigen::Matrix3d::Identity();
  n.Sigma_b = Matrix6d::Identity() * 10.0;
  return n;
}

std::vector<ParamBlock> reference_blocks() {
  ParamBlock gps{{NoiseTarget::Unary}, Scheme::LogDiag};
  gps.upper = 4.0;
  ParamBlock qg{{NoiseTarget::Gyro}, Scheme::LogDiag};
  qg.per_axis = false;
  qg.lower = -16.0;
  ParamBlock qa{{NoiseTarget::Accel}, Scheme::LogDiag};
  qa.per_axis = false;
  qa.lower = -16.0;
  ParamBlock vo{{NoiseTarget::Binary}, Scheme::LogDiag};
  vo.lower = -16.0;
  return {gps, qg, qa, vo};
}

FixedNoise parse_noise_set(const json& j, const std::string& key, FixedNoise base) {
  only_keys(j, key, {"Q_g", "Q_a", "Sigma_u", "Sigma_b"});
  if (j.contains("Q_g")) base.Q_g = parse_covariance(j["Q_g"], 3, key + ".Q_g");
  if (j.contains("Q_a")) base.Q_a = parse_covariance(j["Q_a"], 3, key + ".Q_a");
  if (j.contains("Sigma_u")) base.Sigma_u = parse_covariance(j["Sigma_u"], 3, key + ".Sigma_u");
  if (j.contains("Sigma_b")) base.Sigma_b = parse_covariance(j["Sigma_b"], 6, key + ".Sigma_b");
  return base;
}

ParamBlock parse_block(const json& j, const std::string& key) {
  only_keys(j, key, {"targets", "scheme", "per_axis", "lower", "upper"});
  ParamBlock b;
  if (!j.contains("targets") || !j["targets"].is_array() || j["targets"].empty()) bad(key + ".targets", "expected a non-empty list");
  for (const auto& t : j["targets"]) b.targets.push_back(parse_target(str(t, key + ".targets")));
  if (j.contains("scheme")) b.scheme = parse_scheme(str(j["scheme"], key + ".scheme"));
  if (j.contains("per_axis")) b.per_axis = boolean(j["per_axis"], key + ".per_axis");
  if (j.contains("lower")) b.lower = num(j["lower"], key + ".lower");
  if (j.contains("upper")) b.upper = num(j["upper"], key + ".upper");
  return b;
}

void parse_scenario(const json& j, ScenarioSpec& s) {
  only_keys(j, "scenario", {"rate", "duration_cal", "duration_test", "keyframes", "keyframe_stride", "custom_loops",
                            "loop_sigma", "gps_every", "gps_in_test", "P0", "true_noise", "motion"});
  if (j.contains("rate")) s.rate = num(j["rate"], "scenario.rate");
  if (j.contains("duration_cal")) s.duration_cal = num(j["duration_cal"], "scenario.duration_cal");
  if (j.contains("duration_test")) s.duration_test = num(j["duration_test"], "scenario.duration_test");
  if (j.contains("keyframes")) s.keyframes = integer(j["keyframes"], "scenario.keyframes");
  if (j.contains("keyframe_stride")) s.keyframe_stride = integer(j["keyframe_stride"], "scenario.keyframe_stride");
  if (j.contains("custom_loops")) s.custom_loops = integer(j["custom_loops"], "scenario.custom_loops");
  if (j.contains("loop_sigma")) s.loop_sigma = num(j["loop_sigma"], "scenario.loop_sigma");
  if (j.contains("gps_every")) s.gps_every = integer(j["gps_every"], "scenario.gps_every");
  if (j.contains("gps_in_test")) s.gps_in_test = boolean(j["gps_in_test"], "scenario.gps_in_test");
  if (j.contains("P0")) s.P0 = parse_covariance(j["P0"], 9, "scenario.P0");
  if (j.contains("true_noise")) s.true_noise = parse_noise_set(j["true_noise"], "scenario.true_noise", s.true_noise);
  if (j.contains("motion")) {
    const json& m = j["motion"];
    only_keys(m, "scenario.motion", {"speed", "loop_period", "cal_wobble", "cal_heave", "test_yaw_amp", "test_yaw_freq", "test_surge"});
    MotionProfile& p = s.motion;
    for (auto [name, field] : {std::pair{"speed", &p.speed}, {"loop_period", &p.loop_period}, {"cal_wobble", &p.cal_wobble},
                               {"cal_heave", &p.cal_heave}, {"test_yaw_amp", &p.test_yaw_amp},
                               {"test_yaw_freq", &p.test_yaw_freq}, {"test_surge", &p.test_surge}}) {
      if (m.contains(name)) *field = num(m[name], std::string("scenario.motion.") + name);
    }
  }
}

void parse_calibration(const json& j, CalibrationConfig& c) {
  only_keys(j, "calibration", {"loss", "max_iter", "grad_tol", "fd_step", "project_then_evaluate", "warm_start",
                               "step_rule", "armijo", "workers", "dh_mode"});
  if (j.contains("loss")) c.loss = parse_loss_kind(str(j["loss"], "calibration.loss"));
  if (j.contains("max_iter")) c.max_iter = integer(j["max_iter"], "calibration.max_iter");
  if (j.contains("grad_tol")) c.grad_tol = num(j["grad_tol"], "calibration.grad_tol");
  if (j.contains("fd_step")) c.fd_step = num(j["fd_step"], "calibration.fd_step");
  if (j.contains("project_then_evaluate")) c.project_then_evaluate = boolean(j["project_then_evaluate"], "calibration.project_then_evaluate");
  if (j.contains("warm_start")) c.warm_start = boolean(j["warm_start"], "calibration.warm_start");
  if (j.contains("step_rule")) c.step_rule = parse_step_rule(str(j["step_rule"], "calibration.step_rule"));
  if (j.contains("workers")) c.deriv.workers = integer(j["workers"], "calibration.workers");
  if (j.contains("dh_mode")) c.deriv.dh_mode = parse_dh_mode(str(j["dh_mode"], "calibration.dh_mode"));
  if (j.contains("armijo")) {
    const json& a = j["armijo"];
    only_keys(a, "calibration.armijo", {"c1", "shrink", "eta0", "max_backtracks"});
    if (a.contains("c1")) c.armijo.c1 = num(a["c1"], "calibration.armijo.c1");
    if (a.contains("shrink")) c.armijo.shrink = num(a["shrink"], "calibration.armijo.shrink");
    if (a.contains("eta0")) c.armijo.eta0 = num(a["eta0"], "calibration.armijo.eta0");
    if (a.contains("max_backtracks")) c.armijo.max_backtracks = integer(a["max_backtracks"], "calibration.armijo.max_backtracks");
  }
  c.validate();
}

void parse_dataset(const json& j, DatasetConfig& d, const std::string& base) {
  only_keys(j, "dataset", {"graph", "reference", "dt", "imu_noise", "loop_std", "P0"});
  if (!j.contains("graph")) bad("dataset.graph", "required");
  d.graph = resolve(base, str(j["graph"], "dataset.graph"));
  if (j.contains("reference")) d.reference = resolve(base, str(j["reference"], "dataset.reference"));
  for (const std::string& p : {d.graph, d.reference}) {
    if (!p.empty() && !fs::exists(p)) throw Error(ErrorCode::Io, "dataset file not found: " + p);
  }
  DatasetOptions& o = d.options;
  if (j.contains("dt")) o.dt = num(j["dt"], "dataset.dt");
  if (!(o.dt > 0.0)) bad("dataset.dt", "must be positive");
  if (j.contains("imu_noise")) {
    const json& n = j["imu_noise"];
    only_keys(n, "dataset.imu_noise", {"Q_g", "Q_a"});
    if (n.contains("Q_g")) o.Q_g = parse_covariance(n["Q_g"], 3, "dataset.imu_noise.Q_g");
    if (n.contains("Q_a")) o.Q_a = parse_covariance(n["Q_a"], 3, "dataset.imu_noise.Q_a");
  }
  if (j.contains("loop_std")) {
    const double s = num(j["loop_std"], "dataset.loop_std");
    if (!(s > 0.0)) bad("dataset.loop_std", "must be positive");
    o.split.loop_std = s;
  }
  if (j.contains("P0")) o.P0 = parse_covariance(j["P0"], 9, "dataset.P0");
}

}  // namespace

Eigen::MatrixXd parse_covariance(const json& j, int n, const std::string& key) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  if (j.is_number()) {
    M.diagonal().setConstant(j.get<double>());
  } else if (j.is_array() && !j.empty() && j[0].is_number()) {
    if (static_cast<int>(j.size()) != n) bad(key, "expected " + std::to_string(n) + " diagonal entries");
    M.diagonal() = vec(j, key);
  } else if (j.is_array() && static_cast<int>(j.size()) == n) {
    for (int r = 0; r < n; ++r) {
      const Eigen::VectorXd row = vec(j[r], key);
      if (row.size() != n) bad(key, "expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
      M.row(r) = row.transpose();
    }
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
      bad(key, "matrix is not symmetric");
    }
  } else {
    bad(key, "expected a number, a diagonal list or a square matrix");
  }
  if (!M.allFinite()) bad(key, "non-finite entry");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < 0.0) bad(key, "covariance must be positive semidefinite");
  return M;
}

RunConfig parse_config(const json& doc, const std::string& base_dir) {
  only_keys(doc, "", {"schema_version", "mode", "seed", "scenario", "loop_split", "dataset", "noise", "calibration",
                      "montecarlo", "gradcheck", "evaluate", "output"});
  RunConfig c;
  c.source = doc;
  c.scenario.true_noise = reference_truth();
  c.blocks = reference_blocks();
  c.init = reference_init();
  if (doc.contains("schema_version") && integer(doc["schema_version"], "schema_version") != 1) {
    bad("schema_version", "only version 1 is understood");
  }
  if (doc.contains("mode")) c.mode = parse_mode(str(doc["mode"], "mode"));
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) bad("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("scenario")) parse_scenario(doc["scenario"], c.scenario);
  if (doc.contains("loop_split")) c.loop_split = parse_loop_split(str(doc["loop_split"], "loop_split"));
  if (doc.contains("dataset")) {
    DatasetConfig d;
    parse_dataset(doc["dataset"], d, base_dir);
    c.dataset = d;
  }
  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    only_keys(n, "noise", {"blocks", "fixed", "init", "theta0", "condition_cap"});
    if (n.contains("blocks")) {
      if (!n["blocks"].is_array() || n["blocks"].empty()) bad("noise.blocks", "expected a non-empty list");
      c.blocks.clear();
      for (size_t i = 0; i < n["blocks"].size(); ++i) {
        c.blocks.push_back(parse_block(n["blocks"][i], "noise.blocks[" + std::to_string(i) + "]"));
      }
    }
    if (n.contains("fixed")) c.fixed = parse_noise_set(n["fixed"], "noise.fixed", c.fixed);
    if (n.contains("init")) c.init = parse_noise_set(n["init"], "noise.init", c.init);
    if (n.contains("theta0")) c.theta0 = vec(n["theta0"], "noise.theta0");
    if (n.contains("condition_cap")) c.condition_cap = num(n["condition_cap"], "noise.condition_cap");
  }
  if (doc.contains("calibration")) parse_calibration(doc["calibration"], c.calibration);
  if (doc.contains("montecarlo")) {
    const json& m = doc["montecarlo"];
    only_keys(m, "montecarlo", {"runs", "alpha", "iterations", "workers", "q_range", "u_range", "b_range"});
    MonteCarloSpec& mc = c.montecarlo;
    if (m.contains("runs")) mc.runs = integer(m["runs"], "montecarlo.runs");
    if (m.contains("alpha")) mc.alpha = num(m["alpha"], "montecarlo.alpha");
    if (m.contains("iterations")) mc.iterations = integer(m["iterations"], "montecarlo.iterations");
    if (m.contains("workers")) mc.workers = integer(m["workers"], "montecarlo.workers");
    if (m.contains("q_range")) std::tie(mc.q_lo, mc.q_hi) = range(m["q_range"], "montecarlo.q_range");
    if (m.contains("u_range")) std::tie(mc.u_lo, mc.u_hi) = range(m["u_range"], "montecarlo.u_range");
    if (m.contains("b_range")) std::tie(mc.b_lo, mc.b_hi) = range(m["b_range"], "montecarlo.b_range");
    if (mc.runs < 1) bad("montecarlo.runs", "must be at least 1");
    if (mc.iterations < 1) bad("montecarlo.iterations", "must be at least 1");
  }
  if (doc.contains("gradcheck")) {
    const json& g = doc["gradcheck"];
    only_keys(g, "gradcheck", {"h", "tol", "theta"});
    if (g.contains("h")) c.gradcheck.h = num(g["h"], "gradcheck.h");
    if (g.contains("tol")) c.gradcheck.tol = num(g["tol"], "gradcheck.tol");
    if (g.contains("theta")) c.gradcheck.theta = vec(g["theta"], "gradcheck.theta");
    if (!(c.gradcheck.h > 0.0)) bad("gradcheck.h", "must be positive");
  }
  if (doc.contains("evaluate")) {
    const json& e = doc["evaluate"];
    only_keys(e, "evaluate", {"theta"});
    if (e.contains("theta")) c.evaluate_theta = vec(e["theta"], "evaluate.theta");
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    only_keys(o, "output", {"report", "trajectory", "graph"});
    if (o.contains("report")) c.output.report = resolve(base_dir, str(o["report"], "output.report"));
    if (o.contains("trajectory")) c.output.trajectory = resolve(base_dir, str(o["trajectory"], "output.trajectory"));
    if (o.contains("graph")) c.output.graph = resolve(base_dir, str(o["graph"], "output.graph"));
  }

  // catches block/theta mismatches at load time
  const NoiseModel m = c.model();
  for (const auto* t : {&c.theta0, &c.gradcheck.theta, &c.evaluate_theta}) {
    if (*t && (*t)->size() != m.size()) {
      bad("noise", "theta has " + std::to_string((*t)->size()) + " entries, blocks need " + std::to_string(m.size()));
    }
  }
  if (!m.in_bounds(c.initial_theta())) bad("noise", "initial theta lies outside the bounds");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

NoiseModel RunConfig::model() const {
  NoiseModel m(blocks, fixed);
  m.set_condition_cap(condition_cap);
  return m;
}

Eigen::VectorXd RunConfig::initial_theta() const {
  if (theta0) return *theta0;
  const NoiseModel m = model();
  return m.project(m.encode(init));
}

ScenarioSpec RunConfig::effective_scenario() const {
  ScenarioSpec s = scenario;
  s.loops = loop_split;
  s.seed = seed;
  return s;
}

MonteCarloSpec RunConfig::effective_montecarlo() const {
  MonteCarloSpec mc = montecarlo;
  mc.scenario = effective_scenario();
  mc.optimizer = calibration;
  mc.blocks = blocks;
  mc.fixed = fixed;
  mc.theta0 = initial_theta();
  mc.seed = seed;
  return mc;
}

}  // namespace supcal
