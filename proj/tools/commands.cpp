#include "commands.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>

#include "supcal/errors.hpp"
#include "supcal/report.hpp"

namespace supcal::cli {

using nlohmann::json;
using Eigen::VectorXd;

void apply(RunConfig& cfg, const Overrides& o) {
  if (o.loss) cfg.calibration.loss = parse_loss_kind(*o.loss);
  if (o.max_iter) {
    cfg.calibration.max_iter = *o.max_iter;
    cfg.calibration.validate();
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output.report = *o.out;
  if (o.loop) cfg.loop_split = parse_loop_split(*o.loop);
}

namespace {

// Calibration window plus whatever is needed to score it.
struct Workload {
  Problem calibration;
  std::optional<Scenario> scenario;  // synthetic runs only
  std::optional<FixedNoise> truth;
};

Workload build(const RunConfig& cfg) {
  Workload w;
  const NoiseModel model = cfg.model();
  if (cfg.dataset) {
    const PoseGraph graph = load_g2o(cfg.dataset->graph);
    const std::vector<lie::GroupElement> ref =
        reference_poses(cfg.dataset->reference.empty() ? graph : load_g2o(cfg.dataset->reference));
    w.calibration = dataset_problem(graph, ref, model, cfg.dataset->options);
    if (cfg.loop_split == LoopSplit::LoopMinus) {
      // every other loop, in file order
      auto& loops = w.calibration.meas.supervisory;
      std::vector<SupervisoryMeasurement> kept;
      for (size_t i = 0; i < loops.size(); i += 2) kept.push_back(loops[i]);
      loops = kept;
    }
    return w;
  }
  const ScenarioSpec spec = cfg.effective_scenario();
  w.scenario = generate(spec, model);
  w.calibration = w.scenario->calibration;
  w.truth = spec.true_noise;
  return w;
}

json scenario_summary(const Problem& p) {
  int gps = 0, vo = 0;
  for (int k = 1; k <= p.meas.steps(); ++k) {
    gps += p.meas.unary[k].has_value();
    vo += p.meas.binary[k].has_value();
  }
  return {{"steps", p.steps()},
          {"gps_fixes", gps},
          {"odometry", vo},
          {"loops", p.meas.supervisory.size()},
          {"keyframes", p.filter.keyframes.size()}};
}

void emit(const RunConfig& cfg, json rep, std::ostream& log) {
  const std::string text = rep.dump(2) + "\n";
  if (cfg.output.report.empty()) {
    std::cout << text;
  } else {
    report::write_text(cfg.output.report, text);
    log << "report written to " << cfg.output.report << "\n";
  }
}

void maybe_trajectory(const RunConfig& cfg, const std::vector<TrajectoryPoint>& traj, std::ostream& log) {
  if (cfg.output.trajectory.empty()) return;
  report::write_text(cfg.output.trajectory, report::trajectory_jsonl(traj));
  log << "trajectory written to " << cfg.output.trajectory << "\n";
}

double mse_on(const Problem& p, const VectorXd& theta) {
  Problem q = p;
  q.filter.keyframes.clear();
  const FilterRun fr = run(q.inputs, q.meas, q.model.realize(theta), q.filter);
  return baseline_mse(fr.trajectory, q.ground_truth);
}

G2oEdge make_edge(int from, int to, const lie::GroupElement& rel, const Matrix6d& left_cov) {
  G2oEdge e;
  e.from = from;
  e.to = to;
  e.t = rel.position();
  e.q = Eigen::Quaterniond(rel.rotation());
  // left noise -> right noise, then (rotation, translation) -> (translation, rotation)
  const Matrix6d Ad = rel.inverse().adjoint();
  const Matrix6d right = Ad * left_cov * Ad.transpose();
  Matrix6d perm = Matrix6d::Zero();
  perm.block<3, 3>(0, 3).setIdentity();
  perm.block<3, 3>(3, 0).setIdentity();
  const Matrix6d info = perm * right.inverse() * perm.transpose();
  e.info = 0.5 * (info + info.transpose());
  return e;
}

PoseGraph calibration_graph(const Scenario& sc, const FixedNoise& truth) {
  PoseGraph g;
  const Problem& p = sc.calibration;
  for (int k = 0; k <= p.steps(); ++k) {
    G2oVertex v;
    v.id = k;
    v.t = sc.truth[k].position();
    v.q = Eigen::Quaterniond(sc.truth[k].rotation());
    g.vertices.push_back(v);
  }
  for (int k = 1; k <= p.steps(); ++k) {
    if (p.meas.binary[k]) g.edges.push_back(make_edge(k - 1, k, p.meas.binary[k]->y, truth.Sigma_b));
  }
  for (const auto& m : p.meas.supervisory) g.edges.push_back(make_edge(m.i, m.j, m.y, m.psi));
  return g;
}

int simulate(const RunConfig& cfg, std::ostream& log) {
  if (cfg.dataset) throw Error(ErrorCode::InvalidConfig, "simulate needs a synthetic scenario, not a dataset");
  const Workload w = build(cfg);
  const Scenario& sc = *w.scenario;
  json rep = report::header("simulate", cfg.seed);
  rep["calibration_stage"] = scenario_summary(sc.calibration);
  rep["test_stage"] = scenario_summary(sc.test);
  const NoiseModel model = cfg.model();
  rep["theta_table"] = report::theta_table(model, &*w.truth, cfg.initial_theta(), {});
  rep["summary"] = report::table_lines(rep["theta_table"]);
  if (!cfg.output.graph.empty()) {
    report::write_text(cfg.output.graph, serialize_g2o(calibration_graph(sc, *w.truth)));
    log << "graph written to " << cfg.output.graph << "\n";
  }
  std::vector<TrajectoryPoint> traj;
  for (size_t k = 0; k < sc.truth.size(); ++k) traj.push_back({static_cast<int>(k), k * cfg.scenario.dt(), sc.truth[k], 0.0});
  maybe_trajectory(cfg, traj, log);
  emit(cfg, rep, log);
  return 0;
}

int calibrate(const RunConfig& cfg, std::ostream& log) {
  const Workload w = build(cfg);
  const NoiseModel& model = w.calibration.model;
  const VectorXd theta0 = cfg.initial_theta();
  const CalibrationConfig& cc = cfg.calibration;
  const bool baseline = cc.loss == LossKind::APE || cc.loss == LossKind::MSE || cc.loss == LossKind::Innov;
  const CalibrationResult res = baseline ? run_baseline(cc, w.calibration, theta0) : solve(cc, w.calibration, theta0);
  log << "calibrate: " << res.trace.stop_reason << " after " << res.trace.iterations.size() - 1 << " iterations\n";

  json rep = report::header("calibrate", cfg.seed);
  rep["loss"] = to_string(cc.loss);
  rep["loop_split"] = to_string(cfg.loop_split);
  rep["calibration_stage"] = scenario_summary(w.calibration);
  rep["labels"] = model.labels();
  rep["theta0"] = report::vector_json(theta0);
  rep["theta"] = report::vector_json(res.theta);
  rep["loss_report"] = report::loss_json(total_loss_and_grad(w.calibration, res.theta, true, cc.deriv, true));
  rep["iteration_trace"] = report::trace_json(res.trace);
  json metrics = {{"calibration_mse", mse_on(w.calibration, res.theta)}, {"calibration_mse_init", mse_on(w.calibration, theta0)}};
  if (w.scenario) {
    const EvalMetrics em = evaluate(res.theta, *w.scenario, *w.truth);
    metrics.update(report::metrics_json(em));
    metrics["test_mse_init"] = evaluate(theta0, *w.scenario, *w.truth).test_mse;
  }
  rep["metrics"] = metrics;
  rep["theta_table"] = report::theta_table(model, w.truth ? &*w.truth : nullptr, theta0, {{to_string(cc.loss), res.theta}});
  rep["summary"] = report::table_lines(rep["theta_table"]);

  Problem plain = w.calibration;
  plain.filter.keyframes.clear();
  maybe_trajectory(cfg, run(plain.inputs, plain.meas, model.realize(res.theta), plain.filter).trajectory, log);
  emit(cfg, rep, log);
  return 0;
}

int gradcheck(const RunConfig& cfg, std::ostream& log) {
  const LossKind kind = cfg.calibration.loss;
  if (kind != LossKind::Full && kind != LossKind::OdomOnly) {
    throw Error(ErrorCode::InvalidConfig, "gradcheck needs loss full or odom");
  }
  const Workload w = build(cfg);
  const Problem& p = w.calibration;
  const double h = cfg.gradcheck.h;
  VectorXd theta = cfg.gradcheck.theta ? *cfg.gradcheck.theta : cfg.initial_theta();
  // keep the central stencil inside the box
  for (int j = 0; j < theta.size(); ++j) {
    const double lo = p.model.lower()[j] + 2.0 * h, hi = p.model.upper()[j] - 2.0 * h;
    if (lo <= hi) theta[j] = std::clamp(theta[j], lo, hi);
  }
  const LossReport lr = total_loss_and_grad(p, theta, kind == LossKind::Full, cfg.calibration.deriv, true);
  const std::vector<std::string> labels = p.model.labels();
  json comps = json::array();
  bool pass = true;
  double worst = 0.0;
  for (int j = 0; j < theta.size(); ++j) {
    VectorXd tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    const double num = (objective(p, tp, kind) - objective(p, tm, kind)) / (2.0 * h);
    const double ana = lr.grad_total[j];
    const double err = std::abs(num) > 1e-12 ? std::abs(ana - num) / std::abs(num) : std::abs(ana - num);
    worst = std::max(worst, err);
    pass = pass && err < cfg.gradcheck.tol;
    comps.push_back({{"label", labels[j]}, {"analytic", ana}, {"numeric", num}, {"normalized_error", err}});
  }
  log << "gradcheck: worst normalized error " << worst << (pass ? " (pass)\n" : " (FAIL)\n");
  json rep = report::header("gradcheck", cfg.seed);
  rep["loss"] = to_string(kind);
  rep["h"] = h;
  rep["tol"] = cfg.gradcheck.tol;
  rep["theta"] = report::vector_json(theta);
  rep["loss_report"] = report::loss_json(lr);
  rep["components"] = comps;
  rep["max_normalized_error"] = worst;
  rep["pass"] = pass;
  emit(cfg, rep, log);
  return pass ? 0 : 3;
}

int evaluate_cmd(const RunConfig& cfg, std::ostream& log) {
  const Workload w = build(cfg);
  const NoiseModel& model = w.calibration.model;
  const VectorXd theta = cfg.evaluate_theta ? *cfg.evaluate_theta : cfg.initial_theta();
  if (theta.size() != model.size()) throw Error(ErrorCode::DimensionMismatch, "evaluate theta does not match the blocks");
  json rep = report::header("evaluate", cfg.seed);
  rep["theta"] = report::vector_json(theta);
  std::vector<TrajectoryPoint> traj;
  if (w.scenario) {
    const EvalMetrics em = evaluate(theta, *w.scenario, *w.truth);
    json metrics = report::metrics_json(em);
    metrics["test_mse_at_truth"] = evaluate(model.project(model.encode(*w.truth)), *w.scenario, *w.truth).test_mse;
    rep["metrics"] = metrics;
    const Problem& t = w.scenario->test;
    traj = run(t.inputs, t.meas, model.realize(theta), t.filter).trajectory;
  } else {
    rep["metrics"] = {{"test_mse", mse_on(w.calibration, theta)}};
    Problem plain = w.calibration;
    plain.filter.keyframes.clear();
    traj = run(plain.inputs, plain.meas, model.realize(theta), plain.filter).trajectory;
  }
  rep["theta_table"] = report::theta_table(model, w.truth ? &*w.truth : nullptr, cfg.initial_theta(), {{"evaluated", theta}});
  rep["summary"] = report::table_lines(rep["theta_table"]);
  log << "evaluate: test mse " << rep["metrics"]["test_mse"].get<double>() << "\n";
  maybe_trajectory(cfg, traj, log);
  emit(cfg, rep, log);
  return 0;
}

int montecarlo(const RunConfig& cfg, std::ostream& log) {
  if (cfg.dataset) throw Error(ErrorCode::InvalidConfig, "montecarlo needs a synthetic scenario");
  const MonteCarloSpec mc = cfg.effective_montecarlo();
  const MonteCarloReport r = monte_carlo(mc);
  log << "montecarlo: " << r.succeeded << "/" << mc.runs << " runs, mean W2 odom " << r.mean_w2_odom << " full "
      << r.mean_w2_full << "\n";
  json rep = report::header("montecarlo", cfg.seed);
  rep["alpha"] = mc.alpha;
  rep["iterations"] = mc.iterations;
  rep["metrics"] = report::monte_carlo_json(r);
  emit(cfg, rep, log);
  return r.succeeded > 0 ? 0 : 2;
}

}  // namespace

int run(Mode mode, const RunConfig& cfg, std::ostream& log) {
  switch (mode) {
    case Mode::Simulate: return simulate(cfg, log);
    case Mode::Calibrate: return calibrate(cfg, log);
    case Mode::Gradcheck: return gradcheck(cfg, log);
    case Mode::Evaluate: return evaluate_cmd(cfg, log);
    case Mode::MonteCarlo: return montecarlo(cfg, log);
  }
  return 1;
}

}  // namespace supcal::cli
