#include "supcal/pipeline.hpp"

#include "supcal/errors.hpp"

namespace supcal {

using Eigen::VectorXd;

PassResult run_pass(const Problem& problem, const VectorXd& theta, const PassOptions& opt) {
  if (!opt.derivatives) {
    PassResult out;
    out.run = run(problem.inputs, problem.meas, problem.model.realize(theta), problem.filter, opt.keep_records);
    return out;
  }
  const RealizedNoise noise = problem.model.realize(theta);
  const FilterConfig& cfg = problem.filter;
  const int N = problem.steps();
  if (problem.meas.steps() != N) throw Error(ErrorCode::DimensionMismatch, "measurement stream length differs from inputs");

  PassResult out;
  FilterRun& fr = out.run;
  AugmentedState s = initial_state(cfg);
  fr.trajectory.reserve(N + 1);
  fr.trajectory.push_back({0, 0.0, s.curr(), s.P.block<9, 9>(9, 9).trace()});
  bool appended = false;
  s = maybe_append(std::move(s), cfg, &appended);
  out.bank = initial_bank(noise.size(), s);
  out.odom_grad = VectorXd::Zero(noise.size());

  for (int k = 1; k <= N; ++k) {
    const ImuInput& u = problem.inputs[k - 1];
    s = predict(std::move(s), u, noise, cfg);
    d_predict(out.bank, u, noise, opt.deriv);
    const UnaryMeasurement* um = problem.meas.unary[k] ? &*problem.meas.unary[k] : nullptr;
    const BinaryMeasurement* bm = problem.meas.binary[k] ? &*problem.meas.binary[k] : nullptr;
    StepRecord rec = innovation(s, um, bm, noise, cfg);
    if (rec.rows() > 0) {
      StepSensitivity st = d_update(out.bank, rec, s, noise, opt.deriv, opt.keep_step_terms);
      out.odom_grad += st.odom_grad;
      if (opt.keep_step_terms) out.step_terms.push_back(std::move(st));
      apply_correction(s, rec, cfg);
      fr.odom_loss += 0.5 * rec.logdet_S + 0.5 * rec.r.dot(rec.W * rec.r);
      fr.innovation_sq += rec.r.squaredNorm();
      fr.measured_steps += 1;
    }
    s = maybe_append(std::move(s), cfg, &appended);
    if (appended) d_append(out.bank, s);
    rec.appended = appended;
    fr.trajectory.push_back({k, s.t, s.curr(), s.P.block<9, 9>(9, 9).trace()});
    if (opt.keep_records) fr.records.push_back(std::move(rec));
  }
  fr.final_state = std::move(s);
  return out;
}

}  // namespace supcal
