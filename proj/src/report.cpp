#include "supcal/report.hpp"

#include <Eigen/Geometry>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "supcal/errors.hpp"

namespace supcal::report {

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json loss_json(const LossReport& r) {
  return {{"total", r.total},
          {"odom", r.odom},
          {"sup", r.sup},
          {"grad_total", vector_json(r.grad_total)},
          {"grad_odom", vector_json(r.grad_odom)},
          {"grad_sup", vector_json(r.grad_sup)}};
}

json trace_json(const IterationTrace& t) {
  json its = json::array();
  for (const auto& r : t.iterations) {
    its.push_back({{"iter", r.iter},
                   {"theta", vector_json(r.theta)},
                   {"loss", r.loss},
                   {"grad_norm", r.grad_norm},
                   {"step", r.step},
                   {"backtracks", r.backtracks},
                   {"wall_time", r.wall_time}});
  }
  return {{"converged", t.converged},
          {"line_search_stalled", t.line_search_stalled},
          {"stop_reason", t.stop_reason},
          {"filter_passes", t.filter_passes},
          {"iterations", its}};
}

json metrics_json(const EvalMetrics& m) {
  json w2 = json::object();
  for (const auto& [k, v] : m.w2) w2[k] = v;
  return {{"test_mse", m.test_mse}, {"avg_w2", m.avg_w2}, {"w2", w2}};
}

json monte_carlo_json(const MonteCarloReport& r) {
  json runs = json::array();
  for (const auto& run : r.runs) {
    json e = {{"index", run.index}, {"seed", run.seed}, {"ok", run.ok}};
    if (run.ok) {
      e["odom"] = metrics_json(run.odom);
      e["full"] = metrics_json(run.full);
    } else {
      e["error"] = run.error;
    }
    runs.push_back(e);
  }
  return {{"succeeded", r.succeeded},
          {"mean_mse_odom", r.mean_mse_odom},
          {"mean_mse_full", r.mean_mse_full},
          {"mean_w2_odom", r.mean_w2_odom},
          {"mean_w2_full", r.mean_w2_full},
          {"runs", runs}};
}

namespace {

json sensor_rows(const FixedNoise& n) {
  auto diag = [](const Eigen::MatrixXd& M) { return vector_json(M.diagonal()); };
  return {{"GPS", diag(n.Sigma_u)}, {"IMU", json::array({n.Q_g(0, 0), n.Q_a(0, 0)})}, {"VO", diag(n.Sigma_b)}};
}

FixedNoise realized(const NoiseModel& m, const Eigen::VectorXd& theta) {
  const RealizedNoise r = m.realize(theta);
  FixedNoise f;
  f.Q_g = r.Q_g;
  f.Q_a = r.Q_a;
  f.Sigma_u = r.Sigma_u;
  f.Sigma_b = r.Sigma_b;
  return f;
}

}  // namespace

json theta_table(const NoiseModel& model, const FixedNoise* truth, const Eigen::VectorXd& init,
                 const std::vector<std::pair<std::string, Eigen::VectorXd>>& estimates) {
  json columns = json::array();
  std::vector<json> cols;
  if (truth) {
    columns.push_back("Real Noise");
    cols.push_back(sensor_rows(*truth));
  }
  columns.push_back("Init");
  cols.push_back(sensor_rows(realized(model, init)));
  for (const auto& [name, theta] : estimates) {
    columns.push_back(name);
    cols.push_back(sensor_rows(realized(model, theta)));
  }
  json rows = json::array();
  for (const char* sensor : {"GPS", "IMU", "VO"}) {
    json values = json::object();
    for (size_t c = 0; c < cols.size(); ++c) values[columns[c].get<std::string>()] = cols[c][sensor];
    rows.push_back({{"sensor", sensor}, {"values", values}});
  }
  return {{"columns", columns}, {"rows", rows}};
}

json header(const std::string& command, std::uint64_t seed) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return {{"schema_version", kSchemaVersion}, {"command", command}, {"seed", seed}, {"generated_at", buf}};
}

std::string trajectory_jsonl(const std::vector<TrajectoryPoint>& traj) {
  std::string out;
  for (const auto& p : traj) {
    const Eigen::Quaterniond q(p.x.rotation());
    const json line = {{"k", p.k},
                       {"t", p.t},
                       {"position", vector_json(p.x.position())},
                       {"quaternion", json::array({q.w(), q.x(), q.y(), q.z()})},
                       {"velocity", vector_json(p.x.velocity())},
                       {"trace_P", p.trace_P}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::string> table_lines(const json& table) {
  std::vector<std::string> out;
  for (const auto& row : table["rows"]) {
    for (const auto& col : table["columns"]) {
      std::string line = row["sensor"].get<std::string>() + " | " + col.get<std::string>() + ":";
      for (const auto& v : row["values"][col.get<std::string>()]) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.3e", v.get<double>());
        line += buf;
      }
      out.push_back(line);
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace supcal::report
