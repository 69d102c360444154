#include "supcal/g2o.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>

#include "supcal/errors.hpp"

namespace supcal {

using lie::GroupElement;
using lie::GroupKind;

lie::GroupElement G2oVertex::pose() const { return GroupElement::se3(q.toRotationMatrix(), t); }
lie::GroupElement G2oEdge::relative() const { return GroupElement::se3(q.toRotationMatrix(), t); }

const G2oVertex* PoseGraph::find_vertex(int id) const {
  for (const auto& v : vertices)
    if (v.id == id) return &v;
  return nullptr;
}

namespace {

struct Token {
  std::string_view text;
  int column;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    const size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back({std::string_view(line).substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

class LineReader {
 public:
  LineReader(const std::vector<Token>& toks, int line_no) : toks_(toks), line_(line_no) {}

  void expect_count(size_t n, const char* what) const {
    if (toks_.size() < n) {
      const int col = toks_.empty() ? 1 : toks_.back().column + static_cast<int>(toks_.back().text.size());
      throw MalformedLineError(line_, col, std::string(what) + " needs " + std::to_string(n - 1) + " fields, got " +
                                               std::to_string(toks_.size() - 1));
    }
    if (toks_.size() > n) throw MalformedLineError(line_, toks_[n].column, "unexpected trailing field");
  }

  int integer(size_t idx) const {
    const Token& t = toks_[idx];
    int v = 0;
    const auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size()) {
      throw MalformedLineError(line_, t.column, "expected an integer id, got '" + std::string(t.text) + "'");
    }
    return v;
  }

  double real(size_t idx) const {
    const Token& t = toks_[idx];
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size() || !std::isfinite(v)) {
      throw MalformedLineError(line_, t.column, "expected a finite number, got '" + std::string(t.text) + "'");
    }
    return v;
  }

  Eigen::Quaterniond quaternion(size_t idx) const {
    // file order qx qy qz qw
    Eigen::Quaterniond q(real(idx + 3), real(idx), real(idx + 1), real(idx + 2));
    const double n = q.norm();
    if (std::abs(n - 1.0) > 1e-3) {
      throw MalformedLineError(line_, toks_[idx].column, "quaternion norm " + std::to_string(n) + " is not 1");
    }
    // leave unit quaternions bit-identical so write/read round trips are exact
    if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) q.normalize();
    return q;
  }

  int column(size_t idx) const { return toks_[idx].column; }

 private:
  const std::vector<Token>& toks_;
  int line_;
};

const std::string kVertexTag = "VERTEX_SE3:QUAT";
const std::string kEdgeTag = "EDGE_SE3:QUAT";

}  // namespace

PoseGraph parse_g2o(std::istream& in) {
  PoseGraph g;
  std::map<int, int> vertex_line;
  std::vector<int> edge_line;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<Token> toks = tokenize(line);
    if (toks.empty() || toks[0].text.front() == '#') continue;
    const LineReader r(toks, line_no);
    if (toks[0].text == kVertexTag) {
      r.expect_count(9, "VERTEX_SE3:QUAT");
      G2oVertex v;
      v.id = r.integer(1);
      v.t = Eigen::Vector3d(r.real(2), r.real(3), r.real(4));
      v.q = r.quaternion(5);
      if (!vertex_line.emplace(v.id, line_no).second) {
        throw MalformedLineError(line_no, r.column(1), "duplicate vertex id " + std::to_string(v.id));
      }
      g.vertices.push_back(v);
    } else if (toks[0].text == kEdgeTag) {
      r.expect_count(31, "EDGE_SE3:QUAT");
      G2oEdge e;
      e.from = r.integer(1);
      e.to = r.integer(2);
      if (e.from == e.to) throw MalformedLineError(line_no, r.column(2), "edge joins a vertex to itself");
      e.t = Eigen::Vector3d(r.real(3), r.real(4), r.real(5));
      e.q = r.quaternion(6);
      size_t idx = 10;
      for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j, ++idx) e.info(i, j) = e.info(j, i) = r.real(idx);
      const Eigen::SelfAdjointEigenSolver<Matrix6d> es(e.info, Eigen::EigenvaluesOnly);
      const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
        throw MalformedLineError(line_no, r.column(10), "information matrix is not positive semidefinite");
      }
      g.edges.push_back(e);
      edge_line.push_back(line_no);
    } else {
      ++g.skipped_records;
    }
  }
  for (size_t k = 0; k < g.edges.size(); ++k) {
    for (int id : {g.edges[k].from, g.edges[k].to}) {
      if (!vertex_line.count(id)) {
        throw Error(ErrorCode::DanglingEdge, "edge at line " + std::to_string(edge_line[k]) +
                                                 " references missing vertex " + std::to_string(id));
      }
    }
  }
  return g;
}

PoseGraph load_g2o(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_g2o(in);
}

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, " %.17g", v);
  out += buf;
}

}  // namespace

std::string serialize_g2o(const PoseGraph& g) {
  std::string out;
  for (const auto& v : g.vertices) {
    out += kVertexTag + " " + std::to_string(v.id);
    for (double x : {v.t.x(), v.t.y(), v.t.z(), v.q.x(), v.q.y(), v.q.z(), v.q.w()}) put(out, x);
    out += '\n';
  }
  for (const auto& e : g.edges) {
    out += kEdgeTag + " " + std::to_string(e.from) + " " + std::to_string(e.to);
    for (double x : {e.t.x(), e.t.y(), e.t.z(), e.q.x(), e.q.y(), e.q.z(), e.q.w()}) put(out, x);
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) put(out, e.info(i, j));
    out += '\n';
  }
  return out;
}

Matrix6d info_to_tangent_covariance(const Matrix6d& info) {
  Matrix6d perm = Matrix6d::Zero();
  perm.block<3, 3>(0, 3).setIdentity();
  perm.block<3, 3>(3, 0).setIdentity();
  const Matrix6d swapped = perm * info * perm.transpose();
  Eigen::LDLT<Matrix6d> ldlt(swapped);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw Error(ErrorCode::SingularCovariance, "loop information matrix is singular");
  }
  const Matrix6d cov = ldlt.solve(Matrix6d::Identity());
  return 0.5 * (cov + cov.transpose());
}

MeasurementStream split_measurements(const PoseGraph& g, const SplitOptions& opt) {
  MeasurementStream ms;
  if (g.vertices.empty()) {
    ms.resize(0);
    return ms;
  }
  int lo = g.vertices.front().id, hi = lo;
  for (const auto& v : g.vertices) {
    lo = std::min(lo, v.id);
    hi = std::max(hi, v.id);
  }
  ms.resize(hi - lo);
  for (const auto& e : g.edges) {
    const int a = std::min(e.from, e.to) - lo, b = std::max(e.from, e.to) - lo;
    const bool forward = e.from < e.to;
    // forward edges store T_a^-1 T_b, reversed ones its inverse
    const GroupElement rel = forward ? e.relative() : e.relative().inverse();
    if (b - a == 1) {
      if (ms.binary[b]) throw Error(ErrorCode::InvalidConfig, "two odometry edges end at vertex " + std::to_string(b + lo));
      ms.binary[b] = BinaryMeasurement{rel};
      continue;
    }
    SupervisoryMeasurement m;
    m.i = a;
    m.j = b;
    m.y = rel;
    if (opt.loop_std) {
      m.psi = Matrix6d::Identity() * (*opt.loop_std) * (*opt.loop_std);
    } else {
      // g2o noise multiplies on the right; the filter expects it on the left
      const Matrix6d cov = info_to_tangent_covariance(e.info);
      if (forward) {
        const Matrix6d Ad = rel.adjoint();
        m.psi = Ad * cov * Ad.transpose();
        m.psi = 0.5 * (m.psi + m.psi.transpose()).eval();
      } else {
        m.psi = cov;
      }
    }
    ms.supervisory.push_back(m);
  }
  return ms;
}

}  // namespace supcal
