#include "pmgp/sim.hpp"

#include "pmgp/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace pmgp {

bool Stimulus::active(double t) const {
  if (t < onset) return false;
  return std::fmod(t - onset, period) < duration;
}

void SimConfig::validate(Index n_vertices) const {
  fhn.validate();
  if (!(dt > 0) || !std::isfinite(dt)) fail(ErrorKind::Config, "sim: dt must be positive");
  if (n_steps < 1) fail(ErrorKind::Config, "sim: n_steps must be >= 1");
  if (record_stride < 1) fail(ErrorKind::Config, "sim: record_stride must be >= 1");
  for (std::size_t i = 0; i < stimuli.size(); ++i) {
    const auto& s = stimuli[i];
    const std::string where = "sim: stimulus " + std::to_string(i);
    if (s.vertices.empty()) fail(ErrorKind::Config, where + " has no vertices");
    for (int v : s.vertices) {
      if (v < 0 || v >= n_vertices) fail(ErrorKind::Config, where + ": vertex " + std::to_string(v) + " out of range");
    }
    if (!(s.duration > 0) || !(s.period > 0) || !std::isfinite(s.amplitude) || !std::isfinite(s.onset)) {
      fail(ErrorKind::Config, where + ": duration and period must be positive");
    }
  }
}

FieldTensor fhn_simulate(const TriMesh& mesh, const CotanLaplacian& laplacian, const SimConfig& cfg) {
  const Index n = mesh.n_vertices();
  if (laplacian.mass.size() != n || laplacian.stiffness.rows() != n) {
    fail(ErrorKind::InvalidArgument, "fhn_simulate: Laplacian does not match the mesh");
  }
  cfg.validate(n);
  const FhnParams& p = cfg.fhn;
  const double dt = cfg.dt;

  Eigen::SparseMatrix<double> mass(n, n);
  mass.reserve(Eigen::VectorXi::Ones(n));
  for (Index i = 0; i < n; ++i) mass.insert(i, i) = laplacian.mass[i];

  // M u' = M (u + dt (g1 + I)) + dt e1 W u'
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solve_u, solve_v;
  solve_u.compute(Eigen::SparseMatrix<double>(mass - dt * p.e1 * laplacian.stiffness));
  if (solve_u.info() != Eigen::Success) fail(ErrorKind::Simulation, "fhn_simulate: implicit u operator not factorizable");
  const bool implicit_v = p.e2 > 0;
  if (implicit_v) {
    solve_v.compute(Eigen::SparseMatrix<double>(mass - dt * p.e2 * laplacian.stiffness));
    if (solve_v.info() != Eigen::Success) fail(ErrorKind::Simulation, "fhn_simulate: implicit v operator not factorizable");
  }

  std::vector<double> times;
  for (int step = 0; step <= cfg.n_steps; step += cfg.record_stride) times.push_back(step * dt);
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = static_cast<int>(i);
  FieldTensor out(default_task_labels(), ids, times);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd du(n), dv(n), current(n);
  Index rec = 0;
  for (int step = 0;; ++step) {
    if (step % cfg.record_stride == 0) {
      for (Index i = 0; i < n; ++i) {
        out.at(0, i, rec) = u[i];
        out.at(1, i, rec) = v[i];
      }
      ++rec;
    }
    if (step == cfg.n_steps) break;

    const double t = step * dt;
    current.setZero();
    for (const auto& s : cfg.stimuli) {
      if (!s.active(t)) continue;
      for (int vi : s.vertices) current[vi] += s.amplitude;
    }
    for (Index i = 0; i < n; ++i) {
      const auto [g1, g2] = fhn_reaction(u[i], v[i], p);
      du[i] = dt * (g1 + current[i]);
      dv[i] = dt * g2;
      if (std::abs(du[i]) > 1.0) {
        fail(ErrorKind::Simulation, "fhn_simulate: explicit reaction step exceeds 1 at step " + std::to_string(step) +
                                        ", vertex " + std::to_string(i) + "; reduce dt");
      }
    }
    // Right-hand sides are materialized first: solve() must not alias u or v.
    const Eigen::VectorXd rhs_u = laplacian.mass.cwiseProduct(u + du);
    u = solve_u.solve(rhs_u);
    if (implicit_v) {
      const Eigen::VectorXd rhs_v = laplacian.mass.cwiseProduct(v + dv);
      v = solve_v.solve(rhs_v);
    } else {
      v += dv;
    }
    if (!u.allFinite() || !v.allFinite() || u.cwiseAbs().maxCoeff() > 10.0) {
      fail(ErrorKind::Simulation, "fhn_simulate: solution unstable at step " + std::to_string(step + 1));
    }
  }
  return out;
}

FieldTensor add_noise(const FieldTensor& q, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) fail(ErrorKind::InvalidArgument, "add_noise: sigma must be >= 0");
  FieldTensor y = q;
  if (sigma == 0.0) return y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : y.values.data()) x += sigma * normal(rng);
  return y;
}

double relative_error(std::span<const double> q_hat, std::span<const double> q) {
  if (q_hat.size() != q.size()) fail(ErrorKind::Evaluation, "relative_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    num += (q_hat[i] - q[i]) * (q_hat[i] - q[i]);
    den += q[i] * q[i];
  }
  if (!(den > 0.0)) fail(ErrorKind::Evaluation, "relative_error: reference has zero norm");
  return std::sqrt(num / den);
}

RelativeError relative_error(const FieldTensor& q_hat, const FieldTensor& q) {
  if (q_hat.values.dim1() != q.values.dim1() || q_hat.values.dim2() != q.values.dim2() || q.values.dim3() != 2 ||
      q_hat.values.dim3() != 2) {
    fail(ErrorKind::Evaluation, "relative_error: field dimensions differ");
  }
  const auto block = static_cast<std::size_t>(q.n_time() * q.n_space());
  const std::span<const double> a(q_hat.values.data()), b(q.values.data());
  RelativeError re;
  re.u = relative_error(a.subspan(0, block), b.subspan(0, block));
  re.v = relative_error(a.subspan(block, block), b.subspan(block, block));
  re.total = 0.5 * (re.u + re.v);
  return re;
}

TrainingSet subsample(const FieldTensor& data, std::span<const int> vertices, int time_stride) {
  if (time_stride < 1) fail(ErrorKind::InvalidArgument, "subsample: time stride must be >= 1");
  std::vector<Index> cols;
  for (int v : vertices) {
    const auto it = std::find(data.space_ids.begin(), data.space_ids.end(), v);
    if (it == data.space_ids.end()) fail(ErrorKind::InvalidArgument, "subsample: vertex " + std::to_string(v) + " not in field");
    cols.push_back(it - data.space_ids.begin());
  }
  std::vector<Index> rows;
  std::vector<double> times;
  for (Index t = 0; t < data.n_time(); t += time_stride) {
    rows.push_back(t);
    times.push_back(data.times[static_cast<std::size_t>(t)]);
  }
  TrainingSet set;
  set.data = FieldTensor(data.tasks, std::vector<int>(vertices.begin(), vertices.end()), times);
  for (Index f = 0; f < data.n_tasks(); ++f) {
    for (std::size_t s = 0; s < cols.size(); ++s) {
      for (std::size_t t = 0; t < rows.size(); ++t) {
        set.data.at(f, static_cast<Index>(s), static_cast<Index>(t)) = data.at(f, cols[s], rows[t]);
      }
    }
  }
  return set;
}

TrainingSet subsample(const FieldTensor& data, std::size_t picks, int time_stride, std::uint64_t seed) {
  const std::size_t n = data.space_ids.size();
  if (picks == 0 || picks > n) {
    fail(ErrorKind::InvalidArgument, "subsample: requested " + std::to_string(picks) + " vertices from " + std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  std::set<std::size_t> chosen;
  for (std::size_t j = n - picks; j < n; ++j) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    chosen.insert(chosen.count(k) ? j : k);
  }
  std::vector<int> vertices;
  for (auto k : chosen) vertices.push_back(data.space_ids[k]);
  std::sort(vertices.begin(), vertices.end());
  return subsample(data, vertices, time_stride);
}

int extremal_vertex(const TriMesh& mesh, int axis) {
  if (axis < 0 || axis > 2) fail(ErrorKind::InvalidArgument, "extremal_vertex: axis must be 0, 1 or 2");
  const Eigen::RowVector3d centroid = mesh.vertices.colwise().mean();
  const Eigen::MatrixX3d centered = mesh.vertices.rowwise() - centroid;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> pca(centered.transpose() * centered);
  Eigen::Vector3d dir = pca.eigenvectors().col(2 - axis);
  Index big;
  dir.cwiseAbs().maxCoeff(&big);
  if (dir[big] < 0) dir = -dir;
  Index best;
  (centered * dir).maxCoeff(&best);
  return static_cast<int>(best);
}

namespace {

Stimulus site_with_ring(const TriMesh& mesh, int vertex) {
  Stimulus s;
  s.vertices = vertex_neighbors(mesh)[static_cast<std::size_t>(vertex)];
  s.vertices.push_back(vertex);
  std::sort(s.vertices.begin(), s.vertices.end());
  return s;
}

}  // namespace

SimConfig protocol_one(const TriMesh& mesh, double dt, int n_steps, int record_stride) {
  SimConfig cfg;
  cfg.dt = dt;
  cfg.n_steps = n_steps;
  cfg.record_stride = record_stride;
  cfg.stimuli.push_back(site_with_ring(mesh, extremal_vertex(mesh, 0)));
  return cfg;
}

SimConfig protocol_two(const TriMesh& mesh, double dt, int n_steps, int record_stride, double second_onset) {
  SimConfig cfg = protocol_one(mesh, dt, n_steps, record_stride);
  Stimulus second = site_with_ring(mesh, extremal_vertex(mesh, 1));
  second.onset = second_onset;
  cfg.stimuli.push_back(second);
  return cfg;
}

}  // namespace pmgp
