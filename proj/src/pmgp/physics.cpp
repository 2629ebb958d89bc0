#include "pmgp/physics.hpp"

#include "pmgp/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace pmgp {

void FhnParams::validate() const {
  const double all[] = {c1, c2, alpha, b, d, e1, e2, coupling_sign};
  for (double x : all) {
    if (!std::isfinite(x)) fail(ErrorKind::InvalidArgument, "fhn parameters: non-finite value");
  }
  if (e1 < 0 || e2 < 0) fail(ErrorKind::InvalidArgument, "fhn parameters: diffusion coefficients must be >= 0");
}

std::pair<double, double> fhn_reaction(double u, double v, const FhnParams& p) {
  const double g1 = p.c1 * u * (u - p.alpha) * (1.0 - u) + p.coupling_sign * p.c2 * u * v;
  const double g2 = p.b * (u - p.d * v);
  return {g1, g2};
}

CollocationSet sample_collocation(Index n_vertices, std::span<const double> times, std::size_t n, std::uint64_t seed) {
  const auto grid = static_cast<std::uint64_t>(n_vertices) * times.size();
  if (n == 0) fail(ErrorKind::InvalidArgument, "collocation: at least one point required");
  if (n > grid) fail(ErrorKind::InvalidArgument, "collocation: more points requested than grid cells");
  // Floyd's algorithm: n distinct cells in O(n) draws.
  std::mt19937_64 rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  std::vector<std::uint64_t> order;
  for (std::uint64_t j = grid - n; j < grid; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    std::uint64_t cell = pick(rng);
    if (chosen.count(cell)) cell = j;
    chosen.insert(cell);
    order.push_back(cell);
  }
  CollocationSet out;
  for (auto cell : order) {
    out.vertices.push_back(static_cast<int>(cell / times.size()));
    out.times.push_back(times[cell % times.size()]);
  }
  return out;
}

FieldDerivatives predict_with_derivatives(const GpModel& model, const CollocationSet& colloc) {
  if (colloc.size() == 0) fail(ErrorKind::InvalidArgument, "collocation set is empty");
  if (colloc.times.size() != colloc.vertices.size()) fail(ErrorKind::InvalidArgument, "collocation set: size mismatch");

  std::vector<int> verts(colloc.vertices);
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
  std::vector<double> times(colloc.times);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  for (int v : verts) {
    if (v < 0 || v >= model.spectrum().n_vertices()) {
      fail(ErrorKind::InvalidArgument, "collocation vertex " + std::to_string(v) + " not in mesh");
    }
  }

  const Eigen::MatrixXd s_val = model.spatial_factor(verts);
  const Eigen::MatrixXd s_lap = model.spatial_factor(verts, true);
  const Eigen::MatrixXd t_val = model.temporal_factor(times);
  const Eigen::MatrixXd t_dt = model.temporal_factor(times, true);
  const Tensor3& coef = model.coefficients();
  const Eigen::MatrixXd p_val[2] = {t_val * coef.slice(0), t_val * coef.slice(1)};
  const Eigen::MatrixXd p_dt[2] = {t_dt * coef.slice(0), t_dt * coef.slice(1)};
  const Eigen::Matrix2d& kf = model.factorization().task;

  const auto n = static_cast<Index>(colloc.size());
  FieldDerivatives out;
  for (auto* v : {&out.u, &out.v, &out.du_dt, &out.dv_dt, &out.lap_u, &out.lap_v}) v->resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto vi = std::lower_bound(verts.begin(), verts.end(), colloc.vertices[static_cast<std::size_t>(i)]) - verts.begin();
    const auto ti = std::lower_bound(times.begin(), times.end(), colloc.times[static_cast<std::size_t>(i)]) - times.begin();
    double base[2], dt[2], lap[2];
    for (int g = 0; g < 2; ++g) {
      base[g] = p_val[g].row(ti).dot(s_val.row(vi));
      dt[g] = p_dt[g].row(ti).dot(s_val.row(vi));
      lap[g] = p_val[g].row(ti).dot(s_lap.row(vi));
    }
    out.u[i] = kf(0, 0) * base[0] + kf(0, 1) * base[1];
    out.v[i] = kf(1, 0) * base[0] + kf(1, 1) * base[1];
    out.du_dt[i] = kf(0, 0) * dt[0] + kf(0, 1) * dt[1];
    out.dv_dt[i] = kf(1, 0) * dt[0] + kf(1, 1) * dt[1];
    out.lap_u[i] = kf(0, 0) * lap[0] + kf(0, 1) * lap[1];
    out.lap_v[i] = kf(1, 0) * lap[0] + kf(1, 1) * lap[1];
  }
  return out;
}

FieldDerivatives predict_with_derivatives(const Hyperparams& theta, const TrainingSet& data,
                                          const LaplacianSpectrum& spectrum, const CollocationSet& colloc) {
  return predict_with_derivatives(GpModel(theta, data, spectrum), colloc);
}

double physics_loss(const GpModel& model, const CollocationSet& colloc, const FhnParams& p) {
  p.validate();
  const FieldDerivatives d = predict_with_derivatives(model, colloc);
  double sum = 0.0;
  for (Index i = 0; i < d.u.size(); ++i) {
    const auto [g1, g2] = fhn_reaction(d.u[i], d.v[i], p);
    const double ru = d.du_dt[i] - p.e1 * d.lap_u[i] - g1;
    const double rv = d.dv_dt[i] - p.e2 * d.lap_v[i] - g2;
    sum += ru * ru + rv * rv;
  }
  return sum / static_cast<double>(d.u.size());
}

double physics_loss(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                    const CollocationSet& colloc, const FhnParams& p) {
  return physics_loss(GpModel(theta, data, spectrum), colloc, p);
}

ObjectiveTerms objective_terms(const GpModel& model, const CollocationSet& colloc, const FhnParams& p, double w) {
  if (!(w >= 0.0)) fail(ErrorKind::InvalidArgument, "objective: physics weight must be >= 0");
  ObjectiveTerms t;
  t.data = model.nll();
  t.physics = w > 0.0 ? physics_loss(model, colloc, p) : 0.0;
  t.total = t.data + w * t.physics;
  return t;
}

double objective(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                 const CollocationSet& colloc, const FhnParams& p, double w) {
  return objective_terms(GpModel(theta, data, spectrum), colloc, p, w).total;
}

}  // namespace pmgp
