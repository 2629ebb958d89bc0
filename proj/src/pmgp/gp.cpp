#include "pmgp/gp.hpp"

#include "pmgp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace pmgp {

namespace {

struct UniqueIndex {
  std::vector<int> vertices;
  std::vector<double> times;
  std::vector<Index> vertex_of;
  std::vector<Index> time_of;
  std::vector<int> task_of;
};

UniqueIndex index_queries(std::span<const QueryPoint> query) {
  UniqueIndex u;
  for (const auto& q : query) {
    u.vertices.push_back(q.vertex);
    u.times.push_back(q.time);
  }
  std::sort(u.vertices.begin(), u.vertices.end());
  u.vertices.erase(std::unique(u.vertices.begin(), u.vertices.end()), u.vertices.end());
  std::sort(u.times.begin(), u.times.end());
  u.times.erase(std::unique(u.times.begin(), u.times.end()), u.times.end());
  for (const auto& q : query) {
    if (q.task < 0 || q.task > 1) fail(ErrorKind::InvalidArgument, "query: task index must be 0 or 1");
    u.vertex_of.push_back(std::lower_bound(u.vertices.begin(), u.vertices.end(), q.vertex) - u.vertices.begin());
    u.time_of.push_back(std::lower_bound(u.times.begin(), u.times.end(), q.time) - u.times.begin());
    u.task_of.push_back(q.task);
  }
  return u;
}

void check_vertices(std::span<const int> vertices, const LaplacianSpectrum& spectrum) {
  if (vertices.empty()) fail(ErrorKind::InvalidArgument, "query: empty vertex set");
  for (int v : vertices) {
    if (v < 0 || v >= spectrum.n_vertices()) fail(ErrorKind::InvalidArgument, "query: unknown vertex " + std::to_string(v));
  }
}

}  // namespace

void validate_training_set(const TrainingSet& set, const LaplacianSpectrum& spectrum) {
  const auto& d = set.data;
  d.validate();
  if (d.n_tasks() != 2) fail(ErrorKind::InvalidArgument, "training set: exactly two tasks required");
  if (d.n_space() < 1 || d.n_time() < 1) fail(ErrorKind::InvalidArgument, "training set: empty");
  std::set<int> seen;
  for (int v : d.space_ids) {
    if (v < 0 || v >= spectrum.n_vertices()) fail(ErrorKind::InvalidArgument, "training set: vertex " + std::to_string(v) + " not in mesh");
    if (!seen.insert(v).second) fail(ErrorKind::InvalidArgument, "training set: duplicate vertex " + std::to_string(v));
  }
  for (std::size_t j = 1; j < d.times.size(); ++j) {
    if (!(d.times[j] > d.times[j - 1])) fail(ErrorKind::InvalidArgument, "training set: times must be strictly increasing");
  }
}

const SymmetricEigen& KernelCache::spatial(const LaplacianSpectrum& spectrum, std::span<const int> vertices,
                                           double l_s) {
  auto it = spatial_.find(l_s);
  if (it != spatial_.end()) return it->second;
  if (spatial_.size() >= kCapacity) spatial_.clear();
  return spatial_.emplace(l_s, symmetric_eigen(spatial_kernel(spectrum, 1.0, l_s, vertices, vertices))).first->second;
}

const SymmetricEigen& KernelCache::temporal(std::span<const double> times, double l_t) {
  auto it = temporal_.find(l_t);
  if (it != temporal_.end()) return it->second;
  if (temporal_.size() >= kCapacity) temporal_.clear();
  return temporal_.emplace(l_t, symmetric_eigen(temporal_kernel_matrix(times, times, 1.0, l_t))).first->second;
}

GpModel::GpModel(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                 KernelCache* cache)
    : theta_(theta), data_(&data), spectrum_(&spectrum) {
  theta.validate();
  validate_training_set(data, spectrum);
  const auto& ids = data.data.space_ids;
  const auto& times = data.data.times;
  SymmetricEigen se, te;
  if (cache) {
    se = cache->spatial(spectrum, ids, theta.l_s);
    te = cache->temporal(times, theta.l_t);
    se.values *= theta.sigma_m;
    te.values *= theta.sigma_a;
  } else {
    se = symmetric_eigen(spatial_kernel(spectrum, theta.sigma_m, theta.l_s, ids, ids));
    te = symmetric_eigen(temporal_kernel_matrix(times, times, theta.sigma_a, theta.l_t));
  }
  fact_ = factorize(std::move(se), std::move(te), task_kernel(theta), Eigen::Vector2d(theta.noise_u, theta.noise_v));
  coef_ = weighted_coefficients(fact_, data.data);
}

double GpModel::nll() const {
  const double n_tr = 2.0 * static_cast<double>(fact_.n_space() * fact_.n_time());
  const double f1 = quadratic_form(fact_, data_->data);
  const double f2 = log_det(fact_);
  const double f3 = n_tr * std::log(2.0 * std::numbers::pi);
  return (f1 + f2 + f3) / (2.0 * n_tr);
}

Eigen::MatrixXd GpModel::spatial_factor(std::span<const int> vertices, bool laplacian) const {
  const auto& ids = data_->data.space_ids;
  const Eigen::MatrixXd k = laplacian ? spatial_kernel_laplacian(*spectrum_, theta_.sigma_m, theta_.l_s, vertices, ids)
                                      : spatial_kernel(*spectrum_, theta_.sigma_m, theta_.l_s, vertices, ids);
  return k * fact_.U_s;
}

Eigen::MatrixXd GpModel::temporal_factor(std::span<const double> times, bool time_derivative) const {
  const auto& tr = data_->data.times;
  const Eigen::MatrixXd k = time_derivative ? temporal_kernel_dt_matrix(times, tr, theta_.sigma_a, theta_.l_t)
                                            : temporal_kernel_matrix(times, tr, theta_.sigma_a, theta_.l_t);
  return k * fact_.U_t;
}

FieldTensor GpModel::posterior_mean_grid(std::span<const int> vertices, std::span<const double> times) const {
  check_vertices(vertices, *spectrum_);
  if (times.empty()) fail(ErrorKind::InvalidArgument, "query: empty time set");
  FieldTensor out(data_->data.tasks, std::vector<int>(vertices.begin(), vertices.end()),
                  std::vector<double>(times.begin(), times.end()));
  out.values = mode_n_contract(coef_, temporal_factor(times), spatial_factor(vertices), fact_.task);
  return out;
}

Eigen::VectorXd gather_points(const Tensor3& coef, const Eigen::MatrixXd& time_factor,
                              const Eigen::MatrixXd& space_factor, const Eigen::Matrix2d& task,
                              std::span<const int> task_of, std::span<const Index> time_index,
                              std::span<const Index> space_index) {
  const Eigen::MatrixXd p0 = time_factor * coef.slice(0);
  const Eigen::MatrixXd p1 = time_factor * coef.slice(1);
  Eigen::VectorXd out(static_cast<Index>(task_of.size()));
  for (std::size_t i = 0; i < task_of.size(); ++i) {
    const auto q = task_of[i];
    const auto srow = space_factor.row(space_index[i]);
    out[static_cast<Index>(i)] = task(q, 0) * p0.row(time_index[i]).dot(srow) + task(q, 1) * p1.row(time_index[i]).dot(srow);
  }
  return out;
}

Eigen::VectorXd GpModel::posterior_mean(std::span<const QueryPoint> query) const {
  if (query.empty()) fail(ErrorKind::InvalidArgument, "query: empty");
  const auto u = index_queries(query);
  check_vertices(u.vertices, *spectrum_);
  return gather_points(coef_, temporal_factor(u.times), spatial_factor(u.vertices), fact_.task, u.task_of, u.time_of,
                       u.vertex_of);
}

Eigen::VectorXd GpModel::posterior_variance(std::span<const QueryPoint> query) const {
  if (query.empty()) fail(ErrorKind::InvalidArgument, "query: empty");
  const auto u = index_queries(query);
  check_vertices(u.vertices, *spectrum_);
  const Eigen::MatrixXd a = temporal_factor(u.times);   // rows: U_t^T k_t(t)
  const Eigen::MatrixXd b = spatial_factor(u.vertices);  // rows: U_s^T k_s(x)
  const Eigen::VectorXd w = spectral_weights(*spectrum_, theta_.sigma_m, theta_.l_s);
  const Index nt = fact_.n_time(), ns = fact_.n_space();

  // Per task q: the quadratic form of the row K_f(q, :) against the 2x2 block inverse.
  Eigen::VectorXd weight[2];
  for (int q = 0; q < 2; ++q) {
    const double c0 = fact_.task(q, 0), c1 = fact_.task(q, 1);
    weight[q] = c0 * c0 * fact_.inv11.array() + 2.0 * c0 * c1 * fact_.inv12.array() + c1 * c1 * fact_.inv22.array();
  }

  Eigen::VectorXd out(static_cast<Index>(query.size()));
  for (std::size_t i = 0; i < query.size(); ++i) {
    const int q = u.task_of[i];
    const auto phi = spectrum_->eigenvectors.row(u.vertices[static_cast<std::size_t>(u.vertex_of[i])]);
    const double prior = fact_.task(q, q) * phi.array().square().matrix().dot(w) * theta_.sigma_a;
    const Eigen::RowVectorXd at = a.row(u.time_of[i]).array().square();
    const Eigen::RowVectorXd bs = b.row(u.vertex_of[i]).array().square();
    double explained = 0.0;
    for (Index s = 0; s < ns; ++s) explained += bs[s] * at.dot(weight[q].segment(s * nt, nt));
    out[static_cast<Index>(i)] = std::max(prior - explained, 0.0);
  }
  return out;
}

FieldTensor GpModel::posterior_variance_grid(std::span<const int> vertices, std::span<const double> times) const {
  FieldTensor out(data_->data.tasks, std::vector<int>(vertices.begin(), vertices.end()),
                  std::vector<double>(times.begin(), times.end()));
  std::vector<QueryPoint> query;
  query.reserve(static_cast<std::size_t>(out.values.size()));
  for (Index f = 0; f < out.n_tasks(); ++f)
    for (Index s = 0; s < out.n_space(); ++s)
      for (Index t = 0; t < out.n_time(); ++t)
        query.push_back({static_cast<int>(f), vertices[static_cast<std::size_t>(s)], times[static_cast<std::size_t>(t)]});
  const Eigen::VectorXd var = posterior_variance(query);
  for (std::size_t i = 0; i < query.size(); ++i) {
    // Query order matches the (task, space, time) storage order.
    out.values.data()[i] = var[static_cast<Index>(i)];
  }
  return out;
}

LooResult GpModel::loo() const {
  const Index ns = fact_.n_space(), nt = fact_.n_time();
  if (ns < 2) fail(ErrorKind::InvalidArgument, "loo: at least two training locations required");
  const Tensor3 alpha = rotate_out(fact_, coef_);  // Sigma^{-1} y

  // Diagonal block of Sigma^{-1} at location i is (I_2 kron U_t) C_i (I_2 kron U_t)^T,
  // where C_i holds per-temporal-mode 2x2 blocks c_fg = sum_s U_s(i,s)^2 inv_fg(s, .).
  const Eigen::MatrixXd us2 = fact_.U_s.array().square();
  auto as_matrix = [&](const Eigen::VectorXd& v) { return Eigen::Map<const Eigen::MatrixXd>(v.data(), nt, ns); };
  const Eigen::MatrixXd c11 = as_matrix(fact_.inv11) * us2.transpose();
  const Eigen::MatrixXd c12 = as_matrix(fact_.inv12) * us2.transpose();
  const Eigen::MatrixXd c22 = as_matrix(fact_.inv22) * us2.transpose();

  LooResult out;
  out.residuals = data_->data;
  double sum_sq = 0.0;
  for (Index i = 0; i < ns; ++i) {
    const Eigen::VectorXd au = fact_.U_t.transpose() * alpha.slice(0).col(i);
    const Eigen::VectorXd av = fact_.U_t.transpose() * alpha.slice(1).col(i);
    Eigen::VectorXd ru(nt), rv(nt);
    for (Index tau = 0; tau < nt; ++tau) {
      const double a = c11(tau, i), b = c12(tau, i), d = c22(tau, i);
      const double det = a * d - b * b;
      if (!(det > 0.0) || !(a > 0.0)) fail(ErrorKind::IllConditioned, "loo: singular per-location block at location " + std::to_string(i));
      ru[tau] = (d * au[tau] - b * av[tau]) / det;
      rv[tau] = (-b * au[tau] + a * av[tau]) / det;
    }
    out.residuals.task_block(0).col(i) = fact_.U_t * ru;
    out.residuals.task_block(1).col(i) = fact_.U_t * rv;
  }
  for (double r : out.residuals.values.data()) sum_sq += r * r;
  out.tau2_cv = sum_sq / static_cast<double>(out.residuals.values.size());
  return out;
}

double nll(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum) {
  return GpModel(theta, data, spectrum).nll();
}

FieldTensor posterior_mean(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                           std::span<const int> vertices, std::span<const double> times) {
  return GpModel(theta, data, spectrum).posterior_mean_grid(vertices, times);
}

Eigen::VectorXd posterior_mean(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                               std::span<const QueryPoint> query) {
  return GpModel(theta, data, spectrum).posterior_mean(query);
}

Eigen::VectorXd posterior_variance(const Hyperparams& theta, const TrainingSet& data,
                                   const LaplacianSpectrum& spectrum, std::span<const QueryPoint> query) {
  return GpModel(theta, data, spectrum).posterior_variance(query);
}

LooResult loo_residuals(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum) {
  return GpModel(theta, data, spectrum).loo();
}

}  // namespace pmgp
