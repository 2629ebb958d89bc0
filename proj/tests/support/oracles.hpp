#pragma once

// Dense reference implementations used as test oracles. Everything here forms
// full matrices and calls generic LDLT/LLT solves; nothing is shared with the
// structured code paths beyond the kernel functions themselves.

#include "pmgp/gp.hpp"
#include "pmgp/kernels.hpp"
#include "pmgp/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using pmgp::Hyperparams;
using pmgp::Index;
using pmgp::LaplacianSpectrum;
using pmgp::TrainingSet;

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// Max |a - b| / max(|b|_inf, floor).
inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-12) {
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), floor);
}

// K_f kron K_s kron K_t + D kron I, rows ordered (task, space, time) with time fastest.
inline Eigen::MatrixXd dense_sigma(const Hyperparams& th, const TrainingSet& set, const LaplacianSpectrum& spec) {
  const auto& ids = set.data.space_ids;
  const auto& ts = set.data.times;
  const Eigen::MatrixXd ks = pmgp::spatial_kernel(spec, th.sigma_m, th.l_s, ids, ids);
  const Eigen::MatrixXd kt = pmgp::temporal_kernel_matrix(ts, ts, th.sigma_a, th.l_t);
  const Eigen::MatrixXd kf = pmgp::task_kernel(th);
  const Eigen::Matrix2d d = Eigen::Vector2d(th.noise_u, th.noise_v).asDiagonal();
  const Index n = ks.rows() * kt.rows();
  return kron(kf, kron(ks, kt)) + kron(d, Eigen::MatrixXd::Identity(n, n));
}

inline Eigen::MatrixXd dense_cross(const Hyperparams& th, const TrainingSet& set, const LaplacianSpectrum& spec,
                                   const std::vector<int>& qv, const std::vector<double>& qt) {
  const Eigen::MatrixXd ks = pmgp::spatial_kernel(spec, th.sigma_m, th.l_s, qv, set.data.space_ids);
  const Eigen::MatrixXd kt = pmgp::temporal_kernel_matrix(qt, set.data.times, th.sigma_a, th.l_t);
  return kron(pmgp::task_kernel(th), kron(ks, kt));
}

inline Eigen::VectorXd flat(const pmgp::FieldTensor& f) { return f.values.flat(); }

inline double dense_nll(const Hyperparams& th, const TrainingSet& set, const LaplacianSpectrum& spec) {
  const Eigen::MatrixXd sigma = dense_sigma(th, set, spec);
  const Eigen::VectorXd y = flat(set.data);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  const double quad = y.dot(llt.solve(y));
  const double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double n = static_cast<double>(y.size());
  return (quad + logdet + n * std::log(2.0 * std::numbers::pi)) / (2.0 * n);
}

// Posterior mean over all tasks x qv x qt, flattened (task, vertex, time) with time fastest.
inline Eigen::VectorXd dense_mean(const Hyperparams& th, const TrainingSet& set, const LaplacianSpectrum& spec,
                                  const std::vector<int>& qv, const std::vector<double>& qt) {
  const Eigen::MatrixXd sigma = dense_sigma(th, set, spec);
  return dense_cross(th, set, spec, qv, qt) * sigma.ldlt().solve(flat(set.data));
}

inline Eigen::VectorXd dense_variance(const Hyperparams& th, const TrainingSet& set, const LaplacianSpectrum& spec,
                                      const std::vector<int>& qv, const std::vector<double>& qt) {
  const Eigen::MatrixXd sigma = dense_sigma(th, set, spec);
  const Eigen::MatrixXd cross = dense_cross(th, set, spec, qv, qt);
  const Eigen::MatrixXd prior = kron(pmgp::task_kernel(th),
                                     kron(pmgp::spatial_kernel(spec, th.sigma_m, th.l_s, qv, qv),
                                          pmgp::temporal_kernel_matrix(qt, qt, th.sigma_a, th.l_t)));
  return (prior - cross * sigma.ldlt().solve(cross.transpose())).diagonal();
}

// Residual y_i - E[y_i | y_{-i}] for every location i, by refitting without it.
inline Eigen::VectorXd naive_loo(const Hyperparams& th, const TrainingSet& set, const LaplacianSpectrum& spec) {
  const Index ns = set.n_space(), nt = set.n_time();
  pmgp::FieldTensor res = set.data;
  for (Index i = 0; i < ns; ++i) {
    std::vector<int> keep;
    for (Index s = 0; s < ns; ++s) {
      if (s != i) keep.push_back(set.data.space_ids[static_cast<std::size_t>(s)]);
    }
    TrainingSet reduced;
    reduced.data = pmgp::FieldTensor(set.data.tasks, keep, set.data.times);
    for (Index f = 0; f < 2; ++f) {
      Index col = 0;
      for (Index s = 0; s < ns; ++s) {
        if (s == i) continue;
        reduced.data.task_block(f).col(col++) = set.data.task_block(f).col(s);
      }
    }
    const std::vector<int> qv{set.data.space_ids[static_cast<std::size_t>(i)]};
    const Eigen::VectorXd mean = dense_mean(th, reduced, spec, qv, set.data.times);
    for (Index f = 0; f < 2; ++f) {
      for (Index t = 0; t < nt; ++t) res.at(f, i, t) = set.data.at(f, i, t) - mean[f * nt + t];
    }
  }
  return flat(res);
}

struct Instance {
  Hyperparams theta;
  TrainingSet set;
};

inline Hyperparams random_theta(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  Hyperparams h;
  h.sigma_m = in(0.5, 2.0);
  h.l_s = in(0.2, 1.0);
  h.sigma_a = in(0.5, 2.0);
  h.l_t = in(1.0, 5.0);
  h.beta11 = in(0.5, 1.5);
  h.beta21 = in(-1.0, 1.0);
  h.beta22 = in(0.5, 1.5);
  h.noise_u = in(0.01, 0.1);
  h.noise_v = in(0.01, 0.1);
  return h;
}

// ns distinct sorted vertices, nt increasing times in [0, 10], standard normal data.
inline Instance random_instance(std::mt19937_64& rng, const LaplacianSpectrum& spec, Index ns, Index nt) {
  std::vector<int> all(static_cast<std::size_t>(spec.n_vertices()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<int> ids(all.begin(), all.begin() + ns);
  std::sort(ids.begin(), ids.end());
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> ts(static_cast<std::size_t>(nt));
  for (auto& t : ts) t = u(rng);
  std::sort(ts.begin(), ts.end());
  for (std::size_t k = 1; k < ts.size(); ++k) ts[k] = std::max(ts[k], ts[k - 1] + 0.05);

  Instance inst;
  inst.theta = random_theta(rng);
  inst.set.data = pmgp::FieldTensor(pmgp::default_task_labels(), ids, ts);
  std::normal_distribution<double> n01;
  for (double& x : inst.set.data.values.data()) x = n01(rng);
  return inst;
}

// Full spectrum of a 42-vertex unit icosphere.
inline const LaplacianSpectrum& small_sphere_spectrum() {
  static const LaplacianSpectrum spec = [] {
    const auto mesh = pmgp::make_icosphere(1, 1.0);
    const auto lap = pmgp::cotangent_laplacian(mesh);
    return pmgp::eigen_spectrum(lap.stiffness, lap.mass, mesh.n_vertices());
  }();
  return spec;
}

}  // namespace oracle
