#pragma once

#include "pmgp/field.hpp"
#include "pmgp/kernels.hpp"
#include "pmgp/kroncov.hpp"
#include "pmgp/mesh.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>

namespace pmgp {

// Observations y(f, x_i, t_j) on training vertices X_tr = data.space_ids and
// time stamps T_tr = data.times.
struct TrainingSet {
  std::string mesh_ref;
  FieldTensor data;

  Index n_space() const { return data.n_space(); }
  Index n_time() const { return data.n_time(); }
};

// Unique vertex ids, strictly increasing times, two tasks, finite values.
void validate_training_set(const TrainingSet& set, const LaplacianSpectrum& spectrum);

struct QueryPoint {
  int task = 0;
  int vertex = 0;
  double time = 0.0;
};

// Memo of unit-scale kernel eigendecompositions keyed by length-scale. The
// spatial and temporal factors depend on (sigma_m, l_s) and (sigma_a, l_t)
// only through a scalar multiple, so finite-difference probes of the other
// parameters reuse them. Not thread-safe; use one per optimization run.
class KernelCache {
 public:
  const SymmetricEigen& spatial(const LaplacianSpectrum& spectrum, std::span<const int> vertices, double l_s);
  const SymmetricEigen& temporal(std::span<const double> times, double l_t);

 private:
  static constexpr std::size_t kCapacity = 8;
  std::map<double, SymmetricEigen> spatial_, temporal_;
};

struct LooResult {
  FieldTensor residuals;
  double tau2_cv = 0.0;
};

// Multi-task GP conditioned on a training set for fixed hyperparameters. The
// covariance is factored once at construction; all queries are read-only.
// The training set and spectrum must outlive the model.
class GpModel {
 public:
  GpModel(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
          KernelCache* cache = nullptr);

  const Hyperparams& theta() const { return theta_; }
  const TrainingSet& training() const { return *data_; }
  const LaplacianSpectrum& spectrum() const { return *spectrum_; }
  const CovFactorization& factorization() const { return fact_; }
  // Lambda^{-1} U^T y as a (time, space, task) tensor.
  const Tensor3& coefficients() const { return coef_; }

  double nll() const;

  // All tasks over the vertex x time grid.
  FieldTensor posterior_mean_grid(std::span<const int> vertices, std::span<const double> times) const;
  FieldTensor posterior_variance_grid(std::span<const int> vertices, std::span<const double> times) const;

  Eigen::VectorXd posterior_mean(std::span<const QueryPoint> query) const;
  Eigen::VectorXd posterior_variance(std::span<const QueryPoint> query) const;

  LooResult loo() const;

  // U_s^T-rotated spatial and U_t^T-rotated temporal cross-kernel factors,
  // shared by mean and derivative evaluation.
  Eigen::MatrixXd spatial_factor(std::span<const int> vertices, bool laplacian = false) const;
  Eigen::MatrixXd temporal_factor(std::span<const double> times, bool time_derivative = false) const;

 private:
  Hyperparams theta_;
  const TrainingSet* data_;
  const LaplacianSpectrum* spectrum_;
  CovFactorization fact_;
  Tensor3 coef_;
};

// (f1 + f2 + f3) / (2 N_tr) with N_tr = 2 N_s N_t.
double nll(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum);

FieldTensor posterior_mean(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                           std::span<const int> vertices, std::span<const double> times);
Eigen::VectorXd posterior_mean(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                               std::span<const QueryPoint> query);
Eigen::VectorXd posterior_variance(const Hyperparams& theta, const TrainingSet& data,
                                   const LaplacianSpectrum& spectrum, std::span<const QueryPoint> query);
LooResult loo_residuals(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum);

// Evaluates sum_g task(q, g) * (time_rows[g] . space_rows) at paired
// (time index, vertex index) entries.
Eigen::VectorXd gather_points(const Tensor3& coef, const Eigen::MatrixXd& time_factor,
                              const Eigen::MatrixXd& space_factor, const Eigen::Matrix2d& task,
                              std::span<const int> task_of, std::span<const Index> time_index,
                              std::span<const Index> space_index);

}  // namespace pmgp
