#pragma once

#include "pmgp/mesh.hpp"

#include <Eigen/Dense>

#include <span>

namespace pmgp {

// The nine trainable GP parameters.
struct Hyperparams {
  double sigma_m = 1.0;  // spatial scale
  double l_s = 1.0;      // spatial length-scale
  double sigma_a = 1.0;  // temporal scale
  double l_t = 1.0;      // temporal length-scale
  double beta11 = 1.0;   // task factor L = [[beta11, 0], [beta21, beta22]]
  double beta21 = 0.0;
  double beta22 = 1.0;
  double noise_u = 1e-2;  // task noise variances
  double noise_v = 1e-2;

  static constexpr int kCount = 9;

  // Throws on non-finite entries or violated positivity.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

// Matern spectral density with nu = 3/2 on a d = 2 manifold, evaluated at
// sqrt(lambda). Constants follow the closed form exactly, with no unit-variance
// renormalization.
double spectral_density(double lambda, double l_s);

// sigma_m * S(sqrt(lambda_j)) for every mode.
Eigen::VectorXd spectral_weights(const LaplacianSpectrum& spectrum, double sigma_m, double l_s);

// K_s[a, b] = sum_j sigma_m S(sqrt(lambda_j)) phi_j(rows[a]) phi_j(cols[b]).
Eigen::MatrixXd spatial_kernel(const LaplacianSpectrum& spectrum, double sigma_m, double l_s,
                               std::span<const int> rows, std::span<const int> cols);

// Same kernel with the Laplace-Beltrami operator applied to the first argument:
// each mode is scaled by -lambda_j.
Eigen::MatrixXd spatial_kernel_laplacian(const LaplacianSpectrum& spectrum, double sigma_m, double l_s,
                                         std::span<const int> rows, std::span<const int> cols);

// Matern-3/2 in time.
double temporal_kernel(double t, double t_prime, double sigma_a, double l_t);

// d/dt_i of temporal_kernel(t_i, t_j): -sigma_a a^2 m exp(-a m) sign(t_i - t_j),
// with m = |t_i - t_j| and a = sqrt(3) / l_t.
double temporal_kernel_dt(double t_i, double t_j, double sigma_a, double l_t);

Eigen::MatrixXd temporal_kernel_matrix(std::span<const double> a, std::span<const double> b, double sigma_a,
                                       double l_t);
Eigen::MatrixXd temporal_kernel_dt_matrix(std::span<const double> a, std::span<const double> b, double sigma_a,
                                          double l_t);

// L L^T for the lower-triangular task factor.
Eigen::Matrix2d task_kernel(const Hyperparams& params);

}  // namespace pmgp
