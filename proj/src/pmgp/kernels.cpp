#include "pmgp/kernels.hpp"

#include "pmgp/error.hpp"

#include <cmath>
#include <numbers>

namespace pmgp {

namespace {

constexpr double kNu = 1.5;
constexpr double kDim = 2.0;
// Gamma(nu + d/2) = Gamma(5/2) and Gamma(nu) = Gamma(3/2).
constexpr double kGammaNuPlusHalfDim = 0.75 * 1.7724538509055160273;
constexpr double kGammaNu = 0.5 * 1.7724538509055160273;

void check_index(int id, Eigen::Index n) {
  if (id < 0 || id >= n) fail(ErrorKind::InvalidArgument, "spatial kernel: vertex index " + std::to_string(id) + " out of range");
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& phi, std::span<const int> ids) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), phi.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check_index(ids[i], phi.rows());
    out.row(static_cast<Eigen::Index>(i)) = phi.row(ids[i]);
  }
  return out;
}

}  // namespace

void Hyperparams::validate() const {
  const double all[] = {sigma_m, l_s, sigma_a, l_t, beta11, beta21, beta22, noise_u, noise_v};
  for (double x : all) {
    if (!std::isfinite(x)) fail(ErrorKind::InvalidArgument, "hyperparameters: non-finite value");
  }
  if (sigma_m <= 0 || l_s <= 0 || sigma_a <= 0 || l_t <= 0) {
    fail(ErrorKind::InvalidArgument, "hyperparameters: scales and length-scales must be positive");
  }
  if (beta11 <= 0 || beta22 <= 0) fail(ErrorKind::InvalidArgument, "hyperparameters: task factor diagonal must be positive");
  if (noise_u < 0 || noise_v < 0) fail(ErrorKind::InvalidArgument, "hyperparameters: noise variances must be >= 0");
}

double spectral_density(double lambda, double l_s) {
  if (!std::isfinite(lambda) || !std::isfinite(l_s)) fail(ErrorKind::InvalidArgument, "spectral_density: non-finite input");
  if (lambda < 0 || l_s <= 0) fail(ErrorKind::InvalidArgument, "spectral_density: requires lambda >= 0 and l_s > 0");
  using std::numbers::pi;
  const double prefactor = std::pow(2.0, kDim) * std::pow(pi, kDim / 2.0) * kGammaNuPlusHalfDim *
                           std::pow(2.0 * kNu, kNu) / (kGammaNu * std::pow(l_s, 2.0 * kNu));
  return prefactor * std::pow(2.0 * kNu / (l_s * l_s) + 4.0 * pi * pi * lambda, -(kNu + kDim / 2.0));
}

Eigen::VectorXd spectral_weights(const LaplacianSpectrum& spectrum, double sigma_m, double l_s) {
  Eigen::VectorXd w(spectrum.n_modes());
  for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = sigma_m * spectral_density(spectrum.eigenvalues[j], l_s);
  return w;
}

Eigen::MatrixXd spatial_kernel(const LaplacianSpectrum& spectrum, double sigma_m, double l_s,
                               std::span<const int> rows, std::span<const int> cols) {
  const Eigen::VectorXd w = spectral_weights(spectrum, sigma_m, l_s);
  const Eigen::MatrixXd a = gather_rows(spectrum.eigenvectors, rows);
  const Eigen::MatrixXd b = gather_rows(spectrum.eigenvectors, cols);
  return a * w.asDiagonal() * b.transpose();
}

Eigen::MatrixXd spatial_kernel_laplacian(const LaplacianSpectrum& spectrum, double sigma_m, double l_s,
                                         std::span<const int> rows, std::span<const int> cols) {
  const Eigen::VectorXd w = -spectral_weights(spectrum, sigma_m, l_s).cwiseProduct(spectrum.eigenvalues);
  const Eigen::MatrixXd a = gather_rows(spectrum.eigenvectors, rows);
  const Eigen::MatrixXd b = gather_rows(spectrum.eigenvectors, cols);
  return a * w.asDiagonal() * b.transpose();
}

double temporal_kernel(double t, double t_prime, double sigma_a, double l_t) {
  const double r = std::sqrt(3.0) * std::abs(t - t_prime) / l_t;
  return sigma_a * (1.0 + r) * std::exp(-r);
}

double temporal_kernel_dt(double t_i, double t_j, double sigma_a, double l_t) {
  const double a = std::sqrt(3.0) / l_t;
  const double diff = t_i - t_j;
  const double m = std::abs(diff);
  const double sign = (diff > 0) - (diff < 0);
  return -sigma_a * a * a * m * std::exp(-a * m) * sign;
}

Eigen::MatrixXd temporal_kernel_matrix(std::span<const double> a, std::span<const double> b, double sigma_a,
                                       double l_t) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j) k(i, j) = temporal_kernel(a[i], b[j], sigma_a, l_t);
  return k;
}

Eigen::MatrixXd temporal_kernel_dt_matrix(std::span<const double> a, std::span<const double> b, double sigma_a,
                                          double l_t) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j) k(i, j) = temporal_kernel_dt(a[i], b[j], sigma_a, l_t);
  return k;
}

Eigen::Matrix2d task_kernel(const Hyperparams& params) {
  if (!(params.beta11 > 0) || !(params.beta22 > 0)) {
    fail(ErrorKind::InvalidArgument, "task_kernel: diagonal factor entries must be positive");
  }
  Eigen::Matrix2d l;
  l << params.beta11, 0.0, params.beta21, params.beta22;
  return l * l.transpose();
}

}  // namespace pmgp
