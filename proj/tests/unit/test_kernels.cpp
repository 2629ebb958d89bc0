#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pmgp/error.hpp"
#include "pmgp/kernels.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pmgp;

namespace {

// Independent long-double evaluation of the Matern nu = 3/2, d = 2 density.
long double density_ld(long double lambda, long double l_s) {
  const long double nu = 1.5L, d = 2.0L, pi = std::numbers::pi_v<long double>;
  const long double c = std::pow(2.0L, d) * std::pow(pi, d / 2) * std::tgamma(nu + d / 2) * std::pow(2 * nu, nu) /
                        (std::tgamma(nu) * std::pow(l_s, 2 * nu));
  return c * std::pow(2 * nu / (l_s * l_s) + 4 * pi * pi * lambda, -(nu + d / 2));
}

double min_eig(const Eigen::MatrixXd& k) { return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues()[0]; }

LaplacianSpectrum tetra_spectrum() {
  TriMesh m;
  m.vertices.resize(4, 3);
  m.vertices << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  m.faces.resize(4, 3);
  m.faces << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
  const auto lap = cotangent_laplacian(m);
  return eigen_spectrum(lap.stiffness, lap.mass, 4);
}

}  // namespace

TEST_CASE("spectral density at zero frequency and unit length-scale is 2 pi") {
  // The closed form gives 6 pi 3^{3/2} (3)^{-5/2} = 2 pi.
  CHECK(spectral_density(0.0, 1.0) == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("spectral density agrees with an extended-precision evaluation") {
  for (auto [lam, ls] : {std::pair{1.0, 2.0}, {0.0, 0.3}, {12.0, 0.7}, {250.0, 5.0}}) {
    const double ref = static_cast<double>(density_ld(lam, ls));
    CHECK(oracle::rel_diff(spectral_density(lam, ls), ref) <= 1e-13);
  }
}

TEST_CASE("spectral density decreases in lambda") {
  CHECK(spectral_density(0, 1) > spectral_density(1, 1));
  CHECK(spectral_density(1, 1) > spectral_density(10, 1));
  CHECK_THROWS_AS(spectral_density(-1.0, 1.0), Error);
  CHECK_THROWS_AS(spectral_density(1.0, 0.0), Error);
  CHECK_THROWS_AS(spectral_density(std::nan(""), 1.0), Error);
}

TEST_CASE("single-mode spatial kernel is rank one") {
  const LaplacianSpectrum s = truncate(oracle::small_sphere_spectrum(), 1);
  const std::vector<int> ids{0, 5, 9, 17};
  const Eigen::MatrixXd k = spatial_kernel(s, 1.3, 0.5, ids, ids);
  const double c = s.eigenvectors(0, 0);
  const Eigen::MatrixXd expect = Eigen::MatrixXd::Constant(4, 4, 1.3 * spectral_density(0, 0.5) * c * c);
  CHECK((k - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect(0, 0));
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(k).rank() == 1);
}

TEST_CASE("tetrahedron spatial kernel matches dense Phi diag Phi^T and is PSD") {
  const LaplacianSpectrum s = tetra_spectrum();
  const std::vector<int> all{0, 1, 2, 3};
  const Eigen::MatrixXd k = spatial_kernel(s, 1.0, 1.0, all, all);
  Eigen::VectorXd w(4);
  for (int j = 0; j < 4; ++j) w[j] = spectral_density(s.eigenvalues[j], 1.0);
  const Eigen::MatrixXd dense = s.eigenvectors * w.asDiagonal() * s.eigenvectors.transpose();
  CHECK((k - dense).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(min_eig(k) >= -1e-10);
  CHECK_THROWS_AS(spatial_kernel(s, 1.0, 1.0, std::vector<int>{4}, all), Error);
}

TEST_CASE("spatial kernel Laplacian scales each mode by minus lambda") {
  const LaplacianSpectrum& s = oracle::small_sphere_spectrum();
  const std::vector<int> rows{1, 2, 3}, cols{4, 8};
  Eigen::VectorXd w = spectral_weights(s, 0.7, 0.4);
  const Eigen::MatrixXd expect =
      -s.eigenvectors(rows, Eigen::all) * (s.eigenvalues.cwiseProduct(w)).asDiagonal() * s.eigenvectors(cols, Eigen::all).transpose();
  CHECK((spatial_kernel_laplacian(s, 0.7, 0.4, rows, cols) - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("truncating modes removes PSD terms") {
  const LaplacianSpectrum& s = oracle::small_sphere_spectrum();
  std::vector<int> all(static_cast<std::size_t>(s.n_vertices()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  double prev = -1.0;
  for (Index k : {1, 4, 9, 16, 42}) {
    const Eigen::MatrixXd big = spatial_kernel(s, 1.0, 0.5, all, all);
    const Eigen::MatrixXd small = spatial_kernel(truncate(s, k), 1.0, 0.5, all, all);
    CHECK(min_eig(big - small) >= -1e-10);
    CHECK(small.trace() > prev);
    prev = small.trace();
  }
}

TEST_CASE("temporal kernel values") {
  CHECK(temporal_kernel(3.0, 3.0, 1.7, 2.0) == doctest::Approx(1.7));
  CHECK(temporal_kernel(0.0, 1.0, 1.0, std::sqrt(3.0)) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(temporal_kernel(0.0, 1.0, 1.0, std::sqrt(3.0)) == doctest::Approx(0.735759).epsilon(1e-6));
  CHECK(temporal_kernel(0, 1, 1.2, 3) > temporal_kernel(0, 2, 1.2, 3));
  CHECK(temporal_kernel(0, 2, 1.2, 3) > temporal_kernel(0, 5, 1.2, 3));
}

TEST_CASE("temporal kernel derivative values, parity and finite differences") {
  CHECK(temporal_kernel_dt(2.0, 2.0, 1.0, 1.0) == 0.0);
  CHECK(temporal_kernel_dt(1.0, 0.0, 1.0, std::sqrt(3.0)) == doctest::Approx(-std::exp(-1.0)).epsilon(1e-12));
  CHECK(temporal_kernel_dt(1.0, 0.0, 1.0, std::sqrt(3.0)) == doctest::Approx(-0.367879).epsilon(1e-6));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lag(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const double d = lag(rng);
    CHECK(temporal_kernel_dt(d, 0.0, 1.3, 2.1) == -temporal_kernel_dt(-d, 0.0, 1.3, 2.1));
  }
  const double h = 1e-5;
  const double fd = (temporal_kernel(0.7 + h, 0.0, 1.0, 1.0) - temporal_kernel(0.7 - h, 0.0, 1.0, 1.0)) / (2 * h);
  CHECK(std::abs(fd - temporal_kernel_dt(0.7, 0.0, 1.0, 1.0)) <= 1e-6);
}

TEST_CASE("temporal kernel matrices are PSD for random parameters") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ts(10);
    for (auto& t : ts) t = 20 * u(rng);
    std::sort(ts.begin(), ts.end());
    const Eigen::MatrixXd k = temporal_kernel_matrix(ts, ts, 0.1 + 3 * u(rng), 0.1 + 10 * u(rng));
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(min_eig(k) >= -1e-10);
  }
}

TEST_CASE("task kernel is L L^T") {
  Hyperparams h;
  CHECK(task_kernel(h) == Eigen::Matrix2d::Identity());
  h.beta11 = 2;
  h.beta21 = 1;
  h.beta22 = 1;
  Eigen::Matrix2d expect;
  expect << 4, 2, 2, 2;
  CHECK(task_kernel(h) == expect);
  CHECK(task_kernel(h).determinant() == doctest::Approx(4.0));
  h.beta22 = 0;
  CHECK_THROWS_AS(task_kernel(h), Error);
}
