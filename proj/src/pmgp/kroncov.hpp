#pragma once

#include "pmgp/field.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace pmgp {

// Eigendecomposition of a symmetric PSD kernel block. Eigenvalues below
// 1e-12 * max are raised to that floor.
struct SymmetricEigen {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& k);

// Factored two-task training covariance
//   Sigma = K_f kron K_s kron K_t + D kron I kron I = U Lambda U^T,
// with U = I_2 kron U_s kron U_t and Lambda a 2x2 block matrix of diagonals.
// Diagonal vectors have length N_s N_t and are indexed s * N_t + t.
struct CovFactorization {
  Eigen::MatrixXd U_s;
  Eigen::VectorXd lam_s;
  Eigen::MatrixXd U_t;
  Eigen::VectorXd lam_t;
  Eigen::Matrix2d task;
  Eigen::Vector2d noise;

  Eigen::VectorXd lam11, lam12, lam22;
  Eigen::VectorXd schur;  // lam22 - lam12^2 / lam11
  Eigen::VectorXd inv11, inv12, inv22;  // blocks of Lambda^{-1}

  Index n_space() const { return U_s.rows(); }
  Index n_time() const { return U_t.rows(); }
};

CovFactorization factorize(const Eigen::MatrixXd& K_s, const Eigen::MatrixXd& K_t, const Eigen::Matrix2d& task,
                           const Eigen::Vector2d& noise);
CovFactorization factorize(SymmetricEigen spatial, SymmetricEigen temporal, const Eigen::Matrix2d& task,
                           const Eigen::Vector2d& noise);

// (U_s kron U_t)^T y per task, as a (time, space, task) tensor.
Tensor3 rotate_in(const CovFactorization& fact, const Tensor3& y);
// (U_s kron U_t) x per task.
Tensor3 rotate_out(const CovFactorization& fact, const Tensor3& x);
// Lambda^{-1} applied to a rotated tensor.
Tensor3 apply_block_inverse(const CovFactorization& fact, const Tensor3& v);

// Lambda^{-1} (U^T y): the core tensor contracted with cross-kernels to form
// the posterior mean.
Tensor3 weighted_coefficients(const CovFactorization& fact, const FieldTensor& y);

FieldTensor apply_inverse(const CovFactorization& fact, const FieldTensor& y);
double quadratic_form(const CovFactorization& fact, const FieldTensor& y);
double log_det(const CovFactorization& fact);

// Number of factorizations performed by this process so far.
std::uint64_t factorization_count();

}  // namespace pmgp
