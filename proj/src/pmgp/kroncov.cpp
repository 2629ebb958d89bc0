#include "pmgp/kroncov.hpp"

#include "pmgp/error.hpp"

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>

namespace pmgp {

namespace {
std::atomic<std::uint64_t> g_factorizations{0};
}

std::uint64_t factorization_count() { return g_factorizations.load(); }

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols() || k.rows() == 0) fail(ErrorKind::InvalidArgument, "symmetric_eigen: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (k + k.transpose()));
  if (solver.info() != Eigen::Success) fail(ErrorKind::IllConditioned, "symmetric_eigen: eigensolver did not converge");
  SymmetricEigen out{solver.eigenvectors(), solver.eigenvalues()};
  const double floor = 1e-12 * std::max(out.values.maxCoeff(), 0.0);
  out.values = out.values.cwiseMax(floor);
  return out;
}

CovFactorization factorize(const Eigen::MatrixXd& K_s, const Eigen::MatrixXd& K_t, const Eigen::Matrix2d& task,
                           const Eigen::Vector2d& noise) {
  return factorize(symmetric_eigen(K_s), symmetric_eigen(K_t), task, noise);
}

CovFactorization factorize(SymmetricEigen spatial, SymmetricEigen temporal, const Eigen::Matrix2d& task,
                           const Eigen::Vector2d& noise) {
  if (!(noise.array() >= 0.0).all()) fail(ErrorKind::InvalidArgument, "factorize: noise variances must be >= 0");
  ++g_factorizations;
  CovFactorization f;
  f.U_s = std::move(spatial.vectors);
  f.lam_s = std::move(spatial.values);
  f.U_t = std::move(temporal.vectors);
  f.lam_t = std::move(temporal.values);
  f.task = task;
  f.noise = noise;

  const Index ns = f.lam_s.size(), nt = f.lam_t.size();
  Eigen::VectorXd core(ns * nt);
  for (Index s = 0; s < ns; ++s) core.segment(s * nt, nt) = f.lam_s[s] * f.lam_t;

  f.lam11 = task(0, 0) * core.array() + noise[0];
  f.lam12 = task(0, 1) * core;
  f.lam22 = task(1, 1) * core.array() + noise[1];
  if (!(f.lam11.array() > 0.0).all()) fail(ErrorKind::IllConditioned, "factorize: ill-conditioned covariance (Lambda_11 not positive)");
  f.schur = f.lam22.array() - f.lam12.array().square() / f.lam11.array();
  if (!(f.schur.array() > 0.0).all()) fail(ErrorKind::IllConditioned, "factorize: ill-conditioned covariance (Schur complement not positive)");

  f.inv22 = f.schur.cwiseInverse();
  f.inv12 = -(f.lam12.array() / (f.lam11.array() * f.schur.array()));
  f.inv11 = f.lam11.cwiseInverse().array() + f.lam12.array().square() / (f.lam11.array().square() * f.schur.array());
  return f;
}

namespace {

void check_dims(const CovFactorization& fact, const Tensor3& y, const char* who) {
  if (y.dim1() != fact.n_time() || y.dim2() != fact.n_space() || y.dim3() != 2) {
    fail(ErrorKind::InvalidArgument, std::string(who) + ": dimension mismatch");
  }
}

}  // namespace

Tensor3 rotate_in(const CovFactorization& fact, const Tensor3& y) {
  check_dims(fact, y, "rotate_in");
  Tensor3 v(y.dim1(), y.dim2(), 2);
  for (Index f = 0; f < 2; ++f) v.slice(f).noalias() = fact.U_t.transpose() * y.slice(f) * fact.U_s;
  return v;
}

Tensor3 rotate_out(const CovFactorization& fact, const Tensor3& x) {
  check_dims(fact, x, "rotate_out");
  Tensor3 y(x.dim1(), x.dim2(), 2);
  for (Index f = 0; f < 2; ++f) y.slice(f).noalias() = fact.U_t * x.slice(f) * fact.U_s.transpose();
  return y;
}

Tensor3 apply_block_inverse(const CovFactorization& fact, const Tensor3& v) {
  check_dims(fact, v, "apply_block_inverse");
  Tensor3 out(v.dim1(), v.dim2(), 2);
  const Index n = v.dim1() * v.dim2();
  Eigen::Map<const Eigen::VectorXd> vu(v.data().data(), n), vv(v.data().data() + n, n);
  Eigen::Map<Eigen::VectorXd> ou(out.data().data(), n), ov(out.data().data() + n, n);
  ou = fact.inv11.cwiseProduct(vu) + fact.inv12.cwiseProduct(vv);
  ov = fact.inv12.cwiseProduct(vu) + fact.inv22.cwiseProduct(vv);
  return out;
}

Tensor3 weighted_coefficients(const CovFactorization& fact, const FieldTensor& y) {
  return apply_block_inverse(fact, rotate_in(fact, y.values));
}

FieldTensor apply_inverse(const CovFactorization& fact, const FieldTensor& y) {
  FieldTensor out = y;
  out.values = rotate_out(fact, weighted_coefficients(fact, y));
  return out;
}

double quadratic_form(const CovFactorization& fact, const FieldTensor& y) {
  const Tensor3 v = rotate_in(fact, y.values);
  const Index n = v.dim1() * v.dim2();
  Eigen::Map<const Eigen::VectorXd> vu(v.data().data(), n), vv(v.data().data() + n, n);
  return (fact.inv11.array() * vu.array().square()).sum() + 2.0 * (fact.inv12.array() * vu.array() * vv.array()).sum() +
         (fact.inv22.array() * vv.array().square()).sum();
}

double log_det(const CovFactorization& fact) {
  if (!(fact.lam11.array() > 0.0).all() || !(fact.schur.array() > 0.0).all()) {
    fail(ErrorKind::IllConditioned, "log_det: non-positive diagonal entry");
  }
  return fact.lam11.array().log().sum() + fact.schur.array().log().sum();
}

}  // namespace pmgp
