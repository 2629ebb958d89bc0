#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pmgp/error.hpp"
#include "pmgp/gp.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pmgp;

namespace {

const LaplacianSpectrum& spec() { return oracle::small_sphere_spectrum(); }

std::vector<int> held_out(const TrainingSet& set, std::size_t n) {
  std::vector<int> out;
  for (int v = 0; out.size() < n; ++v) {
    if (std::find(set.data.space_ids.begin(), set.data.space_ids.end(), v) == set.data.space_ids.end()) out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("standard normal at zero gives half log 2 pi") {
  TrainingSet set;
  set.data = FieldTensor(default_task_labels(), {3}, {0.0});
  Hyperparams h;
  h.sigma_m = 1.0 / spatial_kernel(spec(), 1.0, 0.5, std::vector<int>{3}, std::vector<int>{3})(0, 0);
  h.l_s = 0.5;
  h.sigma_a = 1.0;
  h.noise_u = h.noise_v = 1e-14;
  CHECK(nll(h, set, spec()) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-10));
}

TEST_CASE("nll, posterior mean and variance match dense oracles") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const auto inst = oracle::random_instance(rng, spec(), 6, 5);
    const GpModel model(inst.theta, inst.set, spec());
    CHECK(oracle::rel_diff(model.nll(), oracle::dense_nll(inst.theta, inst.set, spec())) <= 1e-7);

    const std::vector<int> q = held_out(inst.set, 3);
    const std::vector<double> qt{0.5, 3.3, 11.0};
    CHECK(oracle::rel_diff(oracle::flat(model.posterior_mean_grid(q, qt)),
                           oracle::dense_mean(inst.theta, inst.set, spec(), q, qt)) <= 1e-7);
    CHECK(oracle::rel_diff(oracle::flat(model.posterior_variance_grid(q, qt)),
                           oracle::dense_variance(inst.theta, inst.set, spec(), q, qt)) <= 1e-7);
  }
}

TEST_CASE("scattered queries agree with the grid path") {
  std::mt19937_64 rng(22);
  const auto inst = oracle::random_instance(rng, spec(), 5, 4);
  const GpModel model(inst.theta, inst.set, spec());
  const std::vector<int> qv{0, 7, 40};
  const std::vector<double> qt{1.0, 2.5};
  const FieldTensor grid = model.posterior_mean_grid(qv, qt);
  const FieldTensor var = model.posterior_variance_grid(qv, qt);
  std::vector<QueryPoint> pts;
  for (int f = 0; f < 2; ++f)
    for (int v : qv)
      for (double t : qt) pts.push_back({f, v, t});
  CHECK(oracle::rel_diff(model.posterior_mean(pts), oracle::flat(grid)) <= 1e-12);
  CHECK(oracle::rel_diff(model.posterior_variance(pts), oracle::flat(var)) <= 1e-12);
}

TEST_CASE("near-noiseless posterior interpolates the data") {
  std::mt19937_64 rng(23);
  auto inst = oracle::random_instance(rng, spec(), 4, 4);
  inst.theta.noise_u = inst.theta.noise_v = 1e-10;
  const GpModel model(inst.theta, inst.set, spec());
  const FieldTensor mean = model.posterior_mean_grid(inst.set.data.space_ids, inst.set.data.times);
  CHECK(oracle::rel_diff(oracle::flat(mean), oracle::flat(inst.set.data)) <= 1e-4);
}

TEST_CASE("zero observations give a zero mean and zero LOO residuals") {
  std::mt19937_64 rng(24);
  auto inst = oracle::random_instance(rng, spec(), 4, 3);
  for (double& x : inst.set.data.values.data()) x = 0.0;
  const GpModel model(inst.theta, inst.set, spec());
  CHECK(oracle::flat(model.posterior_mean_grid(std::vector<int>{1, 2}, std::vector<double>{0.3})).cwiseAbs().maxCoeff() == 0.0);
  const LooResult loo = model.loo();
  CHECK(loo.tau2_cv == 0.0);
  CHECK(oracle::flat(loo.residuals).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("variance reverts to the prior far from the data and shrinks at observations") {
  std::mt19937_64 rng(25);
  auto inst = oracle::random_instance(rng, spec(), 5, 4);
  const GpModel model(inst.theta, inst.set, spec());
  const int v = inst.set.data.space_ids[0];
  const double far = 10.0 + 200.0 * inst.theta.l_t;
  const double prior_u = inst.theta.beta11 * inst.theta.beta11 * inst.theta.sigma_a *
                         spatial_kernel(spec(), inst.theta.sigma_m, inst.theta.l_s, std::vector<int>{v}, std::vector<int>{v})(0, 0);
  const std::vector<QueryPoint> q{{0, v, far}};
  CHECK(std::abs(model.posterior_variance(q)[0] - prior_u) <= 0.01 * prior_u);

  inst.theta.noise_u = inst.theta.noise_v = 1e-8;
  const GpModel tight(inst.theta, inst.set, spec());
  const std::vector<QueryPoint> at{{0, v, inst.set.data.times[1]}};
  CHECK(tight.posterior_variance(at)[0] < 0.1 * prior_u);
  CHECK(tight.posterior_variance(at)[0] >= 0.0);
}

TEST_CASE("fast LOO matches naive refits") {
  std::mt19937_64 rng(26);
  for (Index ns : {2, 3, 5, 6}) {
    const auto inst = oracle::random_instance(rng, spec(), ns, 4);
    const LooResult fast = loo_residuals(inst.theta, inst.set, spec());
    const Eigen::VectorXd naive = oracle::naive_loo(inst.theta, inst.set, spec());
    CHECK(oracle::rel_diff(oracle::flat(fast.residuals), naive) <= 1e-6);
    CHECK(fast.tau2_cv == doctest::Approx(naive.squaredNorm() / static_cast<double>(naive.size())).epsilon(1e-8));
  }
}

TEST_CASE("LOO needs at least two locations and factors once") {
  std::mt19937_64 rng(27);
  const auto one = oracle::random_instance(rng, spec(), 1, 3);
  CHECK_THROWS_AS(loo_residuals(one.theta, one.set, spec()), Error);

  const auto inst = oracle::random_instance(rng, spec(), 4, 3);
  const GpModel model(inst.theta, inst.set, spec());
  const auto before = factorization_count();
  model.loo();
  CHECK(factorization_count() == before);
}

TEST_CASE("tau2_cv does not depend on the order of training locations") {
  std::mt19937_64 rng(28);
  const auto inst = oracle::random_instance(rng, spec(), 5, 3);
  TrainingSet perm;
  std::vector<int> order{3, 0, 4, 2, 1};
  std::vector<int> ids;
  for (int i : order) ids.push_back(inst.set.data.space_ids[static_cast<std::size_t>(i)]);
  perm.data = FieldTensor(default_task_labels(), ids, inst.set.data.times);
  for (Index f = 0; f < 2; ++f)
    for (std::size_t s = 0; s < order.size(); ++s) perm.data.task_block(f).col(static_cast<Index>(s)) = inst.set.data.task_block(f).col(order[s]);
  CHECK(loo_residuals(inst.theta, perm, spec()).tau2_cv ==
        doctest::Approx(loo_residuals(inst.theta, inst.set, spec()).tau2_cv).epsilon(1e-10));
}

TEST_CASE("posterior mean is linear in the data; variance ignores it") {
  std::mt19937_64 rng(29);
  const auto a = oracle::random_instance(rng, spec(), 5, 4);
  TrainingSet b = a.set, c = a.set;
  std::normal_distribution<double> n01;
  for (double& x : b.data.values.data()) x = n01(rng);
  for (std::size_t i = 0; i < c.data.values.data().size(); ++i) {
    c.data.values.data()[i] = 2.5 * a.set.data.values.data()[i] + b.data.values.data()[i];
  }
  const std::vector<int> q{0, 1, 2};
  const std::vector<double> qt{1.0, 4.0};
  const Eigen::VectorXd ma = oracle::flat(posterior_mean(a.theta, a.set, spec(), q, qt));
  const Eigen::VectorXd mb = oracle::flat(posterior_mean(a.theta, b, spec(), q, qt));
  const Eigen::VectorXd mc = oracle::flat(posterior_mean(a.theta, c, spec(), q, qt));
  CHECK((mc - (2.5 * ma + mb)).cwiseAbs().maxCoeff() <= 1e-10);

  const GpModel ga(a.theta, a.set, spec()), gb(a.theta, b, spec());
  CHECK(oracle::flat(ga.posterior_variance_grid(q, qt)) == oracle::flat(gb.posterior_variance_grid(q, qt)));
}

TEST_CASE("uncorrelated tasks decouple") {
  std::mt19937_64 rng(30);
  auto inst = oracle::random_instance(rng, spec(), 4, 4);
  inst.theta.beta21 = 0.0;
  TrainingSet other = inst.set;
  other.data.task_block(1).setRandom();
  const std::vector<int> q{5, 6};
  const std::vector<double> qt{2.0};
  const FieldTensor m1 = posterior_mean(inst.theta, inst.set, spec(), q, qt);
  const FieldTensor m2 = posterior_mean(inst.theta, other, spec(), q, qt);
  CHECK(m1.task_block(0) == m2.task_block(0));
}

TEST_CASE("noisier data raises the expected nll") {
  std::mt19937_64 rng(31);
  const auto inst = oracle::random_instance(rng, spec(), 5, 4);
  double clean = 0.0, noisy = 0.0;
  std::normal_distribution<double> n01;
  for (int seed = 0; seed < 20; ++seed) {
    TrainingSet y = inst.set;
    for (double& x : y.data.values.data()) x = 0.0;
    // Draw from the model prior via the dense Cholesky factor.
    const Eigen::MatrixXd l = oracle::dense_sigma(inst.theta, inst.set, spec()).llt().matrixL();
    Eigen::VectorXd z(l.rows());
    for (Index i = 0; i < z.size(); ++i) z[i] = n01(rng);
    y.data.values.flat() = l * z;
    clean += nll(inst.theta, y, spec());
    for (double& x : y.data.values.data()) x += n01(rng);
    noisy += nll(inst.theta, y, spec());
  }
  CHECK(noisy > clean);
}

TEST_CASE("invalid inputs are rejected") {
  std::mt19937_64 rng(32);
  auto inst = oracle::random_instance(rng, spec(), 3, 3);
  const GpModel model(inst.theta, inst.set, spec());
  CHECK_THROWS_AS(model.posterior_mean_grid(std::vector<int>{99}, std::vector<double>{0.0}), Error);
  CHECK_THROWS_AS(model.posterior_mean(std::vector<QueryPoint>{}), Error);
  TrainingSet dup = inst.set;
  dup.data.space_ids[1] = dup.data.space_ids[0];
  CHECK_THROWS_AS(GpModel(inst.theta, dup, spec()), Error);
  Hyperparams bad = inst.theta;
  bad.l_s = -1.0;
  CHECK_THROWS_AS(GpModel(bad, inst.set, spec()), Error);
}
