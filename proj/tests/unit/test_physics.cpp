#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pmgp/error.hpp"
#include "pmgp/physics.hpp"

#include <random>
#include <set>

using namespace pmgp;

namespace {

const LaplacianSpectrum& spec() { return oracle::small_sphere_spectrum(); }

std::vector<int> all_vertices() {
  std::vector<int> v(static_cast<std::size_t>(spec().n_vertices()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
  return v;
}

}  // namespace

TEST_CASE("FHN reaction terms") {
  const FhnParams p;
  auto [g1, g2] = fhn_reaction(0.0, 0.7, p);
  CHECK(g1 == 0.0);
  CHECK(g2 == doctest::Approx(-p.b * p.d * 0.7));
  std::tie(g1, g2) = fhn_reaction(1.0, 1.0, p);
  CHECK(g1 == doctest::Approx(-0.1));
  CHECK(g2 == doctest::Approx(0.0));
  std::tie(g1, g2) = fhn_reaction(p.alpha, 0.0, p);
  CHECK(g1 == doctest::Approx(0.0));
  FhnParams plus = p;
  plus.coupling_sign = 1.0;
  CHECK(fhn_reaction(1.0, 1.0, plus).first == doctest::Approx(0.1));
}

TEST_CASE("collocation points are distinct, on the grid and seeded") {
  const std::vector<double> ts{0.0, 1.0, 2.0, 3.0};
  const CollocationSet a = sample_collocation(42, ts, 100, 9);
  const CollocationSet b = sample_collocation(42, ts, 100, 9);
  CHECK(a.vertices == b.vertices);
  CHECK(a.times == b.times);
  std::set<std::pair<int, double>> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.vertices[i] >= 0);
    CHECK(a.vertices[i] < 42);
    CHECK(std::find(ts.begin(), ts.end(), a.times[i]) != ts.end());
    seen.insert({a.vertices[i], a.times[i]});
  }
  CHECK(seen.size() == 100);
  CHECK(sample_collocation(42, ts, 168, 1).size() == 168);
  CHECK_THROWS_AS(sample_collocation(42, ts, 169, 1), Error);
  CHECK_THROWS_AS(sample_collocation(42, ts, 0, 1), Error);
}

TEST_CASE("constant-mode spectrum has zero surface Laplacian") {
  std::mt19937_64 rng(41);
  const LaplacianSpectrum one = truncate(spec(), 1);
  const auto inst = oracle::random_instance(rng, spec(), 5, 4);
  const CollocationSet c = sample_collocation(42, inst.set.data.times, 30, 2);
  const FieldDerivatives d = predict_with_derivatives(inst.theta, inst.set, one, c);
  CHECK(d.lap_u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.lap_v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("time derivative matches central differences of the posterior mean") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = oracle::random_instance(rng, spec(), 6, 5);
    const GpModel model(inst.theta, inst.set, spec());
    const CollocationSet c = sample_collocation(42, inst.set.data.times, 40, 3 + trial);
    const FieldDerivatives d = predict_with_derivatives(model, c);
    const double h = 1e-4 * inst.theta.l_t;
    std::vector<QueryPoint> plus, minus;
    for (int task = 0; task < 2; ++task) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        plus.push_back({task, c.vertices[i], c.times[i] + h});
        minus.push_back({task, c.vertices[i], c.times[i] - h});
      }
    }
    const Eigen::VectorXd fd = (model.posterior_mean(plus) - model.posterior_mean(minus)) / (2 * h);
    const Index n = static_cast<Index>(c.size());
    CHECK(oracle::rel_diff(d.du_dt, Eigen::VectorXd(fd.head(n))) <= 1e-4);
    CHECK(oracle::rel_diff(d.dv_dt, Eigen::VectorXd(fd.tail(n))) <= 1e-4);
  }
}

TEST_CASE("spectral Laplacian equals the discrete operator on the full mesh") {
  const TriMesh mesh = make_icosphere(1, 1.0);
  const CotanLaplacian lap = cotangent_laplacian(mesh);
  const Eigen::MatrixXd op = lap.mass.cwiseInverse().asDiagonal() * Eigen::MatrixXd(lap.stiffness);
  std::mt19937_64 rng(43);
  const auto inst = oracle::random_instance(rng, spec(), 6, 5);
  const GpModel model(inst.theta, inst.set, spec());
  const std::vector<int> all = all_vertices();
  const double t = inst.set.data.times[2];
  const FieldTensor mean = model.posterior_mean_grid(all, std::vector<double>{t});

  CollocationSet c;
  c.vertices = all;
  c.times.assign(all.size(), t);
  const FieldDerivatives d = predict_with_derivatives(model, c);
  const Eigen::VectorXd u = mean.task_block(0).row(0).transpose();
  const Eigen::VectorXd v = mean.task_block(1).row(0).transpose();
  CHECK(oracle::rel_diff(d.lap_u, Eigen::VectorXd(op * u)) <= 1e-5);
  CHECK(oracle::rel_diff(d.lap_v, Eigen::VectorXd(op * v)) <= 1e-5);
  CHECK(oracle::rel_diff(d.u, u) <= 1e-12);

  // Kernel columns, too.
  const Eigen::MatrixXd k = spatial_kernel(spec(), 1.0, 0.5, all, all);
  const Eigen::MatrixXd lk = spatial_kernel_laplacian(spec(), 1.0, 0.5, all, all);
  CHECK((lk - op * k).cwiseAbs().maxCoeff() <= 1e-8 * k.cwiseAbs().maxCoeff());
}

TEST_CASE("rest state satisfies the PDE") {
  std::mt19937_64 rng(44);
  auto inst = oracle::random_instance(rng, spec(), 4, 4);
  for (double& x : inst.set.data.values.data()) x = 0.0;
  const CollocationSet c = sample_collocation(42, inst.set.data.times, 20, 5);
  CHECK(physics_loss(inst.theta, inst.set, spec(), c, FhnParams{}) == 0.0);
  FhnParams zero{0, 0, 0, 0, 0, 0, 0, -1};
  CHECK(physics_loss(inst.theta, inst.set, spec(), c, zero) == 0.0);
}

TEST_CASE("single-point loss equals the hand-assembled residuals") {
  std::mt19937_64 rng(45);
  const auto inst = oracle::random_instance(rng, spec(), 5, 4);
  const GpModel model(inst.theta, inst.set, spec());
  FhnParams p;
  p.e2 = 0.3;
  CollocationSet c;
  c.vertices = {17};
  c.times = {inst.set.data.times[1]};
  const double t = c.times[0];

  const std::vector<QueryPoint> q{{0, 17, t}, {1, 17, t}};
  const Eigen::VectorXd m = model.posterior_mean(q);
  const double h = 1e-5;
  const std::vector<QueryPoint> qp{{0, 17, t + h}, {1, 17, t + h}}, qm{{0, 17, t - h}, {1, 17, t - h}};
  const Eigen::VectorXd dt = (model.posterior_mean(qp) - model.posterior_mean(qm)) / (2 * h);
  const TriMesh mesh = make_icosphere(1, 1.0);
  const CotanLaplacian lap = cotangent_laplacian(mesh);
  const FieldTensor full = model.posterior_mean_grid(all_vertices(), std::vector<double>{t});
  const Eigen::VectorXd lu = lap.stiffness * Eigen::VectorXd(full.task_block(0).row(0).transpose());
  const Eigen::VectorXd lv = lap.stiffness * Eigen::VectorXd(full.task_block(1).row(0).transpose());
  const auto [g1, g2] = fhn_reaction(m[0], m[1], p);
  const double ru = dt[0] - p.e1 * lu[17] / lap.mass[17] - g1;
  const double rv = dt[1] - p.e2 * lv[17] / lap.mass[17] - g2;
  CHECK(physics_loss(model, c, p) == doctest::Approx(ru * ru + rv * rv).epsilon(1e-5));
}

TEST_CASE("objective composition") {
  std::mt19937_64 rng(46);
  const auto inst = oracle::random_instance(rng, spec(), 5, 4);
  const GpModel model(inst.theta, inst.set, spec());
  const CollocationSet c = sample_collocation(42, inst.set.data.times, 25, 6);
  const FhnParams p;
  const double data = model.nll(), phys = physics_loss(model, c, p);
  CHECK(phys >= 0.0);
  CHECK(objective_terms(model, c, p, 0.0).total == data);
  CHECK(objective_terms(model, c, p, 1.0).total == data + phys);
  CHECK(objective(inst.theta, inst.set, spec(), c, p, 2.0) >= objective(inst.theta, inst.set, spec(), c, p, 1.0));
  CHECK_THROWS_AS(objective_terms(model, c, p, -1.0), Error);
  CHECK_THROWS_AS(physics_loss(model, CollocationSet{}, p), Error);
  CollocationSet bad;
  bad.vertices = {500};
  bad.times = {0.0};
  CHECK_THROWS_AS(physics_loss(model, bad, p), Error);
}
