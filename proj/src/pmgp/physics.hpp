#pragma once

#include "pmgp/gp.hpp"

#include <cstdint>
#include <span>
#include <utility>

namespace pmgp {

// FitzHugh-Nagumo reaction constants and diffusion coefficients.
struct FhnParams {
  double c1 = 0.26;
  double c2 = 0.1;
  double alpha = 0.13;
  double b = 0.013;
  double d = 1.0;
  double e1 = 10.0;
  double e2 = 0.0;
  // Sign of the C2 u v coupling in g1; -1 is the standard FHN form.
  double coupling_sign = -1.0;

  void validate() const;
};

// (g1, g2) = (C1 u (u - alpha)(1 - u) + sign * C2 u v, b (u - d v)).
std::pair<double, double> fhn_reaction(double u, double v, const FhnParams& p);

struct CollocationSet {
  std::vector<int> vertices;
  std::vector<double> times;

  std::size_t size() const { return vertices.size(); }
};

// Draws n distinct (vertex, time) pairs uniformly from the grid of all mesh
// vertices by the given time stamps.
CollocationSet sample_collocation(Index n_vertices, std::span<const double> times, std::size_t n, std::uint64_t seed);

struct FieldDerivatives {
  Eigen::VectorXd u, v;
  Eigen::VectorXd du_dt, dv_dt;
  Eigen::VectorXd lap_u, lap_v;
};

// Posterior mean, its time derivative and its surface Laplacian at each
// collocation point, all from the cached core tensor of the model.
FieldDerivatives predict_with_derivatives(const GpModel& model, const CollocationSet& colloc);
FieldDerivatives predict_with_derivatives(const Hyperparams& theta, const TrainingSet& data,
                                          const LaplacianSpectrum& spectrum, const CollocationSet& colloc);

// Mean over collocation points of the squared u and v reaction-diffusion residuals.
double physics_loss(const GpModel& model, const CollocationSet& colloc, const FhnParams& p);
double physics_loss(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                    const CollocationSet& colloc, const FhnParams& p);

struct ObjectiveTerms {
  double data = 0.0;
  double physics = 0.0;
  double total = 0.0;
};

// nll + w * physics_loss. The physics term is skipped entirely when w == 0.
ObjectiveTerms objective_terms(const GpModel& model, const CollocationSet& colloc, const FhnParams& p, double w);
double objective(const Hyperparams& theta, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                 const CollocationSet& colloc, const FhnParams& p, double w);

}  // namespace pmgp
