#pragma once

#include "pmgp/error.hpp"
#include "pmgp/physics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pmgp {

using ParamVector = Eigen::Matrix<double, Hyperparams::kCount, 1>;

// Optimizer coordinates: logs of every positive parameter, beta21 as is.
ParamVector to_search_space(const Hyperparams& theta);
Hyperparams from_search_space(const ParamVector& x);

struct TrainConfig {
  int restarts = 3;
  int max_iters = 100;
  double fd_step = 1e-4;        // central-difference step in search coordinates
  double rel_tol = 1e-6;        // relative objective change ...
  int stall_window = 5;         // ... over this many iterations counts as converged
  int lbfgs_memory = 7;
  double w = 0.0;               // physics weight
  std::size_t n_col = 200;
  std::uint64_t seed = 0;
  int threads = 1;
  // Bounding-box diagonal of the mesh; sets the spatial length-scale range.
  double mesh_diameter = 1.0;
  // Restart 0 starts here when set; the rest are drawn at random.
  std::optional<Hyperparams> initial;
  // Box constraints in natural units. l_s bounds are multiples of mesh_diameter.
  Hyperparams lower{1e-8, 1e-3, 1e-8, 1e-2, 1e-4, -1e4, 1e-4, 1e-8, 1e-8};
  Hyperparams upper{1e8, 10.0, 1e8, 1e4, 1e4, 1e4, 1e4, 10.0, 10.0};

  void validate() const;
};

struct IterationRecord {
  double objective = 0.0;
  double nll = 0.0;
  double physics = 0.0;
};

struct RestartTrace {
  int index = 0;
  Hyperparams initial;
  Hyperparams final_theta;
  std::vector<IterationRecord> iterations;
  double tau2_cv = 0.0;
  int evaluations = 0;
  bool converged = false;
  bool failed = false;
  std::string status;
};

struct WeightTrial {
  double w = 0.0;
  double tau2_cv = 0.0;
  Hyperparams theta;
};

struct TrainReport {
  Hyperparams best_theta;
  int best_restart = -1;
  std::vector<RestartTrace> restarts;
  std::vector<WeightTrial> sweep;  // filled by optimize_weight_sweep
  double w = 0.0;
  std::size_t n_col = 0;
  double wall_seconds = 0.0;

  std::string model_kind() const { return w > 0.0 ? "P-M-GP" : "M-GP"; }
  double best_tau2_cv() const { return restarts.at(static_cast<std::size_t>(best_restart)).tau2_cv; }
};

class TrainingFailure : public Error {
 public:
  TrainingFailure(const std::string& what, TrainReport report)
      : Error(ErrorKind::Training, what), report_(std::move(report)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

using ObjectiveFn = std::function<double(const ParamVector&)>;

// Central differences per coordinate. Throws if a probe is not finite, naming
// the coordinate.
ParamVector finite_diff_gradient(const ObjectiveFn& f, const ParamVector& x, double h);

// Minimizes nll + w * physics_loss from cfg.restarts starting points with
// projected L-BFGS, then keeps the restart with the smallest leave-one-location-out
// error. Deterministic for a given seed.
TrainReport optimize(const TrainingSet& data, const LaplacianSpectrum& spectrum, const FhnParams& p,
                     const TrainConfig& cfg);

// Runs optimize for every weight and keeps the one with the smallest tau2_cv.
TrainReport optimize_weight_sweep(const TrainingSet& data, const LaplacianSpectrum& spectrum, const FhnParams& p,
                                  const TrainConfig& cfg, std::span<const double> weights);

// Index of the smallest finite value; -1 if none.
int argmin_finite(std::span<const double> values);

}  // namespace pmgp
