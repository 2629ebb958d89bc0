#include "pmgp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <thread>

namespace pmgp {

namespace {

constexpr int kBeta21 = 5;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Hyperparams random_start(std::mt19937_64& rng, const TrainConfig& cfg) {
  Hyperparams h;
  h.sigma_m = log_uniform(rng, 0.1, 10.0);
  h.l_s = log_uniform(rng, 0.1 * cfg.mesh_diameter, 2.0 * cfg.mesh_diameter);
  h.sigma_a = log_uniform(rng, 0.1, 10.0);
  h.l_t = log_uniform(rng, 5.0, 100.0);
  h.beta11 = log_uniform(rng, 0.3, 3.0);
  h.beta21 = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  h.beta22 = log_uniform(rng, 0.3, 3.0);
  h.noise_u = log_uniform(rng, 1e-4, 1e-1);
  h.noise_v = log_uniform(rng, 1e-4, 1e-1);
  return h;
}

struct Box {
  ParamVector lo, hi;
};

Box search_box(const TrainConfig& cfg) {
  Hyperparams lo = cfg.lower, hi = cfg.upper;
  lo.l_s *= cfg.mesh_diameter;
  hi.l_s *= cfg.mesh_diameter;
  return {to_search_space(lo), to_search_space(hi)};
}

ParamVector clamp(const ParamVector& x, const Box& box) { return x.cwiseMax(box.lo).cwiseMin(box.hi); }

// Projected L-BFGS with Armijo backtracking. Every accepted iterate lowers the
// objective, so the recorded trace is nonincreasing.
void run_restart(RestartTrace& trace, const TrainingSet& data, const LaplacianSpectrum& spectrum,
                 const FhnParams& p, const CollocationSet& colloc, const TrainConfig& cfg, const Box& box) {
  KernelCache cache;
  IterationRecord last{};
  auto eval = [&](const ParamVector& x, IterationRecord* record) {
    ++trace.evaluations;
    try {
      GpModel model(from_search_space(x), data, spectrum, &cache);
      const ObjectiveTerms t = objective_terms(model, colloc, p, cfg.w);
      if (record) *record = {t.total, t.data, t.physics};
      return std::isfinite(t.total) ? t.total : kInf;
    } catch (const Error&) {
      return kInf;
    }
  };
  const ObjectiveFn f = [&](const ParamVector& x) { return eval(x, nullptr); };

  ParamVector x = clamp(to_search_space(trace.initial), box);
  double fx = eval(x, &last);
  if (!std::isfinite(fx)) {
    trace.failed = true;
    trace.status = "objective not finite at the starting point";
    trace.final_theta = from_search_space(x);
    return;
  }
  trace.iterations.push_back(last);

  ParamVector g;
  try {
    g = finite_diff_gradient(f, x, cfg.fd_step);
  } catch (const Error& e) {
    trace.failed = true;
    trace.status = e.what();
    trace.final_theta = from_search_space(x);
    return;
  }

  std::deque<std::pair<ParamVector, ParamVector>> memory;  // (s, y) pairs
  trace.status = "max_iters reached";
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // Coordinates pinned at a bound with the gradient pushing outward stay fixed.
    Eigen::Array<bool, Hyperparams::kCount, 1> free_coord;
    for (int i = 0; i < Hyperparams::kCount; ++i) {
      free_coord[i] = !((x[i] <= box.lo[i] && g[i] > 0) || (x[i] >= box.hi[i] && g[i] < 0));
    }
    const ParamVector gf = free_coord.select(g, ParamVector::Zero());
    if (gf.lpNorm<Eigen::Infinity>() < 1e-12) {
      trace.converged = true;
      trace.status = "projected gradient vanished";
      break;
    }

    // Two-loop recursion.
    ParamVector q = gf;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      alpha[k] = s.dot(q) / y.dot(s);
      q -= alpha[k] * y;
    }
    double gamma = 1.0;
    if (!memory.empty()) gamma = memory.back().first.dot(memory.back().second) / memory.back().second.squaredNorm();
    ParamVector d = gamma * q;
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = y.dot(d) / y.dot(s);
      d += (alpha[k] - beta) * s;
    }
    d = -free_coord.select(d, ParamVector::Zero());
    if (!(d.dot(gf) < 0)) {
      memory.clear();
      d = -gf;
    }

    double step = memory.empty() ? std::min(1.0, 1.0 / gf.lpNorm<Eigen::Infinity>()) : 1.0;
    ParamVector x_new;
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = clamp(x + step * d, box);
      const double decrease = g.dot(x_new - x);
      if (decrease < 0) {
        f_new = eval(x_new, &last);
        if (f_new <= fx + 1e-4 * decrease) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      trace.converged = true;
      trace.status = "line search made no progress";
      break;
    }

    ParamVector g_new;
    try {
      g_new = finite_diff_gradient(f, x_new, cfg.fd_step);
    } catch (const Error& e) {
      // Keep the accepted point; the gradient there is unusable.
      x = x_new;
      fx = f_new;
      trace.iterations.push_back(last);
      trace.status = e.what();
      break;
    }
    const ParamVector s = x_new - x, y = g_new - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      memory.emplace_back(s, y);
      if (static_cast<int>(memory.size()) > cfg.lbfgs_memory) memory.pop_front();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
    trace.iterations.push_back(last);

    const auto n = trace.iterations.size();
    if (n > static_cast<std::size_t>(cfg.stall_window)) {
      const double old = trace.iterations[n - 1 - static_cast<std::size_t>(cfg.stall_window)].objective;
      if (std::abs(old - fx) <= cfg.rel_tol * std::max(std::abs(fx), 1e-12)) {
        trace.converged = true;
        trace.status = "relative objective change below tolerance";
        break;
      }
    }
  }
  trace.final_theta = from_search_space(x);
  try {
    trace.tau2_cv = GpModel(trace.final_theta, data, spectrum).loo().tau2_cv;
  } catch (const Error& e) {
    trace.failed = true;
    trace.status = std::string("cross-validation failed: ") + e.what();
  }
}

}  // namespace

ParamVector to_search_space(const Hyperparams& theta) {
  ParamVector x;
  x << std::log(theta.sigma_m), std::log(theta.l_s), std::log(theta.sigma_a), std::log(theta.l_t),
      std::log(theta.beta11), theta.beta21, std::log(theta.beta22), std::log(theta.noise_u), std::log(theta.noise_v);
  return x;
}

Hyperparams from_search_space(const ParamVector& x) {
  Hyperparams h;
  h.sigma_m = std::exp(x[0]);
  h.l_s = std::exp(x[1]);
  h.sigma_a = std::exp(x[2]);
  h.l_t = std::exp(x[3]);
  h.beta11 = std::exp(x[4]);
  h.beta21 = x[kBeta21];
  h.beta22 = std::exp(x[6]);
  h.noise_u = std::exp(x[7]);
  h.noise_v = std::exp(x[8]);
  return h;
}

void TrainConfig::validate() const {
  if (restarts < 1) fail(ErrorKind::Config, "train: restarts must be >= 1");
  if (max_iters < 0) fail(ErrorKind::Config, "train: max_iters must be >= 0");
  if (!(fd_step > 0) || !(rel_tol > 0)) fail(ErrorKind::Config, "train: tolerances must be positive");
  if (stall_window < 1 || lbfgs_memory < 1) fail(ErrorKind::Config, "train: stall_window and lbfgs_memory must be >= 1");
  if (!(w >= 0)) fail(ErrorKind::Config, "train: physics weight must be >= 0");
  if (w > 0 && n_col == 0) fail(ErrorKind::Config, "train: n_col must be >= 1 when w > 0");
  if (!(mesh_diameter > 0)) fail(ErrorKind::Config, "train: mesh_diameter must be positive");
  if (threads < 1) fail(ErrorKind::Config, "train: threads must be >= 1");
  const ParamVector lo = to_search_space(lower), hi = to_search_space(upper);
  if (!lo.allFinite() || !hi.allFinite() || !(lo.array() < hi.array()).all()) {
    fail(ErrorKind::Config, "train: parameter bounds must be finite, positive where required, and ordered");
  }
}

ParamVector finite_diff_gradient(const ObjectiveFn& f, const ParamVector& x, double h) {
  if (!(h > 0)) fail(ErrorKind::InvalidArgument, "finite_diff_gradient: step must be positive");
  ParamVector g;
  for (int i = 0; i < Hyperparams::kCount; ++i) {
    ParamVector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(xp), fm = f(xm);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      fail(ErrorKind::Training, "finite_diff_gradient: objective not finite when probing coordinate " + std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

int argmin_finite(std::span<const double> values) {
  int best = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (best < 0 || values[i] < values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

TrainReport optimize(const TrainingSet& data, const LaplacianSpectrum& spectrum, const FhnParams& p,
                     const TrainConfig& cfg) {
  cfg.validate();
  p.validate();
  validate_training_set(data, spectrum);
  const auto start = std::chrono::steady_clock::now();

  CollocationSet colloc;
  if (cfg.w > 0) colloc = sample_collocation(spectrum.n_vertices(), data.data.times, cfg.n_col, splitmix64(cfg.seed));
  const Box box = search_box(cfg);

  TrainReport report;
  report.w = cfg.w;
  report.n_col = cfg.w > 0 ? cfg.n_col : 0;
  report.restarts.resize(static_cast<std::size_t>(cfg.restarts));
  for (int r = 0; r < cfg.restarts; ++r) {
    auto& trace = report.restarts[static_cast<std::size_t>(r)];
    trace.index = r;
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(r) + 1)));
    trace.initial = (r == 0 && cfg.initial) ? *cfg.initial : random_start(rng, cfg);
  }

  auto worker = [&](int first, int stride) {
    for (int r = first; r < cfg.restarts; r += stride) {
      run_restart(report.restarts[static_cast<std::size_t>(r)], data, spectrum, p, colloc, cfg, box);
    }
  };
  const int n_threads = std::min(cfg.threads, cfg.restarts);
  if (n_threads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t, n_threads);
    for (auto& th : pool) th.join();
  }

  std::vector<double> scores;
  for (const auto& t : report.restarts) scores.push_back(t.failed ? kInf : t.tau2_cv);
  report.best_restart = argmin_finite(scores);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report.best_restart < 0) throw TrainingFailure("train: all restarts failed", report);
  report.best_theta = report.restarts[static_cast<std::size_t>(report.best_restart)].final_theta;
  return report;
}

TrainReport optimize_weight_sweep(const TrainingSet& data, const LaplacianSpectrum& spectrum, const FhnParams& p,
                                  const TrainConfig& cfg, std::span<const double> weights) {
  if (weights.empty()) fail(ErrorKind::Config, "train: empty weight sweep");
  std::vector<TrainReport> reports;
  std::vector<double> scores;
  for (double w : weights) {
    TrainConfig c = cfg;
    c.w = w;
    try {
      reports.push_back(optimize(data, spectrum, p, c));
      scores.push_back(reports.back().best_tau2_cv());
    } catch (const TrainingFailure& e) {
      reports.push_back(e.report());
      scores.push_back(kInf);
    }
  }
  const int best = argmin_finite(scores);
  if (best < 0) throw TrainingFailure("train: all restarts failed for every weight", reports.front());
  TrainReport out = reports[static_cast<std::size_t>(best)];
  double wall = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    wall += reports[i].wall_seconds;
    out.sweep.push_back({weights[i], scores[i], reports[i].best_restart >= 0 ? reports[i].best_theta : Hyperparams{}});
  }
  out.wall_seconds = wall;
  return out;
}

}  // namespace pmgp
