#include "pmgp/config.hpp"

#include <cmath>
#include <initializer_list>
#include <set>

namespace pmgp {

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) fail(ErrorKind::Config, section_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::Config, section_ + "." + key + ": wrong type");
    }
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  // Keys owned by the caller (file paths and the like).
  void ignore(std::initializer_list<const char*> keys) {
    for (const char* k : keys) seen_.insert(k);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(ErrorKind::Config, section_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const Json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

Stimulus stimulus_from_json(const Json& j, const std::string& where) {
  Stimulus s;
  Reader r(j, where);
  r.get("vertices", s.vertices);
  r.get("amplitude", s.amplitude);
  r.get("onset", s.onset);
  r.get("duration", s.duration);
  r.get("period", s.period);
  r.finish();
  return s;
}

// Partial override of a bound set; no positivity checks here, TrainConfig
// validates the box as a whole.
Hyperparams bounds_from_json(const Json& j, Hyperparams h, const std::string& where) {
  Reader r(j, where);
  r.get("sigma_m", h.sigma_m);
  r.get("l_s", h.l_s);
  r.get("sigma_a", h.sigma_a);
  r.get("l_t", h.l_t);
  r.get("beta11", h.beta11);
  r.get("beta21", h.beta21);
  r.get("beta22", h.beta22);
  r.get("sigma2_u_eps", h.noise_u);
  r.get("sigma2_v_eps", h.noise_v);
  r.finish();
  return h;
}

Json hyper_or_null(const TrainConfig& cfg) { return cfg.initial ? to_json(*cfg.initial) : Json(nullptr); }

}  // namespace

Hyperparams hyperparams_from_json(const Json& j) {
  Hyperparams h;
  Reader r(j, "hyperparams");
  r.get("sigma_m", h.sigma_m);
  r.get("l_s", h.l_s);
  r.get("sigma_a", h.sigma_a);
  r.get("l_t", h.l_t);
  r.get("beta11", h.beta11);
  r.get("beta21", h.beta21);
  r.get("beta22", h.beta22);
  r.get("sigma2_u_eps", h.noise_u);
  r.get("sigma2_v_eps", h.noise_v);
  r.finish();
  try {
    h.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return h;
}

Json to_json(const Hyperparams& h) {
  return {{"sigma_m", h.sigma_m}, {"l_s", h.l_s},       {"sigma_a", h.sigma_a},
          {"l_t", h.l_t},         {"beta11", h.beta11}, {"beta21", h.beta21},
          {"beta22", h.beta22},   {"sigma2_u_eps", h.noise_u}, {"sigma2_v_eps", h.noise_v}};
}

FhnParams fhn_from_json(const Json& j) {
  FhnParams p;
  Reader r(j, "fhn");
  r.get("c1", p.c1);
  r.get("c2", p.c2);
  r.get("alpha", p.alpha);
  r.get("b", p.b);
  r.get("d", p.d);
  r.get("e1", p.e1);
  r.get("e2", p.e2);
  r.get("coupling_sign", p.coupling_sign);
  r.finish();
  if (p.coupling_sign != 1.0 && p.coupling_sign != -1.0) fail(ErrorKind::Config, "fhn.coupling_sign: must be +1 or -1");
  try {
    p.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return p;
}

Json to_json(const FhnParams& p) {
  return {{"c1", p.c1}, {"c2", p.c2}, {"alpha", p.alpha}, {"b", p.b},
          {"d", p.d},   {"e1", p.e1}, {"e2", p.e2},       {"coupling_sign", p.coupling_sign}};
}

SimConfig sim_config_from_json(const Json& j, const TriMesh& mesh) {
  Reader r(j, "simulate");
  std::string protocol = "I";
  double dt = 0.1, amplitude = 1.0, duration = 5.0, period = 400.0, second_onset = 180.0;
  int n_steps = 1000, stride = 10;
  std::uint64_t seed = 0;
  r.get("protocol", protocol);
  r.get("dt", dt);
  r.get("n_steps", n_steps);
  r.get("record_stride", stride);
  r.get("amplitude", amplitude);
  r.get("duration", duration);
  r.get("period", period);
  r.get("second_onset", second_onset);
  r.get("seed", seed);
  const Json* fhn = r.sub("fhn");
  const Json* stimuli = r.sub("stimuli");
  r.ignore({"output", "csv", "mesh"});
  r.finish();

  SimConfig cfg;
  if (protocol == "I" || protocol == "II") {
    if (stimuli) fail(ErrorKind::Config, "simulate.stimuli: only allowed with protocol \"custom\"");
    cfg = protocol == "I" ? protocol_one(mesh, dt, n_steps, stride) : protocol_two(mesh, dt, n_steps, stride, second_onset);
    for (auto& s : cfg.stimuli) {
      s.amplitude = amplitude;
      s.duration = duration;
      s.period = period;
    }
  } else if (protocol == "custom") {
    if (!stimuli || !stimuli->is_array()) fail(ErrorKind::Config, "simulate.stimuli: required list for protocol \"custom\"");
    cfg.dt = dt;
    cfg.n_steps = n_steps;
    cfg.record_stride = stride;
    for (std::size_t i = 0; i < stimuli->size(); ++i) {
      cfg.stimuli.push_back(stimulus_from_json((*stimuli)[i], "simulate.stimuli[" + std::to_string(i) + "]"));
    }
  } else {
    fail(ErrorKind::Config, "simulate.protocol: expected \"I\", \"II\" or \"custom\", got \"" + protocol + "\"");
  }
  if (fhn) cfg.fhn = fhn_from_json(*fhn);
  cfg.seed = seed;
  try {
    cfg.validate(mesh.n_vertices());
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return cfg;
}

Json to_json(const SimConfig& cfg) {
  Json stimuli = Json::array();
  for (const auto& s : cfg.stimuli) {
    stimuli.push_back({{"vertices", s.vertices},
                       {"amplitude", s.amplitude},
                       {"onset", s.onset},
                       {"duration", s.duration},
                       {"period", s.period}});
  }
  return {{"fhn", to_json(cfg.fhn)},         {"dt", cfg.dt},     {"n_steps", cfg.n_steps},
          {"record_stride", cfg.record_stride}, {"stimuli", stimuli}, {"seed", cfg.seed}};
}

TrainSpec train_spec_from_json(const Json& j, double mesh_diameter) {
  TrainSpec spec;
  TrainConfig& c = spec.cfg;
  c.mesh_diameter = mesh_diameter;
  Reader r(j, "train");
  r.get("restarts", c.restarts);
  r.get("max_iters", c.max_iters);
  r.get("fd_step", c.fd_step);
  r.get("rel_tol", c.rel_tol);
  r.get("stall_window", c.stall_window);
  r.get("lbfgs_memory", c.lbfgs_memory);
  r.get("w", c.w);
  r.get("weights", spec.weights);
  r.get("n_col", c.n_col);
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  if (const Json* init = r.sub("initial")) c.initial = hyperparams_from_json(*init);
  if (const Json* fhn = r.sub("fhn")) spec.fhn = fhn_from_json(*fhn);
  if (const Json* lo = r.sub("lower")) c.lower = bounds_from_json(*lo, c.lower, "train.lower");
  if (const Json* hi = r.sub("upper")) c.upper = bounds_from_json(*hi, c.upper, "train.upper");
  r.ignore({"data", "output", "report", "modes", "mesh"});
  r.finish();
  for (double w : spec.weights) {
    if (!(w >= 0) || !std::isfinite(w)) fail(ErrorKind::Config, "train.weights: entries must be finite and >= 0");
  }
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return spec;
}

Json to_json(const TrainConfig& c) {
  Json lower = to_json(c.lower), upper = to_json(c.upper);
  return {{"restarts", c.restarts},
          {"max_iters", c.max_iters},
          {"fd_step", c.fd_step},
          {"rel_tol", c.rel_tol},
          {"stall_window", c.stall_window},
          {"lbfgs_memory", c.lbfgs_memory},
          {"w", c.w},
          {"n_col", c.n_col},
          {"seed", c.seed},
          {"threads", c.threads},
          {"mesh_diameter", c.mesh_diameter},
          {"initial", hyper_or_null(c)},
          {"lower", lower},
          {"upper", upper}};
}

Json to_json(const TrainReport& report) {
  Json restarts = Json::array();
  for (const auto& t : report.restarts) {
    Json obj = Json::array(), nll = Json::array(), phy = Json::array();
    for (const auto& it : t.iterations) {
      obj.push_back(it.objective);
      nll.push_back(it.nll);
      phy.push_back(it.physics);
    }
    restarts.push_back({{"index", t.index},
                        {"initial", to_json(t.initial)},
                        {"final", to_json(t.final_theta)},
                        {"tau2_cv", t.failed ? Json(nullptr) : Json(t.tau2_cv)},
                        {"evaluations", t.evaluations},
                        {"converged", t.converged},
                        {"failed", t.failed},
                        {"status", t.status},
                        {"trace", {{"objective", obj}, {"nll", nll}, {"physics", phy}}}});
  }
  Json sweep = Json::array();
  for (const auto& s : report.sweep) {
    sweep.push_back({{"w", s.w}, {"tau2_cv", std::isfinite(s.tau2_cv) ? Json(s.tau2_cv) : Json(nullptr)},
                     {"theta", to_json(s.theta)}});
  }
  Json out = {{"model_kind", report.model_kind()},
              {"w", report.w},
              {"n_col", report.n_col},
              {"best_restart", report.best_restart},
              {"restarts", restarts},
              {"sweep", sweep},
              {"wall_seconds", report.wall_seconds}};
  if (report.best_restart >= 0) {
    out["best_theta"] = to_json(report.best_theta);
    out["tau2_cv"] = report.best_tau2_cv();
  }
  return out;
}

std::string config_hash(const Json& j) {
  const std::string s = j.dump();
  return hex_digest(fnv1a(s.data(), s.size()));
}

}  // namespace pmgp
