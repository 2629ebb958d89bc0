#include "pmgp/pmgp.h"

#include "pmgp/config.hpp"
#include "pmgp/gp.hpp"
#include "pmgp/mesh.hpp"
#include "pmgp/physics.hpp"
#include "pmgp/sim.hpp"
#include "pmgp/train.hpp"

#include <cstring>
#include <memory>
#include <string>

struct pmgp_mesh {
  pmgp::TriMesh mesh;
};

struct pmgp_spectrum {
  std::shared_ptr<const pmgp::LaplacianSpectrum> spectrum;
  double diameter = 1.0;
};

struct pmgp_field {
  pmgp::FieldTensor field;
  std::int64_t vertex_count = 0;
};

// The model keeps pointers into data and spectrum, so the handle must stay put.
struct pmgp_model {
  pmgp::TrainingSet data;
  std::shared_ptr<const pmgp::LaplacianSpectrum> spectrum;
  std::unique_ptr<pmgp::GpModel> model;
};

namespace {

thread_local std::string g_last_error;

pmgp_status status_of(pmgp::ErrorKind kind) {
  using pmgp::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidArgument: return PMGP_ERR_INVALID_ARGUMENT;
    case ErrorKind::Parse: return PMGP_ERR_PARSE;
    case ErrorKind::Config: return PMGP_ERR_CONFIG;
    case ErrorKind::IllConditioned: return PMGP_ERR_ILL_CONDITIONED;
    case ErrorKind::Simulation: return PMGP_ERR_SIMULATION;
    case ErrorKind::Training: return PMGP_ERR_TRAINING;
    case ErrorKind::Evaluation: return PMGP_ERR_EVALUATION;
    case ErrorKind::Io: return PMGP_ERR_IO;
  }
  return PMGP_ERR_INTERNAL;
}

template <class F>
pmgp_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return PMGP_OK;
  } catch (const pmgp::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("config: ") + e.what();
    return PMGP_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PMGP_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (!p) pmgp::fail(pmgp::ErrorKind::InvalidArgument, std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pmgp::Json parse_config(const char* text) {
  if (!text || !*text) return pmgp::Json::object();
  try {
    return pmgp::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    pmgp::fail(pmgp::ErrorKind::Config, std::string("config: not valid JSON: ") + e.what());
  }
}

pmgp::Hyperparams to_cpp(const pmgp_hyperparams& h) {
  pmgp::Hyperparams t;
  t.sigma_m = h.sigma_m;
  t.l_s = h.l_s;
  t.sigma_a = h.sigma_a;
  t.l_t = h.l_t;
  t.beta11 = h.beta11;
  t.beta21 = h.beta21;
  t.beta22 = h.beta22;
  t.noise_u = h.sigma2_u_eps;
  t.noise_v = h.sigma2_v_eps;
  return t;
}

pmgp_hyperparams to_c(const pmgp::Hyperparams& t) {
  return {t.sigma_m, t.l_s, t.sigma_a, t.l_t, t.beta11, t.beta21, t.beta22, t.noise_u, t.noise_v};
}

pmgp_field* wrap(pmgp::FieldTensor f, std::int64_t vertex_count) {
  return new pmgp_field{std::move(f), vertex_count};
}

pmgp::TrainingSet training_set(const pmgp_field* f) {
  pmgp::TrainingSet set;
  set.data = f->field;
  return set;
}

}  // namespace

extern "C" {

const char* pmgp_last_error(void) { return g_last_error.c_str(); }

const char* pmgp_status_name(pmgp_status status) {
  switch (status) {
    case PMGP_OK: return "ok";
    case PMGP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PMGP_ERR_PARSE: return "parse error";
    case PMGP_ERR_CONFIG: return "config error";
    case PMGP_ERR_ILL_CONDITIONED: return "ill-conditioned";
    case PMGP_ERR_SIMULATION: return "simulation error";
    case PMGP_ERR_TRAINING: return "training failure";
    case PMGP_ERR_EVALUATION: return "evaluation error";
    case PMGP_ERR_IO: return "i/o error";
    case PMGP_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* pmgp_version(void) { return "0.1.0"; }

void pmgp_string_free(char* s) { delete[] s; }

pmgp_status pmgp_hash_string(const char* text, char** hex_out) {
  return guarded([&] {
    need(text, "text");
    need(hex_out, "hex_out");
    *hex_out = dup_string(pmgp::hex_digest(pmgp::fnv1a(text, std::strlen(text))));
  });
}

pmgp_status pmgp_file_digest(const char* path, char** hex_out) {
  return guarded([&] {
    need(path, "path");
    need(hex_out, "hex_out");
    *hex_out = dup_string(pmgp::file_digest(path));
  });
}

pmgp_status pmgp_mesh_load(const char* path, pmgp_mesh** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pmgp_mesh{pmgp::load_mesh(path)};
  });
}

pmgp_status pmgp_mesh_icosphere(int subdivisions, double radius, pmgp_mesh** out) {
  return guarded([&] {
    need(out, "out");
    *out = new pmgp_mesh{pmgp::make_icosphere(subdivisions, radius)};
  });
}

pmgp_status pmgp_mesh_save_off(const pmgp_mesh* mesh, const char* path) {
  return guarded([&] {
    need(mesh, "mesh");
    need(path, "path");
    pmgp::save_off(path, mesh->mesh);
  });
}

pmgp_status pmgp_mesh_info(const pmgp_mesh* mesh, int64_t* n_vertices, int64_t* n_faces, double* diameter) {
  return guarded([&] {
    need(mesh, "mesh");
    if (n_vertices) *n_vertices = mesh->mesh.n_vertices();
    if (n_faces) *n_faces = mesh->mesh.n_faces();
    if (diameter) *diameter = pmgp::bounding_diagonal(mesh->mesh);
  });
}

void pmgp_mesh_free(pmgp_mesh* mesh) { delete mesh; }

pmgp_status pmgp_spectrum_compute(const pmgp_mesh* mesh, int64_t k, pmgp_spectrum** out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(out, "out");
    const auto lap = pmgp::cotangent_laplacian(mesh->mesh);
    const auto modes = k > 0 ? k : pmgp::default_mode_count(mesh->mesh.n_vertices());
    auto spec = std::make_shared<const pmgp::LaplacianSpectrum>(pmgp::eigen_spectrum(lap.stiffness, lap.mass, modes));
    *out = new pmgp_spectrum{std::move(spec), pmgp::bounding_diagonal(mesh->mesh)};
  });
}

pmgp_status pmgp_spectrum_modes(const pmgp_spectrum* spectrum, int64_t* k) {
  return guarded([&] {
    need(spectrum, "spectrum");
    need(k, "k");
    *k = spectrum->spectrum->n_modes();
  });
}

pmgp_status pmgp_spectrum_eigenvalues(const pmgp_spectrum* spectrum, double* out, int64_t capacity) {
  return guarded([&] {
    need(spectrum, "spectrum");
    need(out, "out");
    const auto& ev = spectrum->spectrum->eigenvalues;
    for (int64_t i = 0; i < std::min<int64_t>(capacity, ev.size()); ++i) out[i] = ev[i];
  });
}

void pmgp_spectrum_free(pmgp_spectrum* spectrum) { delete spectrum; }

pmgp_status pmgp_field_read(const char* path, pmgp_field** out, char** header_json) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    pmgp::FieldHeader header;
    auto f = pmgp::read_field(path, &header);
    if (header_json) {
      *header_json = dup_string(
          pmgp::Json{{"vertex_count", header.vertex_count}, {"seed", header.seed}, {"config_hash", header.config_hash}}
              .dump());
    }
    *out = wrap(std::move(f), header.vertex_count);
  });
}

pmgp_status pmgp_field_write(const pmgp_field* field, const char* path, const char* header_json) {
  return guarded([&] {
    need(field, "field");
    need(path, "path");
    pmgp::FieldHeader header;
    header.vertex_count = field->vertex_count;
    const auto h = parse_config(header_json);
    if (h.contains("vertex_count")) header.vertex_count = h.at("vertex_count").get<std::int64_t>();
    if (h.contains("seed")) header.seed = h.at("seed").get<std::uint64_t>();
    if (h.contains("config_hash")) header.config_hash = h.at("config_hash").get<std::string>();
    pmgp::write_field(path, field->field, header);
  });
}

pmgp_status pmgp_field_write_csv(const pmgp_field* field, const char* path) {
  return guarded([&] {
    need(field, "field");
    need(path, "path");
    pmgp::write_field_csv(path, field->field);
  });
}

pmgp_status pmgp_field_dims(const pmgp_field* field, int64_t dims[3]) {
  return guarded([&] {
    need(field, "field");
    need(dims, "dims");
    dims[0] = field->field.n_tasks();
    dims[1] = field->field.n_space();
    dims[2] = field->field.n_time();
  });
}

pmgp_status pmgp_field_index_json(const pmgp_field* field, char** json_out) {
  return guarded([&] {
    need(field, "field");
    need(json_out, "json_out");
    const auto& f = field->field;
    *json_out = dup_string(pmgp::Json{{"tasks", f.tasks}, {"space_ids", f.space_ids}, {"times", f.times}}.dump());
  });
}

pmgp_status pmgp_field_values(const pmgp_field* field, double* out, int64_t capacity) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    const auto& v = field->field.values.data();
    const auto n = std::min<int64_t>(capacity, static_cast<int64_t>(v.size()));
    std::copy(v.begin(), v.begin() + n, out);
  });
}

void pmgp_field_free(pmgp_field* field) { delete field; }

pmgp_status pmgp_simulate(const pmgp_mesh* mesh, const char* config_json, pmgp_field** out, char** resolved_json) {
  return guarded([&] {
    need(mesh, "mesh");
    need(out, "out");
    const auto cfg = pmgp::sim_config_from_json(parse_config(config_json), mesh->mesh);
    const auto lap = pmgp::cotangent_laplacian(mesh->mesh);
    auto f = pmgp::fhn_simulate(mesh->mesh, lap, cfg);
    if (resolved_json) *resolved_json = dup_string(pmgp::to_json(cfg).dump());
    *out = wrap(std::move(f), mesh->mesh.n_vertices());
  });
}

pmgp_status pmgp_add_noise(const pmgp_field* field, double sigma, uint64_t seed, pmgp_field** out) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    *out = wrap(pmgp::add_noise(field->field, sigma, seed), field->vertex_count);
  });
}

pmgp_status pmgp_subsample(const pmgp_field* field, int64_t picks, int time_stride, uint64_t seed, pmgp_field** out) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    if (picks < 0) pmgp::fail(pmgp::ErrorKind::InvalidArgument, "subsample: picks must be >= 0");
    auto set = pmgp::subsample(field->field, static_cast<std::size_t>(picks), time_stride, seed);
    *out = wrap(std::move(set.data), field->vertex_count);
  });
}

pmgp_status pmgp_subsample_vertices(const pmgp_field* field, const int* vertices, int64_t n, int time_stride,
                                    pmgp_field** out) {
  return guarded([&] {
    need(field, "field");
    need(vertices, "vertices");
    need(out, "out");
    auto set = pmgp::subsample(field->field, std::span<const int>(vertices, static_cast<std::size_t>(n)), time_stride);
    *out = wrap(std::move(set.data), field->vertex_count);
  });
}

pmgp_status pmgp_relative_error(const pmgp_field* prediction, const pmgp_field* truth, double re[3]) {
  return guarded([&] {
    need(prediction, "prediction");
    need(truth, "truth");
    need(re, "re");
    if (prediction->field.space_ids != truth->field.space_ids || prediction->field.times != truth->field.times) {
      pmgp::fail(pmgp::ErrorKind::Evaluation, "relative_error: prediction and truth index sets differ");
    }
    const auto r = pmgp::relative_error(prediction->field, truth->field);
    re[0] = r.u;
    re[1] = r.v;
    re[2] = r.total;
  });
}

pmgp_status pmgp_train(const pmgp_field* data, const pmgp_spectrum* spectrum, const char* config_json,
                       pmgp_hyperparams* best, char** report_json) {
  return guarded([&] {
    need(data, "data");
    need(spectrum, "spectrum");
    const auto spec = pmgp::train_spec_from_json(parse_config(config_json), spectrum->diameter);
    const auto set = training_set(data);
    const pmgp::Json resolved = {{"train", pmgp::to_json(spec.cfg)}, {"fhn", pmgp::to_json(spec.fhn)},
                                 {"weights", spec.weights}};
    auto dump = [&](const pmgp::TrainReport& r) {
      auto j = pmgp::to_json(r);
      j["config"] = resolved;
      return dup_string(j.dump());
    };
    pmgp::TrainReport report;
    try {
      report = spec.weights.empty() ? pmgp::optimize(set, *spectrum->spectrum, spec.fhn, spec.cfg)
                                    : pmgp::optimize_weight_sweep(set, *spectrum->spectrum, spec.fhn, spec.cfg,
                                                                  spec.weights);
    } catch (const pmgp::TrainingFailure& e) {
      if (report_json) *report_json = dump(e.report());
      throw;
    }
    if (best) *best = to_c(report.best_theta);
    if (report_json) *report_json = dump(report);
  });
}

pmgp_status pmgp_model_create(const pmgp_hyperparams* theta, const pmgp_field* data, const pmgp_spectrum* spectrum,
                              pmgp_model** out) {
  return guarded([&] {
    need(theta, "theta");
    need(data, "data");
    need(spectrum, "spectrum");
    need(out, "out");
    auto m = std::make_unique<pmgp_model>();
    m->data = training_set(data);
    m->spectrum = spectrum->spectrum;
    m->model = std::make_unique<pmgp::GpModel>(to_cpp(*theta), m->data, *m->spectrum);
    *out = m.release();
  });
}

pmgp_status pmgp_model_nll(const pmgp_model* model, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = model->model->nll();
  });
}

pmgp_status pmgp_model_predict(const pmgp_model* model, const int* vertices, int64_t n_vertices, const double* times,
                               int64_t n_times, pmgp_field** mean, pmgp_field** variance) {
  return guarded([&] {
    need(model, "model");
    need(vertices, "vertices");
    need(times, "times");
    need(mean, "mean");
    const std::span<const int> vs(vertices, static_cast<std::size_t>(n_vertices));
    const std::span<const double> ts(times, static_cast<std::size_t>(n_times));
    const auto n = model->spectrum->n_vertices();
    auto m = wrap(model->model->posterior_mean_grid(vs, ts), n);
    if (variance) {
      try {
        *variance = wrap(model->model->posterior_variance_grid(vs, ts), n);
      } catch (...) {
        delete m;
        throw;
      }
    }
    *mean = m;
  });
}

pmgp_status pmgp_model_loo(const pmgp_model* model, double* tau2_cv, pmgp_field** residuals) {
  return guarded([&] {
    need(model, "model");
    auto r = model->model->loo();
    if (tau2_cv) *tau2_cv = r.tau2_cv;
    if (residuals) *residuals = wrap(std::move(r.residuals), model->spectrum->n_vertices());
  });
}

pmgp_status pmgp_model_physics_loss(const pmgp_model* model, const char* fhn_json, int64_t n_col, uint64_t seed,
                                    double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    if (n_col < 1) pmgp::fail(pmgp::ErrorKind::InvalidArgument, "physics loss: n_col must be >= 1");
    const auto p = pmgp::fhn_from_json(parse_config(fhn_json));
    const auto colloc = pmgp::sample_collocation(model->spectrum->n_vertices(), model->data.data.times,
                                                 static_cast<std::size_t>(n_col), seed);
    *out = pmgp::physics_loss(*model->model, colloc, p);
  });
}

void pmgp_model_free(pmgp_model* model) { delete model; }

pmgp_status pmgp_hyperparams_from_json(const char* json, pmgp_hyperparams* out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = to_c(pmgp::hyperparams_from_json(parse_config(json)));
  });
}

pmgp_status pmgp_hyperparams_to_json(const pmgp_hyperparams* theta, char** json_out) {
  return guarded([&] {
    need(theta, "theta");
    need(json_out, "json_out");
    *json_out = dup_string(pmgp::to_json(to_cpp(*theta)).dump());
  });
}

}  // extern "C"
