// Command-line driver. Talks to the library only through the C API.
#include <pmgp/pmgp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSimulation = 3, kTraining = 4, kEvaluation = 5 };

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void die(int code, const std::string& msg) { throw CliError{code, msg}; }

void check(pmgp_status s, int code, const std::string& what) {
  if (s == PMGP_OK) return;
  // Config problems surface as exit 2 regardless of stage.
  die(s == PMGP_ERR_CONFIG ? kConfig : code, what + ": " + pmgp_last_error());
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Mesh = Handle<pmgp_mesh, pmgp_mesh_free>;
using Spectrum = Handle<pmgp_spectrum, pmgp_spectrum_free>;
using Field = Handle<pmgp_field, pmgp_field_free>;
using Model = Handle<pmgp_model, pmgp_model_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  pmgp_string_free(s);
  return out;
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
};

struct Context {
  Options opt;
  json config;
  fs::path config_dir;
  fs::path out_dir;
  std::string config_hash;

  json section(const char* name) const {
    if (!config.contains(name)) return json::object();
    if (!config[name].is_object()) die(kConfig, std::string("config: '") + name + "' must be an object");
    return config[name];
  }

  // Outputs go to the out directory.
  fs::path output(const json& sec, const char* key, const std::string& fallback, const char* name) const {
    std::string p = fallback;
    if (sec.contains(key)) {
      if (!sec[key].is_string()) die(kConfig, std::string(name) + "." + key + ": expected a path string");
      p = sec[key].get<std::string>();
    }
    const fs::path path(p);
    return path.is_absolute() ? path : out_dir / path;
  }

  // Inputs are looked up in the out directory first, then next to the config.
  fs::path input(const json& sec, const char* key, const char* name) const {
    if (!sec.contains(key) || !sec[key].is_string()) {
      die(kConfig, std::string(name) + "." + key + ": required path missing");
    }
    return resolve_input(sec[key].get<std::string>(), std::string(name) + "." + key);
  }

  fs::path resolve_input(const std::string& p, const std::string& field) const {
    const fs::path path(p);
    if (path.is_absolute()) {
      if (!fs::exists(path)) die(kConfig, field + ": file not found: " + p);
      return path;
    }
    for (const auto& base : {out_dir, config_dir}) {
      if (fs::exists(base / path)) return fs::weakly_canonical(base / path);
    }
    die(kConfig, field + ": file not found: " + p);
  }
};

Context load_context(const Options& opt) {
  Context ctx;
  ctx.opt = opt;
  if (opt.threads < 1) die(kConfig, "--threads must be >= 1");
  const fs::path cfg_path(opt.config);
  std::ifstream in(cfg_path);
  if (!in) die(kConfig, "config: cannot open " + opt.config);
  try {
    ctx.config = json::parse(in);
  } catch (const json::parse_error& e) {
    die(kConfig, std::string("config: not valid JSON: ") + e.what());
  }
  if (!ctx.config.is_object()) die(kConfig, "config: top level must be an object");
  ctx.config_dir = fs::absolute(cfg_path).parent_path();
  ctx.out_dir = opt.out.empty() ? fs::current_path() : fs::absolute(opt.out);
  fs::create_directories(ctx.out_dir);
  char* hex = nullptr;
  check(pmgp_hash_string(ctx.config.dump().c_str(), &hex), kConfig, "config hash");
  ctx.config_hash = take(hex);
  return ctx;
}

struct MeshInfo {
  json spec;
  std::string digest;
  std::int64_t n_vertices = 0;
  double diameter = 0.0;
};

// "mesh": path to OFF / CSV directory, or {"icosphere": {"subdivisions", "radius"}}.
MeshInfo load_mesh(const Context& ctx, Mesh& mesh, const json& spec) {
  MeshInfo info;
  if (spec.is_null()) die(kConfig, "mesh: required field missing");
  if (spec.is_string()) {
    const auto path = ctx.resolve_input(spec.get<std::string>(), "mesh");
    check(pmgp_mesh_load(path.c_str(), mesh.out()), kConfig, "mesh");
    char* hex = nullptr;
    if (fs::is_regular_file(path)) {
      check(pmgp_file_digest(path.c_str(), &hex), kConfig, "mesh digest");
      info.digest = take(hex);
    }
    info.spec = path.string();
  } else if (spec.is_object() && spec.contains("icosphere")) {
    const auto& ico = spec["icosphere"];
    const int subdiv = ico.value("subdivisions", 3);
    const double radius = ico.value("radius", 1.0);
    check(pmgp_mesh_icosphere(subdiv, radius, mesh.out()), kConfig, "mesh");
    info.spec = {{"icosphere", {{"subdivisions", subdiv}, {"radius", radius}}}};
    info.digest = "generated";
  } else {
    die(kConfig, "mesh: expected a path or {\"icosphere\": {...}}");
  }
  std::int64_t nf = 0;
  check(pmgp_mesh_info(mesh.get(), &info.n_vertices, &nf, &info.diameter), kConfig, "mesh");
  return info;
}

std::int64_t mode_count(const json& config) {
  if (!config.contains("modes")) return 0;
  if (!config["modes"].is_number_integer()) die(kConfig, "modes: expected an integer");
  return config["modes"].get<std::int64_t>();
}

json field_index(const pmgp_field* f) {
  char* s = nullptr;
  check(pmgp_field_index_json(f, &s), kEvaluation, "field index");
  return json::parse(take(s));
}

std::vector<std::int64_t> field_dims(const pmgp_field* f) {
  std::int64_t d[3];
  check(pmgp_field_dims(f, d), kEvaluation, "field dims");
  return {d[0], d[1], d[2]};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) die(kConfig, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path, int code) {
  std::ifstream in(path);
  if (!in) die(code, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    die(code, path.string() + ": not valid JSON: " + e.what());
  }
}

void append_manifest(const Context& ctx, const std::string& command, json body, double wall) {
  body["command"] = command;
  body["config_file"] = fs::absolute(ctx.opt.config).string();
  body["config_hash"] = ctx.config_hash;
  body["config"] = ctx.config;
  body["threads"] = ctx.opt.threads;
  body["wall_seconds"] = wall;
  body["library_version"] = pmgp_version();
  std::ofstream out(ctx.out_dir / "manifests.jsonl", std::ios::app);
  if (!out) die(kConfig, "cannot append manifest in " + ctx.out_dir.string());
  out << body.dump() << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t pick_seed(const Context& ctx, const json& sec) {
  if (ctx.opt.seed) return *ctx.opt.seed;
  if (sec.contains("seed")) {
    if (!sec["seed"].is_number_unsigned() && !sec["seed"].is_number_integer()) die(kConfig, "seed: expected an integer");
    return sec["seed"].get<std::uint64_t>();
  }
  return 0;
}

// ---- subcommands -------------------------------------------------------------

void cmd_simulate(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  json sec = ctx.section("simulate");
  sec["seed"] = pick_seed(ctx, sec);
  Mesh mesh;
  const auto info = load_mesh(ctx, mesh, ctx.config.value("mesh", json()));
  const auto out = ctx.output(sec, "output", "simulation.field", "simulate");

  Field field;
  char* resolved = nullptr;
  const auto s = pmgp_simulate(mesh.get(), sec.dump().c_str(), field.out(), &resolved);
  if (s == PMGP_ERR_CONFIG || s == PMGP_ERR_INVALID_ARGUMENT) die(kConfig, std::string("simulate: ") + pmgp_last_error());
  check(s, kSimulation, "simulate");
  const json resolved_cfg = json::parse(take(resolved));

  const json header = {{"vertex_count", info.n_vertices}, {"seed", sec["seed"]}, {"config_hash", ctx.config_hash}};
  check(pmgp_field_write(field.get(), out.c_str(), header.dump().c_str()), kSimulation, "write field");
  if (sec.contains("csv")) {
    check(pmgp_field_write_csv(field.get(), ctx.output(sec, "csv", "", "simulate").c_str()), kSimulation, "write csv");
  }
  const auto dims = field_dims(field.get());
  append_manifest(ctx, "simulate",
                  {{"mesh", info.spec},
                   {"mesh_digest", info.digest},
                   {"protocol", sec.value("protocol", "I")},
                   {"resolved", resolved_cfg},
                   {"seeds", {{"simulate", sec["seed"]}}},
                   {"dims", dims},
                   {"output", out.string()}},
                  seconds_since(t0));
  std::cout << "wrote " << out.string() << " dims [" << dims[0] << ", " << dims[1] << ", " << dims[2] << "]\n";
}

void cmd_subsample(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const json sec = ctx.section("subsample");
  const std::uint64_t seed = pick_seed(ctx, sec);
  const auto in = ctx.input(sec, "field", "subsample");
  const auto out = ctx.output(sec, "output", "train.field", "subsample");
  const auto stride = sec.value("time_stride", 1);
  const auto noise = sec.value("noise", 0.0);

  Field full, picked, noisy;
  check(pmgp_field_read(in.c_str(), full.out(), nullptr), kConfig, "subsample.field");
  if (sec.contains("vertices")) {
    const auto vs = sec["vertices"].get<std::vector<int>>();
    check(pmgp_subsample_vertices(full.get(), vs.data(), static_cast<std::int64_t>(vs.size()), stride, picked.out()),
          kConfig, "subsample");
  } else {
    check(pmgp_subsample(full.get(), sec.value("picks", 50), stride, seed, picked.out()), kConfig, "subsample");
  }
  // Noise seed is decorrelated from the vertex-pick seed.
  const std::uint64_t noise_seed = seed * 0x9e3779b97f4a7c15ULL + 1;
  check(pmgp_add_noise(picked.get(), noise, noise_seed, noisy.out()), kConfig, "subsample.noise");
  const json header = {{"seed", seed}, {"config_hash", ctx.config_hash}};
  check(pmgp_field_write(noisy.get(), out.c_str(), header.dump().c_str()), kConfig, "write field");
  const auto idx = field_index(noisy.get());
  append_manifest(ctx, "subsample",
                  {{"input", in.string()},
                   {"output", out.string()},
                   {"seeds", {{"subsample", seed}, {"noise", noise_seed}}},
                   {"noise", noise},
                   {"time_stride", stride},
                   {"vertices", idx["space_ids"]},
                   {"n_times", idx["times"].size()}},
                  seconds_since(t0));
  std::cout << "wrote " << out.string() << " with " << idx["space_ids"].size() << " vertices, " << idx["times"].size()
            << " times\n";
}

void cmd_train(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  json sec = ctx.section("train");
  sec["seed"] = pick_seed(ctx, sec);
  if (ctx.opt.threads > 1 || !sec.contains("threads")) sec["threads"] = ctx.opt.threads;
  const auto data_path = ctx.input(sec, "data", "train");
  const auto model_path = ctx.output(sec, "output", "model.json", "train");
  const auto report_path = ctx.output(sec, "report", "train_report.json", "train");

  Mesh mesh;
  const json mesh_spec = ctx.config.value("mesh", json());
  const auto info = load_mesh(ctx, mesh, mesh_spec);
  Spectrum spectrum;
  const auto k = mode_count(ctx.config);
  check(pmgp_spectrum_compute(mesh.get(), k, spectrum.out()), kConfig, "spectrum");
  std::int64_t modes = 0;
  pmgp_spectrum_modes(spectrum.get(), &modes);
  Field data;
  check(pmgp_field_read(data_path.c_str(), data.out(), nullptr), kConfig, "train.data");

  pmgp_hyperparams best{};
  char* report_raw = nullptr;
  const auto s = pmgp_train(data.get(), spectrum.get(), sec.dump().c_str(), &best, &report_raw);
  const std::string report_text = take(report_raw);
  if (!report_text.empty()) write_json(report_path, json::parse(report_text));
  if (s == PMGP_ERR_INVALID_ARGUMENT) die(kConfig, std::string("train: ") + pmgp_last_error());
  check(s, kTraining, "train");
  const json report = json::parse(report_text);

  char* theta_raw = nullptr;
  check(pmgp_hyperparams_to_json(&best, &theta_raw), kTraining, "model");
  const json model = {{"model_kind", report["model_kind"]},
                      {"theta", json::parse(take(theta_raw))},
                      {"data", data_path.string()},
                      {"mesh", info.spec},
                      {"mesh_digest", info.digest},
                      {"modes", modes},
                      {"w", report["w"]},
                      {"n_col", report["n_col"]},
                      {"tau2_cv", report["tau2_cv"]},
                      {"report", report_path.string()}};
  write_json(model_path, model);
  append_manifest(ctx, "train",
                  {{"mesh", info.spec},
                   {"mesh_digest", info.digest},
                   {"modes", modes},
                   {"resolved", report["config"]},
                   {"seeds", {{"train", sec["seed"]}}},
                   {"model_kind", report["model_kind"]},
                   {"w", report["w"]},
                   {"n_col", report["n_col"]},
                   {"theta", model["theta"]},
                   {"metrics", {{"tau2_cv", report["tau2_cv"]}}},
                   {"output", model_path.string()},
                   {"report", report_path.string()}},
                  seconds_since(t0));
  std::cout << "wrote " << model_path.string() << " (" << report["model_kind"].get<std::string>()
            << ", tau2_cv = " << report["tau2_cv"] << ")\n";
}

// Rebuilds the fitted model from a model file.
json load_model(const Context& ctx, const json& sec, Mesh& mesh, Spectrum& spectrum, Field& data, Model& model,
                int code) {
  const auto model_path = ctx.input(sec, "model", "model");
  const json m = read_json(model_path, code);
  for (const char* key : {"theta", "data", "mesh", "modes"}) {
    if (!m.contains(key)) die(code, model_path.string() + ": missing '" + key + "'");
  }
  load_mesh(ctx, mesh, m["mesh"]);
  check(pmgp_spectrum_compute(mesh.get(), m["modes"].get<std::int64_t>(), spectrum.out()), code, "spectrum");
  check(pmgp_field_read(m["data"].get<std::string>().c_str(), data.out(), nullptr), code, "model data");
  pmgp_hyperparams theta{};
  check(pmgp_hyperparams_from_json(m["theta"].dump().c_str(), &theta), code, "model theta");
  const auto s = pmgp_model_create(&theta, data.get(), spectrum.get(), model.out());
  if (s != PMGP_OK) die(code, std::string("model: ") + pmgp_last_error());
  return m;
}

void cmd_predict(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const json sec = ctx.section("predict");
  const auto out = ctx.output(sec, "output", "prediction.field", "predict");
  Mesh mesh;
  Spectrum spectrum;
  Field data;
  Model model;
  const json m = load_model(ctx, sec, mesh, spectrum, data, model, kEvaluation);

  std::vector<int> vertices;
  std::vector<double> times;
  if (sec.contains("truth")) {
    Field truth;
    check(pmgp_field_read(ctx.input(sec, "truth", "predict").c_str(), truth.out(), nullptr), kEvaluation,
          "predict.truth");
    const auto idx = field_index(truth.get());
    vertices = idx["space_ids"].get<std::vector<int>>();
    times = idx["times"].get<std::vector<double>>();
  } else {
    const auto idx = field_index(data.get());
    if (sec.value("vertices", json("all")) == json("all")) {
      std::int64_t nv = 0;
      pmgp_mesh_info(mesh.get(), &nv, nullptr, nullptr);
      for (int i = 0; i < nv; ++i) vertices.push_back(i);
    } else {
      vertices = sec["vertices"].get<std::vector<int>>();
    }
    times = sec.contains("times") ? sec["times"].get<std::vector<double>>() : idx["times"].get<std::vector<double>>();
  }

  Field mean, var;
  const bool with_var = sec.value("variance", false);
  check(pmgp_model_predict(model.get(), vertices.data(), static_cast<std::int64_t>(vertices.size()), times.data(),
                           static_cast<std::int64_t>(times.size()), mean.out(), with_var ? var.out() : nullptr),
        kEvaluation, "predict");
  const json header = {{"config_hash", ctx.config_hash}};
  check(pmgp_field_write(mean.get(), out.c_str(), header.dump().c_str()), kEvaluation, "write prediction");
  json body = {{"model", m}, {"output", out.string()}, {"n_vertices", vertices.size()}, {"n_times", times.size()}};
  if (with_var) {
    const auto vpath = ctx.output(sec, "variance_output", "variance.field", "predict");
    check(pmgp_field_write(var.get(), vpath.c_str(), header.dump().c_str()), kEvaluation, "write variance");
    body["variance_output"] = vpath.string();
  }
  if (sec.contains("csv")) {
    check(pmgp_field_write_csv(mean.get(), ctx.output(sec, "csv", "", "predict").c_str()), kEvaluation, "write csv");
  }
  append_manifest(ctx, "predict", body, seconds_since(t0));
  std::cout << "wrote " << out.string() << "\n";
}

void cmd_evaluate(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const json sec = ctx.section("evaluate");
  const auto out = ctx.output(sec, "output", "metrics.json", "evaluate");
  if (!sec.contains("prediction")) die(kConfig, "evaluate.prediction: required path missing");
  std::vector<std::string> preds;
  if (sec["prediction"].is_array()) {
    preds = sec["prediction"].get<std::vector<std::string>>();
  } else {
    preds.push_back(sec["prediction"].get<std::string>());
  }
  if (preds.empty()) die(kConfig, "evaluate.prediction: empty list");
  const auto truth_path = ctx.input(sec, "truth", "evaluate");

  Field truth;
  check(pmgp_field_read(truth_path.c_str(), truth.out(), nullptr), kEvaluation, "evaluate.truth " + truth_path.string());
  json runs = json::array();
  std::vector<std::array<double, 3>> values;
  for (const auto& p : preds) {
    const auto path = ctx.resolve_input(p, "evaluate.prediction");
    Field pred;
    check(pmgp_field_read(path.c_str(), pred.out(), nullptr), kEvaluation, "evaluate.prediction " + path.string());
    if (field_dims(pred.get()) != field_dims(truth.get())) {
      die(kEvaluation, "evaluate: dimension mismatch between " + path.string() + " and " + truth_path.string());
    }
    std::array<double, 3> re{};
    check(pmgp_relative_error(pred.get(), truth.get(), re.data()), kEvaluation, "evaluate");
    values.push_back(re);
    runs.push_back({{"prediction", path.string()}, {"RE_u", re[0]}, {"RE_v", re[1]}, {"RE_total", re[2]}});
  }
  const char* names[3] = {"RE_u", "RE_v", "RE_total"};
  json mean, stdev;
  for (int c = 0; c < 3; ++c) {
    double m = 0.0;
    for (const auto& v : values) m += v[c];
    m /= static_cast<double>(values.size());
    double ss = 0.0;
    for (const auto& v : values) ss += (v[c] - m) * (v[c] - m);
    mean[names[c]] = m;
    stdev[names[c]] = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  }
  json metrics = {{"RE_u", mean["RE_u"]},
                  {"RE_v", mean["RE_v"]},
                  {"RE_total", mean["RE_total"]},
                  {"mean", mean},
                  {"std", stdev},
                  {"n", values.size()},
                  {"runs", runs},
                  {"truth", truth_path.string()}};
  write_json(out, metrics);
  append_manifest(ctx, "evaluate", {{"metrics", metrics}, {"output", out.string()}}, seconds_since(t0));
  std::cout << "RE_total = " << mean["RE_total"].get<double>();
  if (values.size() > 1) std::cout << " +- " << stdev["RE_total"].get<double>() << " (n = " << values.size() << ")";
  std::cout << "\n";
}

void cmd_loo(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const json sec = ctx.section("loo");
  const auto out = ctx.output(sec, "output", "loo.json", "loo");
  Mesh mesh;
  Spectrum spectrum;
  Field data;
  Model model;
  const json m = load_model(ctx, sec, mesh, spectrum, data, model, kEvaluation);
  double tau2 = 0.0;
  Field residuals;
  check(pmgp_model_loo(model.get(), &tau2, residuals.out()), kEvaluation, "loo");
  json body = {{"tau2_cv", tau2}, {"model", m}};
  if (sec.contains("residuals")) {
    const auto rpath = ctx.output(sec, "residuals", "", "loo");
    check(pmgp_field_write(residuals.get(), rpath.c_str(), nullptr), kEvaluation, "write residuals");
    body["residuals"] = rpath.string();
  }
  write_json(out, body);
  append_manifest(ctx, "loo", {{"metrics", {{"tau2_cv", tau2}}}, {"output", out.string()}}, seconds_since(t0));
  std::cout << "tau2_cv = " << tau2 << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-augmented multi-task GP on triangle meshes"};
  app.require_subcommand(1);
  Options opt;
  struct Sub {
    const char* name;
    const char* help;
    void (*run)(const Context&);
  };
  const Sub subs[] = {
      {"simulate", "Run the FHN simulator and write a field container", cmd_simulate},
      {"subsample", "Pick training vertices and times, add measurement noise", cmd_subsample},
      {"train", "Fit hyperparameters (multi-start, CV selection)", cmd_train},
      {"predict", "Posterior mean (and variance) from a model file", cmd_predict},
      {"evaluate", "Relative errors of predictions against a truth field", cmd_evaluate},
      {"loo", "Leave-one-location-out residuals and tau2_cv", cmd_loo},
  };
  std::uint64_t seed = 0;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", opt.config, "JSON config file")->required();
    sub->add_option("--seed", seed, "Override the section seed");
    sub->add_option("--out", opt.out, "Output directory (default: current directory)");
    sub->add_option("--threads", opt.threads, "Worker threads for training restarts");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }
  for (const auto& s : subs) {
    auto* sub = app.get_subcommand(s.name);
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opt.seed = seed;
    try {
      s.run(load_context(opt));
      return kOk;
    } catch (const CliError& e) {
      std::cerr << "pmgp " << s.name << ": " << e.message << "\n";
      return e.code;
    } catch (const json::exception& e) {
      std::cerr << "pmgp " << s.name << ": config: " << e.what() << "\n";
      return kConfig;
    } catch (const std::exception& e) {
      std::cerr << "pmgp " << s.name << ": " << e.what() << "\n";
      return kConfig;
    }
  }
  return kConfig;
}
