#pragma once

#include "pmgp/sim.hpp"
#include "pmgp/train.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pmgp {

using Json = nlohmann::json;

// Readers reject unknown keys and wrong types with ErrorKind::Config, naming
// the offending key. Absent keys keep their defaults.
Hyperparams hyperparams_from_json(const Json& j);
Json to_json(const Hyperparams& h);

FhnParams fhn_from_json(const Json& j);
Json to_json(const FhnParams& p);

// "protocol": "I" | "II" | "custom". I and II build their stimulus sites from
// the mesh; custom takes an explicit "stimuli" list.
SimConfig sim_config_from_json(const Json& j, const TriMesh& mesh);
Json to_json(const SimConfig& cfg);

struct TrainSpec {
  TrainConfig cfg;
  FhnParams fhn;
  // When non-empty, the physics weight is chosen from these by tau2_cv.
  std::vector<double> weights;
};

TrainSpec train_spec_from_json(const Json& j, double mesh_diameter);
Json to_json(const TrainConfig& cfg);
Json to_json(const TrainReport& report);

// FNV-1a over the compact dump; keys are sorted by the json library.
std::string config_hash(const Json& j);

}  // namespace pmgp
