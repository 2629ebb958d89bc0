#pragma once

#include "pmgp/gp.hpp"
#include "pmgp/physics.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pmgp {

// Additive current on du/dt, active while t >= onset and
// (t - onset) mod period < duration.
struct Stimulus {
  std::vector<int> vertices;
  double amplitude = 1.0;
  double onset = 0.0;
  double duration = 5.0;
  double period = 400.0;

  bool active(double t) const;
};

struct SimConfig {
  FhnParams fhn;
  double dt = 0.1;
  int n_steps = 1000;
  int record_stride = 10;
  std::vector<Stimulus> stimuli;
  std::uint64_t seed = 0;

  void validate(Index n_vertices) const;
};

// Semi-implicit FHN on the mesh starting from u = v = 0: diffusion is implicit,
// reactions and stimulus explicit. Records steps 0, stride, 2 * stride, ...
// Returns a (u, v) x vertex x time field.
FieldTensor fhn_simulate(const TriMesh& mesh, const CotanLaplacian& laplacian, const SimConfig& cfg);

// y = q + sigma * N(0, 1) elementwise.
FieldTensor add_noise(const FieldTensor& q, double sigma, std::uint64_t seed);

struct RelativeError {
  double u = 0.0;
  double v = 0.0;
  double total = 0.0;  // (u + v) / 2
};

// ||q_hat - q|| / ||q|| per task over vertices and times.
RelativeError relative_error(const FieldTensor& q_hat, const FieldTensor& q);
double relative_error(std::span<const double> q_hat, std::span<const double> q);

// Seeded uniform vertex picks without replacement (sorted) and every
// time_stride-th time stamp.
TrainingSet subsample(const FieldTensor& data, std::size_t picks, int time_stride, std::uint64_t seed);
TrainingSet subsample(const FieldTensor& data, std::span<const int> vertices, int time_stride);

// Vertex furthest along the principal axis of the vertex cloud (the positive
// end). axis = 1 uses the second principal axis.
int extremal_vertex(const TriMesh& mesh, int axis = 0);

// Regular pacing at the apex and its one-ring.
SimConfig protocol_one(const TriMesh& mesh, double dt, int n_steps, int record_stride);
// Protocol I plus a second pacing site, offset in time, to break the wave.
SimConfig protocol_two(const TriMesh& mesh, double dt, int n_steps, int record_stride, double second_onset = 180.0);

}  // namespace pmgp
