#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "activation.hpp"
#include "tensor_store.hpp"

namespace sspace {

/// Planted-subspace fixtures with known answers.
struct SynthSpec {
  Eigen::Index rows = 32;
  Eigen::Index cols = 32;
  Eigen::Index planted_k = 8;
  double in_energy = 0.7;
  std::uint64_t seed = 0;
  long layer_count = 4;
  bool include_vectors = true;  // add a rank-1 norm tensor per layer
};

void validate(const SynthSpec& spec);

/// rows x cols matrix with orthonormal columns (cols <= rows): Gram-Schmidt
/// applied twice to a seeded Gaussian matrix.
Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

struct PlantedUpdate {
  AnalysisMatrix source;  // top-k left subspace is exactly span(planted_basis)
  AnalysisMatrix task;    // unit Frobenius norm, in_energy of it inside span(planted_basis)
  Eigen::MatrixXd planted_basis;
  double in_energy = 0.0;
};

PlantedUpdate planted_update(const SynthSpec& spec, const std::string& name = "planted");

struct PlantedPair {
  Eigen::MatrixXd V;  // d x k_v
  Eigen::MatrixXd W;  // d x k_w
  Eigen::Index shared = 0;
  double mso = 0.0;   // shared / min(k_v, k_w) at eta = 1
};

PlantedPair planted_pair(Eigen::Index d, Eigen::Index k_v, Eigen::Index k_w, Eigen::Index shared, std::uint64_t seed);

struct TruthRecord {
  std::string name;
  long layer = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index planted_k = 0;
  double planted_rho = 0.0;  // planted_k / min(rows, cols)
  double in_energy = 0.0;
};

struct SynthModel {
  Checkpoint base;       // W0
  Checkpoint aligned;    // W0 + source  (its delta plants the subspace)
  Checkpoint finetuned;  // aligned + task
  SynthSpec spec;
  std::vector<TruthRecord> truth;  // one per 2D tensor
};

/// Layers named "model.layers.<i>.mlp.weight" (rows x cols, f64) and, when
/// enabled, "model.layers.<i>.norm.weight" (cols). Deterministic in the spec.
SynthModel synth_model(const SynthSpec& spec);

/// Layers of i.i.d. standard normal rows.
ActivationSet gaussian_activation_set(const std::string& prompt_set_id, long layer_count, Eigen::Index n,
                                      Eigen::Index d, std::uint64_t seed);

struct PlantedActivationSpec {
  long layer_count = 6;
  Eigen::Index n = 200;
  Eigen::Index d = 64;
  Eigen::Index shared_dim = 4;
  double noise = 0.01;
  std::uint64_t seed = 0;
};

/// Two prompt sets whose rows lie in a common per-layer shared_dim subspace
/// (modes with well separated scales) plus isotropic noise.
std::pair<ActivationSet, ActivationSet> planted_activation_sets(const PlantedActivationSpec& spec);

}  // namespace sspace
