#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mso.hpp"
#include "tensor_store.hpp"

namespace sspace {

/// Which token's hidden state was stacked. EarlyWindow(w) is a mean over the
/// first w generated tokens; the analysis side only carries the label.
struct TokenPolicy {
  enum class Kind { LastToken, EarlyWindow };
  Kind kind = Kind::LastToken;
  int window = 0;

  bool operator==(const TokenPolicy&) const = default;
};

TokenPolicy parse_token_policy(std::string_view text);  // "last" | "early:<w>"
std::string format_token_policy(const TokenPolicy& policy);

/// Hidden states of one prompt set at one layer: n prompts x d hidden size.
struct ActivationMatrix {
  std::string prompt_set_id;
  long layer = 0;
  TokenPolicy token_policy;
  Eigen::MatrixXd values;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index d() const { return values.cols(); }
};

struct ActivationSet {
  std::string prompt_set_id;
  std::string model_id;
  TokenPolicy token_policy;
  std::vector<ActivationMatrix> layers;  // index == layer number, from 0
};

/// Parses tensors "layer_0".."layer_<L>" and the required metadata keys
/// prompt_set_id, token_policy, model_id.
ActivationSet activation_set_from_checkpoint(const Checkpoint& ckpt);
ActivationSet load_activation_set(const std::filesystem::path& path);
Checkpoint activation_set_to_checkpoint(const ActivationSet& set, DType dtype = DType::F32);

struct DepthBand {
  double low_pct = 65.0;
  double high_pct = 90.0;
};

DepthBand parse_depth_band(std::string_view text);  // "LO:HI"

/// {l : low <= 100 l / (L-1) <= high}; throws when empty or L < 2.
std::vector<long> band_layers(const DepthBand& band, long layer_count);

struct ActivationLayerRow {
  long layer = 0;
  double depth_pct = 0.0;
  MsoResult result;  // k_v / k_w refer to sets A / B
};

struct ActivationBandRow {
  double eta = 0.0;
  double mean_mso = 0.0;
  double mean_baseline = 0.0;
  std::vector<long> layers;
};

struct ActivationMsoReport {
  std::string set_a, set_b;
  std::string policy_a, policy_b;
  DepthBand band;
  bool centered = false;
  std::vector<double> eta_grid;
  std::vector<ActivationLayerRow> layers;  // layer-major, eta-minor
  std::vector<ActivationBandRow> band_rows;
};

/// Per-layer MSO of the transposed (d x n) stacks and depth-band averages.
/// `center` subtracts each set's per-layer row mean first (off by default).
ActivationMsoReport activation_mso(const ActivationSet& a, const ActivationSet& b, const std::vector<double>& eta_grid,
                                   const DepthBand& band, bool center = false);

}  // namespace sspace
