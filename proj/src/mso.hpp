#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "delta.hpp"
#include "layers.hpp"

namespace sspace {

struct EnergySelection {
  double eta = 1.0;
  Eigen::Index k = 0;
  double captured_energy = 0.0;
};

/// Smallest k whose leading squared singular values reach an eta fraction of
/// the total, capped at the numerical rank (sigma_i > 1e-12 * sigma_1).
EnergySelection energy_rank(const Eigen::VectorXd& sigma, double eta);

/// Left singular vectors and values of an ambient-first (d x n) matrix.
struct LeftSpectrum {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;

  Eigen::Index ambient() const { return U.rows(); }
};

LeftSpectrum left_spectrum(const Eigen::MatrixXd& ambient_first);

struct MsoResult {
  double eta = 1.0;
  Eigen::Index k_v = 0;
  Eigen::Index k_w = 0;
  Eigen::Index d = 0;
  double mso = 0.0;
  double baseline = 0.0;  // max(k_v, k_w) / d
};

/// Mode Subspace Overlap ||Q_V^T Q_W||_F^2 / min(k_V, k_W) of the eta-energy
/// left singular subspaces. Inputs are ambient-first: d x n_V and d x n_W.
MsoResult mso(const LeftSpectrum& v, const LeftSpectrum& w, double eta);
MsoResult mso(const Eigen::MatrixXd& v, const Eigen::MatrixXd& w, double eta);

/// Each value in (0, 1], strictly increasing.
void validate_eta_grid(const std::vector<double>& grid);

std::vector<MsoResult> mso_sweep(const LeftSpectrum& v, const LeftSpectrum& w, const std::vector<double>& eta_grid);
std::vector<MsoResult> mso_sweep(const Eigen::MatrixXd& v, const Eigen::MatrixXd& w,
                                 const std::vector<double>& eta_grid);

struct PairwiseRow {
  std::string pair;  // "<label_a>|<label_b>"
  std::string tensor;
  std::optional<long> layer;
  MsoResult result;
};

struct LayerMean {
  std::string pair;
  std::optional<long> layer;  // nullopt groups tensors outside numbered layers
  double eta = 0.0;
  double mean_mso = 0.0;
  double mean_baseline = 0.0;
  std::size_t tensor_count = 0;
};

struct PairwiseReport {
  std::vector<std::string> labels;
  std::vector<std::string> provenance;
  LayerFilter layers;
  std::vector<double> eta_grid;
  std::vector<PairwiseRow> rows;
  std::vector<LayerMean> layer_means;
};

/// MSO for every unordered pair of labeled deltas, every selected 2D tensor
/// and every eta, plus the unweighted per-layer mean across tensors.
PairwiseReport pairwise_weight_mso(const std::vector<std::pair<std::string, DeltaModel>>& deltas,
                                   const LayerFilter& layers, const std::vector<double>& eta_grid);

}  // namespace sspace
