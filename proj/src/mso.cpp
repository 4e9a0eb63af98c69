#include "mso.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "error.hpp"
#include "parallel.hpp"
#include "subspace.hpp"

namespace sspace {

EnergySelection energy_rank(const Eigen::VectorXd& sigma, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorKind::Usage, "eta must lie in (0, 1]");
  if (sigma.size() == 0) throw Error(ErrorKind::Usage, "empty singular value sequence");
  const double top = sigma.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) throw Error(ErrorKind::Numeric, "all singular values are zero");

  Eigen::Index numerical_rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > 1e-12 * top) ++numerical_rank;

  std::vector<double> cumulative(static_cast<std::size_t>(sigma.size()));
  double running = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    running += sigma[i] * sigma[i];
    cumulative[static_cast<std::size_t>(i)] = running;
  }
  const double total = running;
  Eigen::Index k = sigma.size();
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (cumulative[static_cast<std::size_t>(i)] >= eta * total) {
      k = i + 1;
      break;
    }
  }
  k = std::min(k, numerical_rank);
  return {eta, k, cumulative[static_cast<std::size_t>(k - 1)] / total};
}

LeftSpectrum left_spectrum(const Eigen::MatrixXd& ambient_first) {
  auto f = thin_svd(ambient_first, false);
  return {std::move(f.U), std::move(f.sigma)};
}

MsoResult mso(const LeftSpectrum& v, const LeftSpectrum& w, double eta) {
  if (v.ambient() != w.ambient())
    throw Error(ErrorKind::Mismatch, "ambient dimension mismatch: d_V=" + std::to_string(v.ambient()) +
                                         " d_W=" + std::to_string(w.ambient()));
  const auto sel_v = energy_rank(v.sigma, eta);
  const auto sel_w = energy_rank(w.sigma, eta);
  MsoResult r;
  r.eta = eta;
  r.k_v = sel_v.k;
  r.k_w = sel_w.k;
  r.d = v.ambient();
  const auto qv = v.U.leftCols(r.k_v);
  const auto qw = w.U.leftCols(r.k_w);
  r.baseline = static_cast<double>(std::max(r.k_v, r.k_w)) / static_cast<double>(r.d);
  if (r.k_v == r.k_w && qv == qw) {
    r.mso = 1.0;
    return r;
  }
  const Eigen::MatrixXd overlap = qv.transpose() * qw;
  r.mso = std::clamp(overlap.squaredNorm() / static_cast<double>(std::min(r.k_v, r.k_w)), 0.0, 1.0);
  return r;
}

MsoResult mso(const Eigen::MatrixXd& v, const Eigen::MatrixXd& w, double eta) {
  if (v.rows() != w.rows())
    throw Error(ErrorKind::Mismatch, "ambient dimension mismatch: d_V=" + std::to_string(v.rows()) +
                                         " d_W=" + std::to_string(w.rows()));
  return mso(left_spectrum(v), left_spectrum(w), eta);
}

void validate_eta_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorKind::Usage, "eta grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) throw Error(ErrorKind::Usage, "eta values must lie in (0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw Error(ErrorKind::Usage, "eta grid must be strictly increasing");
  }
}

std::vector<MsoResult> mso_sweep(const LeftSpectrum& v, const LeftSpectrum& w, const std::vector<double>& eta_grid) {
  validate_eta_grid(eta_grid);
  std::vector<MsoResult> out;
  out.reserve(eta_grid.size());
  for (double eta : eta_grid) out.push_back(mso(v, w, eta));
  return out;
}

std::vector<MsoResult> mso_sweep(const Eigen::MatrixXd& v, const Eigen::MatrixXd& w,
                                 const std::vector<double>& eta_grid) {
  validate_eta_grid(eta_grid);
  if (v.rows() != w.rows())
    throw Error(ErrorKind::Mismatch, "ambient dimension mismatch: d_V=" + std::to_string(v.rows()) +
                                         " d_W=" + std::to_string(w.rows()));
  return mso_sweep(left_spectrum(v), left_spectrum(w), eta_grid);
}

PairwiseReport pairwise_weight_mso(const std::vector<std::pair<std::string, DeltaModel>>& deltas,
                                   const LayerFilter& layers, const std::vector<double>& eta_grid) {
  if (deltas.size() < 2) throw Error(ErrorKind::Usage, "pairwise MSO needs at least two labeled deltas");
  validate_eta_grid(eta_grid);
  std::set<std::string> unique;
  for (const auto& [label, d] : deltas)
    if (!unique.insert(label).second) throw Error(ErrorKind::Usage, "duplicate delta label '" + label + "'");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    require_same_layout(deltas[0].second, deltas[i].second, deltas[0].first, deltas[i].first);

  const DeltaModel& first = deltas[0].second;
  const auto selected = resolve_layers(layers, first.names());
  std::vector<std::string> tensors;
  for (const auto& name : selected)
    if (first.at(name).rank() >= 2) tensors.push_back(name);

  const std::size_t n_labels = deltas.size();
  const std::size_t n_tensors = tensors.size();
  std::vector<LeftSpectrum> spectra(n_labels * n_tensors);
  parallel_for(spectra.size(), [&](std::size_t idx) {
    const auto& [label, delta] = deltas[idx / n_tensors];
    const auto& name = tensors[idx % n_tensors];
    try {
      spectra[idx] = left_spectrum(tensor_as_matrix(delta.at(name))->values);
    } catch (const Error& err) {
      throw Error(err.kind(), "delta '" + label + "', tensor '" + name + "': " + err.what());
    }
  });

  PairwiseReport report;
  report.layers = layers;
  report.eta_grid = eta_grid;
  for (const auto& [label, d] : deltas) {
    report.labels.push_back(label);
    report.provenance.push_back(d.provenance());
  }

  struct Job {
    std::size_t a, b, t;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < n_labels; ++a)
    for (std::size_t b = a + 1; b < n_labels; ++b)
      for (std::size_t t = 0; t < n_tensors; ++t) jobs.push_back({a, b, t});

  std::vector<std::vector<MsoResult>> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto& job = jobs[j];
    try {
      results[j] = mso_sweep(spectra[job.a * n_tensors + job.t], spectra[job.b * n_tensors + job.t], eta_grid);
    } catch (const Error& err) {
      throw Error(err.kind(), "tensor '" + tensors[job.t] + "': " + err.what());
    }
  });

  // Means keyed by (pair order, layer, eta index); nullopt layers sort first.
  struct Accum {
    std::string pair;
    double mso = 0.0, baseline = 0.0;
    std::size_t count = 0;
  };
  std::map<std::tuple<std::size_t, std::optional<long>, std::size_t>, Accum> means;
  std::size_t pair_order = 0;
  std::size_t last_a = SIZE_MAX, last_b = SIZE_MAX;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& job = jobs[j];
    if (job.a != last_a || job.b != last_b) {
      if (last_a != SIZE_MAX) ++pair_order;
      last_a = job.a;
      last_b = job.b;
    }
    const std::string pair = deltas[job.a].first + "|" + deltas[job.b].first;
    const auto layer = layer_index_of(tensors[job.t]);
    for (std::size_t e = 0; e < eta_grid.size(); ++e) {
      report.rows.push_back({pair, tensors[job.t], layer, results[j][e]});
      auto& acc = means[{pair_order, layer, e}];
      acc.pair = pair;
      acc.mso += results[j][e].mso;
      acc.baseline += results[j][e].baseline;
      ++acc.count;
    }
  }
  for (const auto& [key, acc] : means) {
    const auto& [order, layer, e] = key;
    const double n = static_cast<double>(acc.count);
    report.layer_means.push_back({acc.pair, layer, eta_grid[e], acc.mso / n, acc.baseline / n, acc.count});
  }
  return report;
}

}  // namespace sspace
