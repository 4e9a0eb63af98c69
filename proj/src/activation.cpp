#include "activation.hpp"

#include <charconv>
#include <map>

#include "error.hpp"
#include "parallel.hpp"

namespace sspace {

namespace {

std::optional<long> parse_long(std::string_view s) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

TokenPolicy parse_token_policy(std::string_view text) {
  if (text == "last") return {};
  if (text.starts_with("early:")) {
    auto w = parse_long(text.substr(6));
    if (w && *w >= 1) return {TokenPolicy::Kind::EarlyWindow, static_cast<int>(*w)};
  }
  throw Error(ErrorKind::Format, "bad token policy '" + std::string(text) + "' (expected last or early:<w>)");
}

std::string format_token_policy(const TokenPolicy& policy) {
  return policy.kind == TokenPolicy::Kind::LastToken ? "last" : "early:" + std::to_string(policy.window);
}

ActivationSet activation_set_from_checkpoint(const Checkpoint& ckpt) {
  ActivationSet set;
  const auto& meta = ckpt.metadata();
  for (const char* key : {"prompt_set_id", "token_policy", "model_id"})
    if (!meta.count(key)) throw Error(ErrorKind::Format, std::string("activation file lacks metadata key '") + key + "'");
  set.prompt_set_id = meta.at("prompt_set_id");
  set.model_id = meta.at("model_id");
  set.token_policy = parse_token_policy(meta.at("token_policy"));

  std::map<long, const NamedTensor*> by_layer;
  for (const auto& [name, tensor] : ckpt) {
    auto idx = name.starts_with("layer_") ? parse_long(std::string_view(name).substr(6)) : std::nullopt;
    if (!idx || *idx < 0) throw Error(ErrorKind::Format, "unexpected tensor '" + name + "' in activation file");
    by_layer[*idx] = &tensor;
  }
  if (by_layer.empty()) throw Error(ErrorKind::Format, "activation file holds no layer tensors");

  long expected = 0;
  for (const auto& [idx, tensor] : by_layer) {
    if (idx != expected) throw Error(ErrorKind::Format, "gap in layer indices: layer_" + std::to_string(expected) + " is missing");
    ++expected;
    if (tensor->rank() != 2) throw Error(ErrorKind::Format, "tensor '" + tensor->name() + "' is not an n x d matrix");
    auto m = tensor_as_matrix(*tensor);
    if (!set.layers.empty() && (m->rows() != set.layers[0].n() || m->cols() != set.layers[0].d()))
      throw Error(ErrorKind::Format, "shape inconsistency: '" + tensor->name() + "' differs from layer_0");
    if (m->rows() < 2) throw Error(ErrorKind::Format, "activation sets need at least two prompts");
    set.layers.push_back({set.prompt_set_id, idx, set.token_policy, std::move(m->values)});
  }
  return set;
}

ActivationSet load_activation_set(const std::filesystem::path& path) {
  return activation_set_from_checkpoint(read_checkpoint(path));
}

Checkpoint activation_set_to_checkpoint(const ActivationSet& set, DType dtype) {
  Checkpoint ckpt;
  ckpt.set_metadata("prompt_set_id", set.prompt_set_id);
  ckpt.set_metadata("model_id", set.model_id);
  ckpt.set_metadata("token_policy", format_token_policy(set.token_policy));
  for (std::size_t l = 0; l < set.layers.size(); ++l) {
    const auto& m = set.layers[l].values;
    ckpt.add(matrix_as_tensor("layer_" + std::to_string(l), dtype, {m.rows(), m.cols()}, m));
  }
  return ckpt;
}

DepthBand parse_depth_band(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorKind::Usage, "depth band must be LO:HI");
  auto lo = parse_double(text.substr(0, colon));
  auto hi = parse_double(text.substr(colon + 1));
  if (!lo || !hi || *lo < 0.0 || *hi > 100.0 || !(*lo < *hi))
    throw Error(ErrorKind::Usage, "depth band needs 0 <= LO < HI <= 100");
  return {*lo, *hi};
}

std::vector<long> band_layers(const DepthBand& band, long layer_count) {
  if (layer_count < 2) throw Error(ErrorKind::Usage, "depth bands need at least two layers");
  if (!(band.low_pct >= 0.0 && band.low_pct < band.high_pct && band.high_pct <= 100.0))
    throw Error(ErrorKind::Usage, "depth band needs 0 <= LO < HI <= 100");
  std::vector<long> out;
  for (long l = 0; l < layer_count; ++l) {
    const double pct = 100.0 * static_cast<double>(l) / static_cast<double>(layer_count - 1);
    if (band.low_pct <= pct && pct <= band.high_pct) out.push_back(l);
  }
  if (out.empty()) throw Error(ErrorKind::Usage, "depth band selects no layers");
  return out;
}

ActivationMsoReport activation_mso(const ActivationSet& a, const ActivationSet& b, const std::vector<double>& eta_grid,
                                   const DepthBand& band, bool center) {
  validate_eta_grid(eta_grid);
  if (a.layers.size() != b.layers.size())
    throw Error(ErrorKind::Mismatch, "layer count mismatch: " + std::to_string(a.layers.size()) + " vs " +
                                         std::to_string(b.layers.size()));
  if (a.layers.empty()) throw Error(ErrorKind::Usage, "activation sets are empty");
  if (a.layers[0].d() != b.layers[0].d())
    throw Error(ErrorKind::Mismatch, "hidden size mismatch: d_A=" + std::to_string(a.layers[0].d()) +
                                         " d_B=" + std::to_string(b.layers[0].d()));
  const long layer_count = static_cast<long>(a.layers.size());
  const auto in_band = band_layers(band, layer_count);

  auto ambient_first = [center](const ActivationMatrix& m) -> Eigen::MatrixXd {
    if (!center) return m.values.transpose();
    const Eigen::RowVectorXd mean = m.values.colwise().mean();
    return (m.values.rowwise() - mean).transpose();
  };

  std::vector<std::vector<MsoResult>> per_layer(a.layers.size());
  parallel_for(a.layers.size(), [&](std::size_t l) {
    try {
      per_layer[l] = mso_sweep(left_spectrum(ambient_first(a.layers[l])), left_spectrum(ambient_first(b.layers[l])),
                               eta_grid);
    } catch (const Error& err) {
      throw Error(err.kind(), "layer " + std::to_string(l) + ": " + err.what());
    }
  });

  ActivationMsoReport report;
  report.set_a = a.prompt_set_id;
  report.set_b = b.prompt_set_id;
  report.policy_a = format_token_policy(a.token_policy);
  report.policy_b = format_token_policy(b.token_policy);
  report.band = band;
  report.centered = center;
  report.eta_grid = eta_grid;
  for (long l = 0; l < layer_count; ++l) {
    const double pct = 100.0 * static_cast<double>(l) / static_cast<double>(layer_count - 1);
    for (const auto& r : per_layer[static_cast<std::size_t>(l)]) report.layers.push_back({l, pct, r});
  }
  for (std::size_t e = 0; e < eta_grid.size(); ++e) {
    ActivationBandRow row;
    row.eta = eta_grid[e];
    row.layers = in_band;
    for (long l : in_band) {
      const auto& r = per_layer[static_cast<std::size_t>(l)][e];
      row.mean_mso += r.mso;
      row.mean_baseline += r.baseline;
    }
    row.mean_mso /= static_cast<double>(in_band.size());
    row.mean_baseline /= static_cast<double>(in_band.size());
    report.band_rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace sspace
