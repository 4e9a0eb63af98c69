#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sspace {

/// Which transformer layers a projection or comparison touches.
struct LayerFilter {
  enum class Kind { All, Indices, Percentiles };
  Kind kind = Kind::All;
  std::vector<long> indices;
  std::vector<double> percentiles;

  static LayerFilter all() { return {}; }
  static LayerFilter of_indices(std::vector<long> idx) { return {Kind::Indices, std::move(idx), {}}; }
  static LayerFilter of_percentiles(std::vector<double> pct) { return {Kind::Percentiles, {}, std::move(pct)}; }
};

/// "all", "0,3,5" or "p70,85".
LayerFilter parse_layer_filter(std::string_view text);
std::string format_layer_filter(const LayerFilter& filter);

/// Layer number of a tensor named "...layers.<i>...."; nullopt for tensors
/// outside any numbered layer (embeddings, final norm, head).
std::optional<long> layer_index_of(std::string_view tensor_name);

/// Position round(p/100 * (L-1)) for a percentile over L layers.
long percentile_to_position(double percentile, long layer_count);

/// Tensor names selected by the filter. All selects every name. Other kinds
/// select only tensors in the chosen layers; throws when the filter names a
/// layer that does not exist or no tensor carries a layer number.
std::set<std::string> resolve_layers(const LayerFilter& filter, const std::vector<std::string>& tensor_names);

}  // namespace sspace
