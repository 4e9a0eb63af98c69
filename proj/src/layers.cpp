#include "layers.hpp"

#include <charconv>
#include <cmath>

#include "error.hpp"

namespace sspace {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

LayerFilter parse_layer_filter(std::string_view text) {
  if (text.empty() || text == "all") return LayerFilter::all();
  if (text.front() == 'p') {
    std::vector<double> pct;
    for (auto item : split(text.substr(1), ',')) {
      auto v = parse_number<double>(item);
      if (!v || *v < 0.0 || *v > 100.0)
        throw Error(ErrorKind::Usage, "bad layer percentile '" + std::string(item) + "' (expected 0..100)");
      pct.push_back(*v);
    }
    return LayerFilter::of_percentiles(std::move(pct));
  }
  std::vector<long> idx;
  for (auto item : split(text, ',')) {
    auto v = parse_number<long>(item);
    if (!v || *v < 0) throw Error(ErrorKind::Usage, "bad layer index '" + std::string(item) + "'");
    idx.push_back(*v);
  }
  return LayerFilter::of_indices(std::move(idx));
}

std::string format_layer_filter(const LayerFilter& filter) {
  std::string out;
  switch (filter.kind) {
    case LayerFilter::Kind::All: return "all";
    case LayerFilter::Kind::Indices:
      for (auto i : filter.indices) out += (out.empty() ? "" : ",") + std::to_string(i);
      return out;
    case LayerFilter::Kind::Percentiles:
      out = "p";
      for (std::size_t i = 0; i < filter.percentiles.size(); ++i) {
        char buf[32];
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, filter.percentiles[i]);
        out += (i ? "," : "") + std::string(buf, end);
      }
      return out;
  }
  return out;
}

std::optional<long> layer_index_of(std::string_view tensor_name) {
  const auto parts = split(tensor_name, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (parts[i] != "layers") continue;
    for (std::size_t j = i + 1; j < parts.size(); ++j)
      if (auto v = parse_number<long>(parts[j]); v && *v >= 0) return v;
  }
  return std::nullopt;
}

long percentile_to_position(double percentile, long layer_count) {
  return std::lround(percentile / 100.0 * static_cast<double>(layer_count - 1));
}

std::set<std::string> resolve_layers(const LayerFilter& filter, const std::vector<std::string>& tensor_names) {
  if (filter.kind == LayerFilter::Kind::All) return {tensor_names.begin(), tensor_names.end()};

  std::set<long> present;
  for (const auto& name : tensor_names)
    if (auto l = layer_index_of(name)) present.insert(*l);
  if (present.empty())
    throw Error(ErrorKind::Usage, "layer filter requested but no tensor name follows the 'layers.<i>.' convention");
  const std::vector<long> ordered(present.begin(), present.end());
  const long count = static_cast<long>(ordered.size());

  std::set<long> chosen;
  if (filter.kind == LayerFilter::Kind::Indices) {
    for (auto i : filter.indices) {
      if (i >= count || !present.count(i))
        throw Error(ErrorKind::Usage, "layer index " + std::to_string(i) + " out of range (model has " +
                                          std::to_string(count) + " layers)");
      chosen.insert(i);
    }
  } else {
    for (auto p : filter.percentiles) chosen.insert(ordered[static_cast<std::size_t>(percentile_to_position(p, count))]);
  }

  std::set<std::string> out;
  for (const auto& name : tensor_names)
    if (auto l = layer_index_of(name); l && chosen.count(*l)) out.insert(name);
  return out;
}

}  // namespace sspace
