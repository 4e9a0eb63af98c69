#include "delta.hpp"

#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"

namespace sspace {

namespace {

std::string label_of(const Checkpoint& ckpt, std::string_view explicit_id) {
  if (!explicit_id.empty()) return std::string(explicit_id);
  auto tag = ckpt.provenance();
  return tag.empty() ? std::string("unnamed") : tag;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

// Elementwise combine of two same-layout checkpoints; out_dtype picks the
// storage dtype from the (left, right) tensor pair.
template <class Op, class DTypeFor>
Checkpoint combine(const Checkpoint& left, const Checkpoint& right, Op op, DTypeFor dtype_for) {
  const auto names = left.names();
  std::vector<std::optional<NamedTensor>> out(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    const NamedTensor& a = left.at(names[i]);
    const NamedTensor& b = right.at(names[i]);
    std::vector<double> values(a.numel());
    for (std::size_t j = 0; j < values.size(); ++j) values[j] = op(a.at(j), b.at(j));
    out[i] = NamedTensor::from_values(names[i], dtype_for(a, b), a.shape(), values);
  });
  Checkpoint result;
  for (auto& t : out) result.add(std::move(*t));
  return result;
}

}  // namespace

void require_same_layout(const Checkpoint& a, const Checkpoint& b, std::string_view a_label,
                         std::string_view b_label) {
  std::vector<std::string> missing_from_a, missing_from_b;
  for (const auto& [name, _] : b)
    if (!a.contains(name)) missing_from_a.push_back(name);
  for (const auto& [name, _] : a)
    if (!b.contains(name)) missing_from_b.push_back(name);
  if (!missing_from_a.empty() || !missing_from_b.empty()) {
    std::string msg = "tensor name sets differ";
    if (!missing_from_a.empty()) msg += "; missing from " + std::string(a_label) + ": " + join(missing_from_a);
    if (!missing_from_b.empty()) msg += "; missing from " + std::string(b_label) + ": " + join(missing_from_b);
    throw Error(ErrorKind::Mismatch, msg);
  }
  for (const auto& [name, ta] : a) {
    if (ta.shape() != b.at(name).shape())
      throw Error(ErrorKind::Mismatch, "shape mismatch for tensor '" + name + "' between " +
                                           std::string(a_label) + " and " + std::string(b_label));
  }
}

DeltaModel compute_delta(const Checkpoint& minuend, const Checkpoint& subtrahend,
                         std::string_view minuend_id, std::string_view subtrahend_id) {
  require_same_layout(minuend, subtrahend, "minuend", "subtrahend");
  auto delta = combine(
      minuend, subtrahend, [](double x, double y) { return x - y; },
      [](const NamedTensor&, const NamedTensor&) { return DType::F64; });
  delta.set_provenance("delta(" + label_of(minuend, minuend_id) + "," + label_of(subtrahend, subtrahend_id) + ")");
  return delta;
}

DeltaModel negate_delta(const DeltaModel& delta) {
  Checkpoint out;
  for (const auto& [name, t] : delta) {
    auto values = t.to_f64();
    for (auto& v : values) v = -v;
    out.add(NamedTensor::from_values(name, DType::F64, t.shape(), values));
  }
  const auto tag = label_of(delta, {});
  const bool negated = tag.starts_with("neg(") && tag.ends_with(")");
  out.set_provenance(negated ? tag.substr(4, tag.size() - 5) : "neg(" + tag + ")");
  return out;
}

Checkpoint apply_delta(const Checkpoint& base, const DeltaModel& delta) {
  require_same_layout(base, delta, "base", "delta");
  auto out = combine(
      base, delta, [](double x, double y) { return x + y; },
      [](const NamedTensor& a, const NamedTensor&) { return a.dtype(); });
  out.set_provenance("apply(" + label_of(base, {}) + "," + label_of(delta, {}) + ")");
  return out;
}

}  // namespace sspace
