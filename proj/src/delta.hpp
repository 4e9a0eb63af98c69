#pragma once

#include <string_view>

#include "tensor_store.hpp"

namespace sspace {

/// A whole-model update stored as an f64 Checkpoint. Provenance is always set.
using DeltaModel = Checkpoint;

/// minuend - subtrahend per tensor, in f64. Name sets and per-name shapes must
/// agree; ids default to each parent's provenance tag.
DeltaModel compute_delta(const Checkpoint& minuend, const Checkpoint& subtrahend,
                         std::string_view minuend_id = {}, std::string_view subtrahend_id = {});

DeltaModel negate_delta(const DeltaModel& delta);

/// base + delta per tensor, rounded back into each base tensor's dtype.
Checkpoint apply_delta(const Checkpoint& base, const DeltaModel& delta);

/// Throws a Mismatch error naming missing/extra tensors or the first shape conflict.
void require_same_layout(const Checkpoint& a, const Checkpoint& b, std::string_view a_label,
                         std::string_view b_label);

}  // namespace sspace
