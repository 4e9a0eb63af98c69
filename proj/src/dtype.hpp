#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sspace {

enum class DType { F64, F32, BF16, F16 };

std::size_t dtype_size(DType dtype);
std::string_view dtype_name(DType dtype);  // container spelling: "F64", "BF16", ...
std::optional<DType> parse_dtype(std::string_view name);

// Half-width codecs. Encoding rounds to nearest, ties to even, straight from
// double so no intermediate float rounding is involved.
std::uint16_t encode_bf16(double value);
std::uint16_t encode_f16(double value);
double decode_bf16(std::uint16_t bits);
double decode_f16(std::uint16_t bits);

/// Reads one little-endian element of `dtype` at `src` and widens it to double.
double load_element(DType dtype, const std::byte* src);
/// Rounds `value` into `dtype` and stores it little-endian at `dst`.
void store_element(DType dtype, double value, std::byte* dst);

}  // namespace sspace
