#include "dtype.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace sspace {

static_assert(std::endian::native == std::endian::little,
              "container payloads are read in place; big-endian hosts are unsupported");

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::BF16:
    case DType::F16: return 2;
  }
  return 0;
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::F64: return "F64";
    case DType::F32: return "F32";
    case DType::BF16: return "BF16";
    case DType::F16: return "F16";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view name) {
  if (name == "F64") return DType::F64;
  if (name == "F32") return DType::F32;
  if (name == "BF16") return DType::BF16;
  if (name == "F16") return DType::F16;
  return std::nullopt;
}

namespace {

// IEEE-style binary format with `exp_bits` exponent and `mant_bits` stored
// mantissa bits, at most 16 bits wide in total.
std::uint16_t encode_small(double value, int exp_bits, int mant_bits) {
  const std::uint16_t sign = std::signbit(value) ? std::uint16_t(1u << (exp_bits + mant_bits)) : 0;
  const std::uint16_t exp_all = std::uint16_t(((1u << exp_bits) - 1) << mant_bits);
  if (std::isnan(value)) return sign | exp_all | std::uint16_t(1u << (mant_bits - 1));
  const double mag = std::fabs(value);
  if (mag == 0.0) return sign;
  if (std::isinf(mag)) return sign | exp_all;

  const int bias = (1 << (exp_bits - 1)) - 1;
  const int min_normal_exp = 1 - bias;
  int e = 0;
  std::frexp(mag, &e);
  int exponent = e - 1;  // mag in [2^exponent, 2^(exponent+1))
  const bool subnormal = exponent < min_normal_exp;
  const int quantum_exp = (subnormal ? min_normal_exp : exponent) - mant_bits;
  // Scaling by a power of two is exact; nearbyint applies ties-to-even.
  double steps = std::nearbyint(std::ldexp(mag, -quantum_exp));
  const double implicit = std::ldexp(1.0, mant_bits);

  if (subnormal) {
    // steps == implicit rolls over into the smallest normal, which the bit layout encodes naturally.
    return sign | static_cast<std::uint16_t>(steps);
  }
  if (steps >= 2.0 * implicit) {
    steps = implicit;
    ++exponent;
  }
  if (exponent > bias) return sign | exp_all;
  const auto biased = static_cast<std::uint16_t>(exponent + bias);
  const auto fraction = static_cast<std::uint16_t>(steps - implicit);
  return sign | std::uint16_t(biased << mant_bits) | fraction;
}

double decode_small(std::uint16_t bits, int exp_bits, int mant_bits) {
  const bool negative = (bits >> (exp_bits + mant_bits)) & 1u;
  const unsigned exp_field = (bits >> mant_bits) & ((1u << exp_bits) - 1);
  const unsigned fraction = bits & ((1u << mant_bits) - 1);
  const int bias = (1 << (exp_bits - 1)) - 1;
  double mag = 0.0;
  if (exp_field == (1u << exp_bits) - 1) {
    mag = fraction ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  } else if (exp_field == 0) {
    mag = std::ldexp(static_cast<double>(fraction), 1 - bias - mant_bits);
  } else {
    mag = std::ldexp(static_cast<double>(fraction | (1u << mant_bits)),
                     static_cast<int>(exp_field) - bias - mant_bits);
  }
  return negative ? -mag : mag;
}

}  // namespace

std::uint16_t encode_bf16(double value) { return encode_small(value, 8, 7); }
std::uint16_t encode_f16(double value) { return encode_small(value, 5, 10); }
double decode_bf16(std::uint16_t bits) { return decode_small(bits, 8, 7); }
double decode_f16(std::uint16_t bits) { return decode_small(bits, 5, 10); }

double load_element(DType dtype, const std::byte* src) {
  switch (dtype) {
    case DType::F64: {
      double v;
      std::memcpy(&v, src, sizeof v);
      return v;
    }
    case DType::F32: {
      float v;
      std::memcpy(&v, src, sizeof v);
      return v;
    }
    case DType::BF16: {
      std::uint16_t v;
      std::memcpy(&v, src, sizeof v);
      return decode_bf16(v);
    }
    case DType::F16: {
      std::uint16_t v;
      std::memcpy(&v, src, sizeof v);
      return decode_f16(v);
    }
  }
  return 0.0;
}

void store_element(DType dtype, double value, std::byte* dst) {
  switch (dtype) {
    case DType::F64:
      std::memcpy(dst, &value, sizeof value);
      return;
    case DType::F32: {
      const auto v = static_cast<float>(value);
      std::memcpy(dst, &v, sizeof v);
      return;
    }
    case DType::BF16: {
      const auto v = encode_bf16(value);
      std::memcpy(dst, &v, sizeof v);
      return;
    }
    case DType::F16: {
      const auto v = encode_f16(value);
      std::memcpy(dst, &v, sizeof v);
      return;
    }
  }
}

}  // namespace sspace
