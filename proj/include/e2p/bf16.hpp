#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

namespace e2p {

/// Nearest bfloat16 value (8 exponent bits, 7 mantissa bits), ties to even,
/// subnormals flushed to zero. Idempotent and monotone nondecreasing.
inline float bf16_round(float x) {
  uint32_t bits;
  std::memcpy(&bits, &x, 4);
  uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7FFFu + lsb;
  bits &= 0xFFFF0000u;
  if ((bits & 0x7F800000u) == 0) bits &= 0x80000000u;  // flush subnormals
  float out;
  std::memcpy(&out, &bits, 4);
  return out;
}

inline double bf16_round(double x) { return double(bf16_round(float(x))); }

/// bf16 lattice spacing in the binade containing |x|: with |x| = m 2^e,
/// m in [0.5, 1), consecutive values differ by 2^(e-8). Matches the
/// successor-minus-value oracle everywhere inside a binade.
inline float bf16_step_at(float x) {
  int e;
  std::frexp(std::fabs(x), &e);
  return std::ldexp(1.0f, e - 8);
}

/// Largest quantization step for d in (-1,1): exponent 126 gives
/// 2^(126-127) * 2^-7 = 2^-8 = 1/256.
inline double max_quant_step_unit_interval() { return 0x1.0p-8; }

}  // namespace e2p
