// qarith.hpp: int8 symmetric quantization and the 24-bit MAC arithmetic
// performed by every simulated processing element.
//
// The accumulator is a 24-bit two's-complement register and wraps on
// overflow rather than saturating: timing-error injection splices raw
// register bits, so the datapath must behave like the hardware register it
// models. All functions here are pure.
#pragma once

#include <cstdint>
#include <vector>

namespace uvsim {

// Quantized 2-D tensor, row-major. real_value = data[r*cols + c] * scale.
// Symmetric quantization: zero real value is exactly integer zero.
struct QTensor {
  std::vector<int8_t> data;
  int rows = 0;
  int cols = 0;
  double scale = 1.0;

  static QTensor zeros(int rows, int cols, double scale);

  int8_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  int8_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
};

// 24-bit two's-complement accumulator. `value` always lies in
// [-2^23, 2^23 - 1]; constructors and arithmetic maintain this.
struct Acc24 {
  int32_t value = 0;

  friend bool operator==(Acc24, Acc24) = default;
};

inline constexpr int32_t kAccMin = -(1 << 23);
inline constexpr int32_t kAccMax = (1 << 23) - 1;

// Reduces an arbitrary integer into 24-bit two's complement.
constexpr int32_t wrap24(int64_t x) {
  uint32_t u = static_cast<uint32_t>(x) & 0xFFFFFFu;
  return (u & 0x800000u) ? static_cast<int32_t>(u) - (1 << 24)
                         : static_cast<int32_t>(u);
}

// Raw register view of the accumulator: low 24 bits, bit 23 = sign.
constexpr uint32_t acc_bits(Acc24 acc) {
  return static_cast<uint32_t>(acc.value) & 0xFFFFFFu;
}

constexpr Acc24 acc_from_bits(uint32_t bits) {
  return Acc24{wrap24(static_cast<int64_t>(bits & 0xFFFFFFu))};
}

// One multiply-accumulate: acc + w*a, wrapped to 24 bits.
constexpr Acc24 mac_step(Acc24 acc, int8_t w, int8_t a) {
  return Acc24{wrap24(static_cast<int64_t>(acc.value) +
                      static_cast<int64_t>(w) * static_cast<int64_t>(a))};
}

// Elementwise x/scale with round-to-nearest-even, clamped to [-128, 127].
// Throws data_error on non-finite input, config_error on scale <= 0.
QTensor quantize(const std::vector<double>& x, int rows, int cols, double scale);

// Inverse of quantize up to rounding: data * scale.
std::vector<double> dequantize(const QTensor& q);

// ReLU then requantize: round-to-nearest-even of
// max(acc,0)*acc_scale/out_scale, clamped to [0, 127].
// Throws config_error on non-positive scales.
int8_t relu_requantize(Acc24 acc, double out_scale, double acc_scale);

}  // namespace uvsim
