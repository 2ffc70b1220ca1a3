#include "uvsim/qarith.hpp"

#include <cfenv>
#include <cmath>
#include <string>

#include "uvsim/errors.hpp"

namespace uvsim {

namespace {

// Round-to-nearest-even of a finite double. std::nearbyint honors the
// current rounding mode, which is FE_TONEAREST (ties-to-even) by default;
// the simulator never changes it.
double round_half_even(double x) { return std::nearbyint(x); }

int8_t clamp_i8(double rounded, double lo, double hi) {
  if (rounded < lo) rounded = lo;
  if (rounded > hi) rounded = hi;
  return static_cast<int8_t>(rounded);
}

}  // namespace

QTensor QTensor::zeros(int rows, int cols, double scale) {
  if (rows < 0 || cols < 0) throw config_error("QTensor: negative shape");
  if (!(scale > 0.0)) throw config_error("QTensor: scale must be positive");
  QTensor q;
  q.rows = rows;
  q.cols = cols;
  q.scale = scale;
  q.data.assign(static_cast<size_t>(rows) * static_cast<size_t>(cols), 0);
  return q;
}

QTensor quantize(const std::vector<double>& x, int rows, int cols, double scale) {
  if (!(scale > 0.0)) throw config_error("quantize: scale must be positive");
  if (rows < 0 || cols < 0) throw config_error("quantize: negative shape");
  if (x.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols))
    throw data_error("quantize: data length " + std::to_string(x.size()) +
                     " does not match shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  QTensor q = QTensor::zeros(rows, cols, scale);
  for (size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw data_error("quantize: non-finite value at flat index " +
                       std::to_string(i));
    q.data[i] = clamp_i8(round_half_even(x[i] / scale), -128.0, 127.0);
  }
  return q;
}

std::vector<double> dequantize(const QTensor& q) {
  std::vector<double> out(q.data.size());
  for (size_t i = 0; i < q.data.size(); ++i)
    out[i] = static_cast<double>(q.data[i]) * q.scale;
  return out;
}

int8_t relu_requantize(Acc24 acc, double out_scale, double acc_scale) {
  if (!(out_scale > 0.0) || !(acc_scale > 0.0))
    throw config_error("relu_requantize: scales must be positive");
  int32_t v = acc.value > 0 ? acc.value : 0;
  double rescaled = static_cast<double>(v) * acc_scale / out_scale;
  return clamp_i8(round_half_even(rescaled), 0.0, 127.0);
}

}  // namespace uvsim
