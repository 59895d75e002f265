#pragma once

// Loop bodies shared by the serial and OpenMP kernels so that both variants
// perform the same arithmetic in the same order.

#include <algorithm>
#include <cmath>
#include <cstring>

#include "qlens/kernels.hpp"

namespace qlens::kernels::detail {

inline std::size_t block_count(std::size_t n) { return (n + kReduceBlock - 1) / kReduceBlock; }

inline std::span<const float> block(std::span<const float> x, std::size_t b) {
  const std::size_t lo = b * kReduceBlock;
  return x.subspan(lo, std::min(kReduceBlock, x.size() - lo));
}

inline double block_sum(std::span<const float> x) {
  double acc = 0;
  for (float v : x) acc += v;
  return acc;
}

inline double block_sum_sq(std::span<const float> x) {
  double acc = 0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc;
}

inline void block_central(std::span<const float> x, double c, double& m2, double& m4) {
  double a2 = 0, a4 = 0;
  for (float v : x) {
    const double d = v - c;
    const double d2 = d * d;
    a2 += d2;
    a4 += d2 * d2;
  }
  m2 = a2;
  m4 = a4;
}

inline Range range_of(std::span<const float> x) {
  Range r{x[0], x[0], 0};
  for (float v : x) {
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
  r.absmax = std::max(std::abs(r.min), std::abs(r.max));
  return r;
}

/// Min/max of row (o, a) folded into per-group accumulators.
inline void fold_row(const float* row, std::size_t inner, std::size_t g0, std::size_t stride,
                     float* gmin, float* gmax) {
  for (std::size_t i = 0; i < inner; ++i) {
    const std::size_t g = g0 + i * stride;
    gmin[g] = std::min(gmin[g], row[i]);
    gmax[g] = std::max(gmax[g], row[i]);
  }
}

inline std::size_t quantize_row(const float* x, std::size_t inner, std::size_t g0,
                                std::size_t stride, const QuantParams& p, std::uint8_t* codes) {
  const double qmax = static_cast<double>((1u << p.bits) - 1u);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < inner; ++i) {
    const std::size_t g = g0 + i * stride;
    double q = std::nearbyint(static_cast<double>(x[i]) / static_cast<double>(p.scale[g])) +
               static_cast<double>(p.zero[g]);
    if (q < 0.0) {
      q = 0.0;
      ++clipped;
    } else if (q > qmax) {
      q = qmax;
      ++clipped;
    }
    codes[i] = static_cast<std::uint8_t>(q);
  }
  return clipped;
}

inline void dequantize_row(const std::uint8_t* codes, std::size_t inner, std::size_t g0,
                           std::size_t stride, const QuantParams& p, float* out) {
  for (std::size_t i = 0; i < inner; ++i) {
    const std::size_t g = g0 + i * stride;
    const double v = (static_cast<double>(codes[i]) - static_cast<double>(p.zero[g])) *
                     static_cast<double>(p.scale[g]);
    out[i] = static_cast<float>(v);
  }
}

inline float signed_power_one(float x, double p) {
  const double ax = std::abs(static_cast<double>(x));
  double y;
  if (p == 1.0) {
    y = ax;
  } else if (p == 1.0 / 3.0) {
    y = std::cbrt(ax);
  } else if (p == 3.0) {
    y = ax * ax * ax;
  } else {
    y = std::pow(ax, p);
  }
  return static_cast<float>(std::copysign(y, static_cast<double>(x)));
}

template <class Real>
inline void matmul_row(const Real* a_row, const Real* b, Real* c_row, std::size_t k,
                       std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const Real av = a_row[p];
    const Real* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

template <class Real>
inline void matmul_tn_row(const Real* a, const Real* b, Real* c_row, std::size_t p,
                          std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real av = a[i * k + p];
    if (av == Real(0)) continue;
    const Real* b_row = b + i * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

template <class Real>
inline void transpose(const Real* src, Real* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace qlens::kernels::detail
