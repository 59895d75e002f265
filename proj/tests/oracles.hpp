#pragma once

// Reference computations written independently of the library: long double,
// plain loops, no shared helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

struct Stats {
  long double mean = 0, std = 0, min = 0, max = 0, absmax = 0, l2 = 0;
};

inline Stats stats(std::span<const float> x) {
  Stats s;
  long double sum = 0, sq = 0;
  s.min = s.max = x[0];
  for (float v : x) {
    sum += v;
    sq += static_cast<long double>(v) * v;
    s.min = std::min<long double>(s.min, v);
    s.max = std::max<long double>(s.max, v);
  }
  s.mean = sum / x.size();
  long double var = 0;
  for (float v : x) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / x.size());
  s.absmax = std::max(std::fabs(s.min), std::fabs(s.max));
  s.l2 = std::sqrt(sq);
  return s;
}

/// Round half to even on a long double.
inline long double rne(long double v) {
  long double f = std::floor(v);
  long double diff = v - f;
  if (diff > 0.5L) return f + 1;
  if (diff < 0.5L) return f;
  return std::fmod(f, 2.0L) == 0 ? f : f + 1;
}

/// Symmetric absmax fake-quant of one group given explicit values.
struct SymResult {
  std::vector<int> codes;
  std::vector<long double> recon;
  long double step = 1;
  std::vector<bool> clipped;
};

inline SymResult symmetric_absmax(const std::vector<long double>& x, int bits) {
  SymResult r;
  long double amax = 0;
  for (auto v : x) amax = std::max(amax, std::fabs(v));
  const long double half = std::ldexp(1.0L, bits - 1);
  const int top = (1 << bits) - 1;
  r.step = amax == 0 ? 1.0L : amax / half;
  for (auto v : x) {
    long double c = rne(v / r.step) + half;
    bool clip = c < 0 || c > top;
    c = std::clamp<long double>(c, 0, top);
    r.codes.push_back(static_cast<int>(c));
    r.clipped.push_back(clip);
    r.recon.push_back((c - half) * r.step);
  }
  return r;
}

inline long double signed_power(long double x, long double p) {
  if (x == 0) return 0;
  return std::copysign(std::pow(std::fabs(x), p), x);
}

/// Average ranks (1-based) with ties sharing the mean rank.
inline std::vector<long double> ranks(std::span<const float> a) {
  const std::size_t n = a.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return a[i] < a[j]; });
  std::vector<long double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && a[idx[j + 1]] == a[idx[i]]) ++j;
    long double avg = (i + j) / 2.0L + 1;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Pearson correlation of the rank vectors.
inline long double spearman(std::span<const float> a, std::span<const float> b) {
  auto ra = ranks(a), rb = ranks(b);
  const long double n = ra.size();
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i], mb += rb[i];
  ma /= n, mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// KL(softmax(p) || softmax(q)) by direct summation, averaged over rows.
inline long double kl_rows(std::span<const float> p, std::span<const float> q, std::size_t width) {
  long double total = 0;
  const std::size_t rows = p.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    long double zp = 0, zq = 0;
    for (std::size_t i = 0; i < width; ++i) {
      zp += std::exp(static_cast<long double>(p[r * width + i]));
      zq += std::exp(static_cast<long double>(q[r * width + i]));
    }
    for (std::size_t i = 0; i < width; ++i) {
      long double pi = std::exp(static_cast<long double>(p[r * width + i])) / zp;
      long double qi = std::exp(static_cast<long double>(q[r * width + i])) / zq;
      total += pi * std::log(pi / qi);
    }
  }
  return total / rows;
}

/// Two-sided standard normal tail P(|Z| > k).
inline double normal_two_sided_tail(double k) { return std::erfc(k / std::sqrt(2.0)); }

/// C = A[m,k] B[k,n] in long double.
inline std::vector<long double> matmul(std::span<const float> a, std::span<const float> b, std::size_t m,
                                       std::size_t k, std::size_t n) {
  std::vector<long double> c(m * n, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += static_cast<long double>(a[i * k + p]) * b[p * n + j];
  return c;
}

}  // namespace oracle
