#include <limits>
#include <vector>

#include "kernels_detail.hpp"

namespace qlens::kernels::serial {

Range range(std::span<const float> x) { return detail::range_of(x); }

double sum(std::span<const float> x) {
  double acc = 0;
  for (std::size_t b = 0; b < detail::block_count(x.size()); ++b)
    acc += detail::block_sum(detail::block(x, b));
  return acc;
}

double sum_sq(std::span<const float> x) {
  double acc = 0;
  for (std::size_t b = 0; b < detail::block_count(x.size()); ++b)
    acc += detail::block_sum_sq(detail::block(x, b));
  return acc;
}

void central_moments(std::span<const float> x, double center, double& m2, double& m4) {
  m2 = 0;
  m4 = 0;
  for (std::size_t b = 0; b < detail::block_count(x.size()); ++b) {
    double b2, b4;
    detail::block_central(detail::block(x, b), center, b2, b4);
    m2 += b2;
    m4 += b4;
  }
}

void group_range(std::span<const float> x, const GroupLayout& layout, std::span<float> gmin,
                 std::span<float> gmax) {
  std::fill(gmin.begin(), gmin.end(), std::numeric_limits<float>::infinity());
  std::fill(gmax.begin(), gmax.end(), -std::numeric_limits<float>::infinity());
  for (std::size_t o = 0; o < layout.outer; ++o)
    for (std::size_t a = 0; a < layout.axis; ++a)
      detail::fold_row(x.data() + (o * layout.axis + a) * layout.inner, layout.inner,
                       layout.row_group(o, a), layout.inner_stride(), gmin.data(), gmax.data());
}

std::size_t quantize(std::span<const float> x, const GroupLayout& layout,
                     const QuantParams& params, std::span<std::uint8_t> codes) {
  std::size_t clipped = 0;
  for (std::size_t o = 0; o < layout.outer; ++o)
    for (std::size_t a = 0; a < layout.axis; ++a) {
      const std::size_t off = (o * layout.axis + a) * layout.inner;
      clipped += detail::quantize_row(x.data() + off, layout.inner, layout.row_group(o, a),
                                      layout.inner_stride(), params, codes.data() + off);
    }
  return clipped;
}

void dequantize(std::span<const std::uint8_t> codes, const GroupLayout& layout,
                const QuantParams& params, std::span<float> out) {
  for (std::size_t o = 0; o < layout.outer; ++o)
    for (std::size_t a = 0; a < layout.axis; ++a) {
      const std::size_t off = (o * layout.axis + a) * layout.inner;
      detail::dequantize_row(codes.data() + off, layout.inner, layout.row_group(o, a),
                             layout.inner_stride(), params, out.data() + off);
    }
}

void signed_power(std::span<const float> x, double p, std::span<float> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = detail::signed_power_one(x[i], p);
}

void sub(std::span<const float> a, std::span<const float> b, std::span<float> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
}

void add(std::span<const float> a, std::span<const float> b, std::span<float> out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
}

void axpby(double alpha, std::span<const float> x, double beta, std::span<float> y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = static_cast<float>(alpha * x[i] + beta * y[i]);
}

template <class Real>
void matmul(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, Real(0));
  for (std::size_t i = 0; i < m; ++i) detail::matmul_row(a + i * k, b, c + i * n, k, n);
}

template <class Real>
void matmul_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + k * n, Real(0));
  for (std::size_t p = 0; p < k; ++p) detail::matmul_tn_row(a, b, c + p * n, p, m, k, n);
}

template <class Real>
void matmul_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
  std::vector<Real> bt(n * k);
  detail::transpose(b, bt.data(), k, n);
  matmul(a, bt.data(), c, m, n, k, accumulate);
}

template void matmul<float>(const float*, const float*, float*, std::size_t, std::size_t,
                            std::size_t, bool);
template void matmul<double>(const double*, const double*, double*, std::size_t, std::size_t,
                             std::size_t, bool);
template void matmul_tn<float>(const float*, const float*, float*, std::size_t, std::size_t,
                               std::size_t, bool);
template void matmul_tn<double>(const double*, const double*, double*, std::size_t, std::size_t,
                                std::size_t, bool);
template void matmul_nt<float>(const float*, const float*, float*, std::size_t, std::size_t,
                               std::size_t, bool);
template void matmul_nt<double>(const double*, const double*, double*, std::size_t, std::size_t,
                                std::size_t, bool);

}  // namespace qlens::kernels::serial
