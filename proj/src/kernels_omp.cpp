#include <omp.h>

#include <limits>
#include <vector>

#include "kernels_detail.hpp"

namespace qlens::kernels::omp {

namespace {

using Index = std::ptrdiff_t;

// Below this many elements the fork/join overhead dominates.
constexpr std::size_t kParallelMin = 1 << 14;

template <class BlockFn>
double reduce_blocks(std::span<const float> x, BlockFn fn) {
  const std::size_t nb = detail::block_count(x.size());
  std::vector<double> partial(nb);
#pragma omp parallel for schedule(static) if (x.size() >= kParallelMin)
  for (Index b = 0; b < static_cast<Index>(nb); ++b) partial[b] = fn(detail::block(x, b));
  double acc = 0;
  for (double p : partial) acc += p;
  return acc;
}

}  // namespace

Range range(std::span<const float> x) {
  float lo = x[0], hi = x[0];
#pragma omp parallel for reduction(min : lo) reduction(max : hi) if (x.size() >= kParallelMin)
  for (Index i = 0; i < static_cast<Index>(x.size()); ++i) {
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
  }
  return {lo, hi, std::max(std::abs(lo), std::abs(hi))};
}

double sum(std::span<const float> x) { return reduce_blocks(x, detail::block_sum); }

double sum_sq(std::span<const float> x) { return reduce_blocks(x, detail::block_sum_sq); }

void central_moments(std::span<const float> x, double center, double& m2, double& m4) {
  const std::size_t nb = detail::block_count(x.size());
  std::vector<double> p2(nb), p4(nb);
#pragma omp parallel for schedule(static) if (x.size() >= kParallelMin)
  for (Index b = 0; b < static_cast<Index>(nb); ++b)
    detail::block_central(detail::block(x, b), center, p2[b], p4[b]);
  m2 = 0;
  m4 = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    m2 += p2[b];
    m4 += p4[b];
  }
}

void group_range(std::span<const float> x, const GroupLayout& layout, std::span<float> gmin,
                 std::span<float> gmax) {
  constexpr float inf = std::numeric_limits<float>::infinity();
  std::fill(gmin.begin(), gmin.end(), inf);
  std::fill(gmax.begin(), gmax.end(), -inf);
  const Index rows = static_cast<Index>(layout.outer * layout.axis);
  const std::size_t groups = layout.group_count();
  // min/max are exact in any order, so thread-private partials merge deterministically
#pragma omp parallel if (x.size() >= kParallelMin)
  {
    std::vector<float> lmin(groups, inf), lmax(groups, -inf);
#pragma omp for schedule(static)
    for (Index r = 0; r < rows; ++r) {
      const std::size_t o = r / layout.axis, a = r % layout.axis;
      detail::fold_row(x.data() + r * layout.inner, layout.inner, layout.row_group(o, a),
                       layout.inner_stride(), lmin.data(), lmax.data());
    }
#pragma omp critical
    for (std::size_t g = 0; g < groups; ++g) {
      gmin[g] = std::min(gmin[g], lmin[g]);
      gmax[g] = std::max(gmax[g], lmax[g]);
    }
  }
}

std::size_t quantize(std::span<const float> x, const GroupLayout& layout,
                     const QuantParams& params, std::span<std::uint8_t> codes) {
  const Index rows = static_cast<Index>(layout.outer * layout.axis);
  std::size_t clipped = 0;
#pragma omp parallel for schedule(static) reduction(+ : clipped) if (x.size() >= kParallelMin)
  for (Index r = 0; r < rows; ++r) {
    const std::size_t o = r / layout.axis, a = r % layout.axis;
    const std::size_t off = r * layout.inner;
    clipped += detail::quantize_row(x.data() + off, layout.inner, layout.row_group(o, a),
                                    layout.inner_stride(), params, codes.data() + off);
  }
  return clipped;
}

void dequantize(std::span<const std::uint8_t> codes, const GroupLayout& layout,
                const QuantParams& params, std::span<float> out) {
  const Index rows = static_cast<Index>(layout.outer * layout.axis);
#pragma omp parallel for schedule(static) if (codes.size() >= kParallelMin)
  for (Index r = 0; r < rows; ++r) {
    const std::size_t o = r / layout.axis, a = r % layout.axis;
    const std::size_t off = r * layout.inner;
    detail::dequantize_row(codes.data() + off, layout.inner, layout.row_group(o, a),
                           layout.inner_stride(), params, out.data() + off);
  }
}

void signed_power(std::span<const float> x, double p, std::span<float> out) {
#pragma omp parallel for schedule(static) if (x.size() >= kParallelMin)
  for (Index i = 0; i < static_cast<Index>(x.size()); ++i)
    out[i] = detail::signed_power_one(x[i], p);
}

void sub(std::span<const float> a, std::span<const float> b, std::span<float> out) {
#pragma omp parallel for schedule(static) if (a.size() >= kParallelMin)
  for (Index i = 0; i < static_cast<Index>(a.size()); ++i) out[i] = a[i] - b[i];
}

void add(std::span<const float> a, std::span<const float> b, std::span<float> out) {
#pragma omp parallel for schedule(static) if (a.size() >= kParallelMin)
  for (Index i = 0; i < static_cast<Index>(a.size()); ++i) out[i] = a[i] + b[i];
}

void axpby(double alpha, std::span<const float> x, double beta, std::span<float> y) {
#pragma omp parallel for schedule(static) if (x.size() >= kParallelMin)
  for (Index i = 0; i < static_cast<Index>(x.size()); ++i)
    y[i] = static_cast<float>(alpha * x[i] + beta * y[i]);
}

template <class Real>
void matmul(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate) {
  const bool par = m * k * n >= kParallelMin * 8;
#pragma omp parallel for schedule(static) if (par)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    Real* c_row = c + i * n;
    if (!accumulate) std::fill(c_row, c_row + n, Real(0));
    detail::matmul_row(a + i * k, b, c_row, k, n);
  }
}

template <class Real>
void matmul_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  const bool par = m * k * n >= kParallelMin * 8;
#pragma omp parallel for schedule(static) if (par)
  for (Index p = 0; p < static_cast<Index>(k); ++p) {
    Real* c_row = c + p * n;
    if (!accumulate) std::fill(c_row, c_row + n, Real(0));
    detail::matmul_tn_row(a, b, c_row, p, m, k, n);
  }
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

}  // namespace qlens::kernels::omp
