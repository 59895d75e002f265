#pragma once

// Data-parallel inner loops. `serial` is the reference implementation kept
// for testing; `omp` is the OpenMP version used by the library. Elementwise
// kernels and min/max reductions agree bitwise. Sum reductions accumulate in
// double over fixed blocks of kReduceBlock elements and then add the block
// partials in order, so both variants (and any thread count) give the same
// bits. Matmuls parallelize over output rows only and are also bitwise equal.

#include <cstddef>
#include <cstdint>
#include <span>

namespace qlens::kernels {

inline constexpr std::size_t kReduceBlock = 4096;

enum class GroupMode { kTensor, kChannel, kGroup };

/// A tensor viewed as [outer, axis, inner]. Channel mode groups by the axis
/// index; group mode groups `group_size` consecutive axis entries for a fixed
/// (outer, inner) position.
struct GroupLayout {
  std::size_t outer = 1;
  std::size_t axis = 1;
  std::size_t inner = 1;
  GroupMode mode = GroupMode::kTensor;
  std::size_t group_size = 1;

  std::size_t size() const noexcept { return outer * axis * inner; }
  std::size_t group_count() const noexcept {
    switch (mode) {
      case GroupMode::kTensor: return 1;
      case GroupMode::kChannel: return axis;
      case GroupMode::kGroup: return outer * (axis / group_size) * inner;
    }
    return 1;
  }
  /// Group of the row (o, a); inner index i is added only in group mode.
  std::size_t row_group(std::size_t o, std::size_t a) const noexcept {
    switch (mode) {
      case GroupMode::kTensor: return 0;
      case GroupMode::kChannel: return a;
      case GroupMode::kGroup: return (o * (axis / group_size) + a / group_size) * inner;
    }
    return 0;
  }
  std::size_t inner_stride() const noexcept { return mode == GroupMode::kGroup ? 1 : 0; }
  std::size_t group_of(std::size_t flat) const noexcept {
    const std::size_t i = flat % inner;
    const std::size_t row = flat / inner;
    return row_group(row / axis, row % axis) + i * inner_stride();
  }
};

struct Range {
  float min = 0;
  float max = 0;
  float absmax = 0;
};

struct QuantParams {
  std::span<const float> scale;
  std::span<const std::uint16_t> zero;
  int bits = 8;
};

#define QLENS_KERNEL_DECLS                                                                       \
  Range range(std::span<const float> x);                                                         \
  double sum(std::span<const float> x);                                                          \
  double sum_sq(std::span<const float> x);                                                       \
  /* returns {sum (x-c)^2, sum (x-c)^4} */                                                       \
  void central_moments(std::span<const float> x, double center, double& m2, double& m4);         \
  void group_range(std::span<const float> x, const GroupLayout& layout, std::span<float> gmin,   \
                   std::span<float> gmax);                                                       \
  /* writes clip(nearbyint(x / s) + z, 0, 2^b - 1); returns the number of clipped elements */  \
  std::size_t quantize(std::span<const float> x, const GroupLayout& layout,                     \
                       const QuantParams& params, std::span<std::uint8_t> codes);               \
  void dequantize(std::span<const std::uint8_t> codes, const GroupLayout& layout,               \
                  const QuantParams& params, std::span<float> out);                             \
  /* sign(x) |x|^p */                                                                            \
  void signed_power(std::span<const float> x, double p, std::span<float> out);                  \
  void sub(std::span<const float> a, std::span<const float> b, std::span<float> out);           \
  void add(std::span<const float> a, std::span<const float> b, std::span<float> out);           \
  void axpby(double alpha, std::span<const float> x, double beta, std::span<float> y);          \
  /* C[m,n] (+)= A[m,k] B[k,n] */                                                                \
  template <class Real>                                                                          \
  void matmul(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,              \
              std::size_t n, bool accumulate);                                                   \
  /* C[k,n] (+)= A[m,k]^T B[m,n] */                                                              \
  template <class Real>                                                                          \
  void matmul_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,           \
                 std::size_t n, bool accumulate);                                                \
  /* C[m,k] (+)= A[m,n] B[k,n]^T */                                                              \
  template <class Real>                                                                          \
  void matmul_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t n,           \
                 std::size_t k, bool accumulate);

namespace serial {
QLENS_KERNEL_DECLS
}  // namespace serial

namespace omp {
QLENS_KERNEL_DECLS
}  // namespace omp

#undef QLENS_KERNEL_DECLS

}  // namespace qlens::kernels
