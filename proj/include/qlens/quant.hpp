#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qlens/kernels.hpp"
#include "qlens/tensor.hpp"

namespace qlens {

// Scale policies. Symmetric policies use step alpha / 2^(b-1) with zero-point
// 2^(b-1), so alpha covers the full signed range [-alpha, alpha).
struct AbsmaxSymmetric {
  bool operator==(const AbsmaxSymmetric&) const = default;
};
/// Range [min(x, 0), max(x, 0)] mapped onto [0, 2^b - 1].
struct MinMaxAsymmetric {
  bool operator==(const MinMaxAsymmetric&) const = default;
};
struct FixedScale {
  double alpha = 1.0;
  bool operator==(const FixedScale&) const = default;
};
using ScalePolicy = std::variant<AbsmaxSymmetric, MinMaxAsymmetric, FixedScale>;

struct PerTensor {
  bool operator==(const PerTensor&) const = default;
};
/// One scale per index along `axis`.
struct PerChannel {
  std::size_t axis = 0;
  bool operator==(const PerChannel&) const = default;
};
/// One scale per run of `group_size` consecutive entries along `axis`; the
/// extent along `axis` must be a multiple of `group_size`.
struct PerGroup {
  std::size_t axis = 0;
  std::size_t group_size = 32;
  bool operator==(const PerGroup&) const = default;
};
using Granularity = std::variant<PerTensor, PerChannel, PerGroup>;

struct Identity {
  bool operator==(const Identity&) const = default;
};
/// y = sign(x) |x|^p, inverted after dequantization. The scale policy is
/// evaluated on the transformed values.
struct SignedPower {
  double exponent = 1.0 / 3.0;
  bool operator==(const SignedPower&) const = default;
};
using Transform = std::variant<Identity, SignedPower>;

struct QuantScheme {
  int bits = 8;
  ScalePolicy policy = AbsmaxSymmetric{};
  Granularity granularity = PerTensor{};
  Transform transform = Identity{};

  bool operator==(const QuantScheme&) const = default;
};

void validate(const QuantScheme& scheme);
/// Also checks the granularity against a concrete shape.
void validate(const QuantScheme& scheme, const Shape& shape);

std::string to_string(const QuantScheme& scheme);
ScalePolicy parse_policy(std::string_view text);          // absmax | minmax | fixed:ALPHA
Granularity parse_granularity(std::string_view text);     // per-tensor | per-channel:AXIS | per-group:AXIS:SIZE
Transform parse_transform(std::string_view text);         // identity | power[:P]
std::string to_string(const ScalePolicy& policy);
std::string to_string(const Granularity& granularity);
std::string to_string(const Transform& transform);

kernels::GroupLayout group_layout(const Shape& shape, const Granularity& granularity);

struct QuantizedTensor {
  Shape shape;
  QuantScheme scheme;
  std::vector<std::uint8_t> codes;
  std::vector<float> scales;               // one per group, > 0
  std::vector<std::uint16_t> zero_points;  // one per group, in [0, 2^b]

  std::size_t group_count() const noexcept { return scales.size(); }
  bool operator==(const QuantizedTensor&) const = default;
};

void validate(const QuantizedTensor& q);

struct QuantizeResult {
  QuantizedTensor tensor;
  std::size_t clipped = 0;  // elements whose pre-clip code fell outside [0, 2^b - 1]
};

QuantizeResult quantize_with_report(const Tensor& t, const QuantScheme& scheme);
QuantizedTensor quantize(const Tensor& t, const QuantScheme& scheme);
Tensor dequantize(const QuantizedTensor& q);
Tensor fake_quant(const Tensor& t, const QuantScheme& scheme);
/// Delta = t - fake_quant(t, scheme).
Tensor quant_perturbation(const Tensor& t, const QuantScheme& scheme);

Tensor forward_transform(const Tensor& t, const Transform& transform);
Tensor inverse_transform(const Tensor& t, const Transform& transform);

struct SweepRow {
  double alpha = 0;
  double l2_delta = 0;
  double clip_fraction = 0;
};

/// Quantizes `t` once per alpha with the policy replaced by FixedScale{alpha}.
/// `alphas` must be non-empty, positive and ascending.
std::vector<SweepRow> scale_sweep(const Tensor& t, const QuantScheme& base,
                                  std::span<const double> alphas);

// QTNQ container, little-endian:
//   "QTNQ" | u32 version=1 | u8 bits | u8 policy (0 absmax, 1 minmax, 2 fixed)
//   | u8 granularity (0 tensor, 1 channel, 2 group) | u8 axis | u32 group_size
//   | u8 transform (0 identity, 1 signed power) | f64 exponent
//   | u64 group_count | group_count x (f32 scale, u16 zero_point)
//   | shape header as in QTNS with dtype 1 (uint8 codes) | u8 codes
// A fixed policy's alpha is recovered as scale * 2^(b-1).
inline constexpr std::uint32_t kQtnqVersion = 1;

std::string encode_quantized(const QuantizedTensor& q);
QuantizedTensor decode_quantized(std::string_view bytes);
QuantizedTensor read_quantized(const std::filesystem::path& path);
void write_quantized(const std::filesystem::path& path, const QuantizedTensor& q);

}  // namespace qlens
