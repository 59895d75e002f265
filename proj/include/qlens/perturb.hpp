#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qlens/quant.hpp"
#include "qlens/rng.hpp"
#include "qlens/tensor.hpp"

namespace qlens {

// Artificial perturbation families. The raw draw of every kind except clipping
// is rescaled to an intensity target.
struct GaussianDelta {
  bool operator==(const GaussianDelta&) const = default;
};
struct UniformDelta {
  bool operator==(const UniformDelta&) const = default;
};
/// Constant magnitude, random sign.
struct RademacherDelta {
  bool operator==(const RademacherDelta&) const = default;
};
/// delta_i = s_i |t_i| with Rademacher s_i.
struct MagPosDelta {
  bool operator==(const MagPosDelta&) const = default;
};
/// delta_i = s_i / (|t_i| + eps), eps = eps_rel * absmax(t).
struct MagNegDelta {
  double eps_rel = 1e-3;
  bool operator==(const MagNegDelta&) const = default;
};
/// delta = clipped(t) - t with band [mu - k sigma, mu + k sigma] (upper edge
/// only when one-sided). Never rescaled.
struct ClipDelta {
  double k = 3.0;
  bool two_sided = true;
  bool operator==(const ClipDelta&) const = default;
};
using PerturbKind =
    std::variant<GaussianDelta, UniformDelta, RademacherDelta, MagPosDelta, MagNegDelta, ClipDelta>;

/// l2 of the native quantization noise of the same tensor.
struct MatchQuantL2 {
  QuantScheme scheme;
  bool operator==(const MatchQuantL2&) const = default;
};
struct FixedL2 {
  double target = 0;
  bool operator==(const FixedL2&) const = default;
};
/// Population variance equal to that of the native quantization noise.
struct MatchQuantVariance {
  QuantScheme scheme;
  bool operator==(const MatchQuantVariance&) const = default;
};
/// l2 of the clipping perturbation ClipDelta{k} of the same tensor.
struct MatchClipL2 {
  double k = 3.0;
  bool operator==(const MatchClipL2&) const = default;
};
using Intensity = std::variant<MatchQuantL2, FixedL2, MatchQuantVariance, MatchClipL2>;

struct PerturbSpec {
  PerturbKind kind = GaussianDelta{};
  std::optional<Intensity> intensity;
  std::uint64_t seed = 0;

  bool operator==(const PerturbSpec&) const = default;
};

/// Throws on invalid specs; returns warnings (e.g. an intensity given for clipping).
std::vector<std::string> validate(const PerturbSpec& spec);

std::string to_string(const PerturbKind& kind);
/// gaussian | uniform | rademacher | magpos | magneg[:EPS_REL] | clip:K[:one-sided]
PerturbKind parse_kind(std::string_view text);
std::string to_string(const Intensity& intensity);

/// Delta for `t`, drawn from `rng`. The perturbed tensor is t + delta.
Tensor gen_perturbation(const Tensor& t, const PerturbSpec& spec, RngStream& rng);
/// Same, with a stream seeded from spec.seed.
Tensor gen_perturbation(const Tensor& t, const PerturbSpec& spec);

/// Rescales `delta` to l2 norm `target_l2`.
Tensor match_intensity(const Tensor& delta, double target_l2);

enum class IntensityMeasure { kL2, kVariance };
double native_intensity(const Tensor& t, const QuantScheme& scheme,
                        IntensityMeasure measure = IntensityMeasure::kL2);

struct ClipBand {
  double lo = 0;
  double hi = 0;
};
ClipBand clip_band(const Tensor& t, double k, bool two_sided = true);
Tensor clip_to_band(const Tensor& t, const ClipBand& band);
/// Fraction of elements strictly outside the band.
double clip_fraction(const Tensor& t, double k, bool two_sided = true);

}  // namespace qlens
