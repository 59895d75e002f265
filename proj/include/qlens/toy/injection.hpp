#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

#include "qlens/perturb.hpp"
#include "qlens/quant.hpp"
#include "qlens/toy/config.hpp"

namespace qlens::toy {

struct NoAction {
  bool operator==(const NoAction&) const = default;
};
struct QuantizeAction {
  QuantScheme scheme;
  bool operator==(const QuantizeAction&) const = default;
};
/// Adds gen_perturbation(x, spec) to the target.
struct PerturbAction {
  PerturbSpec spec;
  bool operator==(const PerturbAction&) const = default;
};
using SiteAction = std::variant<NoAction, QuantizeAction, PerturbAction>;

/// Per-site actions. Weight actions transform a copy of the site's weight
/// before the forward pass; activation actions transform the input of the
/// site's matmul on every call.
struct InjectionPlan {
  std::map<std::string, SiteAction> weights;
  std::map<std::string, SiteAction> activations;

  /// True when no site carries an action other than NoAction.
  bool is_identity() const;
};

void validate(const InjectionPlan& plan, const ModelConfig& config);

enum class Preset { kFullPrecision, kW4A16, kW8A8, kW4A8 };

std::string to_string(Preset preset);
Preset parse_preset(const std::string& text);

/// Weights per output channel (axis 1) with absmax scales, activations per
/// tensor and dynamic. `non_uniform` adds the signed cube-root transform.
QuantScheme weight_scheme(int bits, bool non_uniform);
QuantScheme activation_scheme(int bits, bool non_uniform);
InjectionPlan make_preset(Preset preset, bool non_uniform, const ModelConfig& config);

struct PerturbPlanOptions {
  PerturbKind kind = GaussianDelta{};
  int weight_bits = 8;      // native noise the intensity is matched to
  int activation_bits = 8;  // 0 leaves activations untouched
  bool match_variance = false;
  std::uint64_t seed = 0;
};

/// The same perturbation on every site, intensity-matched to that site's
/// native WxAy quantization noise (l2 by default).
InjectionPlan make_perturb_plan(const PerturbPlanOptions& options, const ModelConfig& config);

/// Gaussian noise on every site with the l2 norm of the clipping
/// perturbation at threshold k.
InjectionPlan make_clip_matched_gaussian_plan(double k, std::uint64_t seed, const ModelConfig& config);

/// Applies `action` to `x`. Perturbations draw from a stream seeded by
/// substream_seed(spec.seed, stream_id).
Tensor apply_action(const Tensor& x, const SiteAction& action, std::uint64_t stream_id);

/// Copy of `params` with every weight action applied.
ModelParams apply_weight_actions(const ModelParams& params, const InjectionPlan& plan);

/// Function-preserving rescaling that creates activation outlier channels:
/// for each layernorm, `fraction` of its channels (at least one) get gain and
/// bias multiplied by `factor`, and the matching input rows of every matmul
/// consuming that layernorm are divided by `factor`.
ModelParams inject_outliers(const ModelParams& params, double factor, double fraction, std::uint64_t seed);

}  // namespace qlens::toy
