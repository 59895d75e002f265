#include "qlens/toy/injection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qlens/error.hpp"

namespace qlens::toy {

bool InjectionPlan::is_identity() const {
  const auto none = [](const auto& kv) { return std::holds_alternative<NoAction>(kv.second); };
  return std::all_of(weights.begin(), weights.end(), none) &&
         std::all_of(activations.begin(), activations.end(), none);
}

void validate(const InjectionPlan& plan, const ModelConfig& config) {
  const ParamLayout layout(config);
  const auto check = [&](const std::map<std::string, SiteAction>& actions, bool activation) {
    for (const auto& [site, action] : actions) {
      const ParamEntry* e = layout.find(site);
      if (!e || !e->site) fail(ErrorKind::kInvalidArgument, "unresolvable injection site '" + site + "'");
      if (const auto* q = std::get_if<QuantizeAction>(&action)) {
        validate(q->scheme);
        if (activation)
          require(std::holds_alternative<PerTensor>(q->scheme.granularity), ErrorKind::kInvalidArgument,
                  "activation quantization must be per-tensor (site '" + site + "')");
        else
          validate(q->scheme, e->shape);
      } else if (const auto* p = std::get_if<PerturbAction>(&action)) {
        (void)validate(p->spec);
      }
    }
  };
  check(plan.weights, false);
  check(plan.activations, true);
}

std::string to_string(Preset preset) {
  switch (preset) {
    case Preset::kFullPrecision: return "fp";
    case Preset::kW4A16: return "W4A16";
    case Preset::kW8A8: return "W8A8";
    case Preset::kW4A8: return "W4A8";
  }
  return "?";
}

Preset parse_preset(const std::string& text) {
  if (text == "fp" || text == "full") return Preset::kFullPrecision;
  if (text == "W4A16" || text == "w4a16") return Preset::kW4A16;
  if (text == "W8A8" || text == "w8a8") return Preset::kW8A8;
  if (text == "W4A8" || text == "w4a8") return Preset::kW4A8;
  fail(ErrorKind::kInvalidArgument, "unknown preset '" + text + "'");
}

QuantScheme weight_scheme(int bits, bool non_uniform) {
  QuantScheme s;
  s.bits = bits;
  s.policy = AbsmaxSymmetric{};
  s.granularity = PerChannel{1};
  s.transform = non_uniform ? Transform{SignedPower{}} : Transform{Identity{}};
  return s;
}

QuantScheme activation_scheme(int bits, bool non_uniform) {
  QuantScheme s = weight_scheme(bits, non_uniform);
  s.granularity = PerTensor{};
  return s;
}

InjectionPlan make_preset(Preset preset, bool non_uniform, const ModelConfig& config) {
  InjectionPlan plan;
  int wbits = 0, abits = 0;
  switch (preset) {
    case Preset::kFullPrecision: return plan;
    case Preset::kW4A16: wbits = 4; break;
    case Preset::kW8A8: wbits = 8; abits = 8; break;
    case Preset::kW4A8: wbits = 4; abits = 8; break;
  }
  for (const auto& site : ParamLayout(config).site_names()) {
    plan.weights[site] = QuantizeAction{weight_scheme(wbits, non_uniform)};
    if (abits) plan.activations[site] = QuantizeAction{activation_scheme(abits, non_uniform)};
  }
  return plan;
}

InjectionPlan make_perturb_plan(const PerturbPlanOptions& o, const ModelConfig& config) {
  InjectionPlan plan;
  const auto intensity = [&](const QuantScheme& s) -> Intensity {
    if (o.match_variance) return MatchQuantVariance{s};
    return MatchQuantL2{s};
  };
  const bool clip = std::holds_alternative<ClipDelta>(o.kind);
  for (const auto& site : ParamLayout(config).site_names()) {
    PerturbSpec w{o.kind, std::nullopt, o.seed};
    if (!clip) w.intensity = intensity(weight_scheme(o.weight_bits, false));
    plan.weights[site] = PerturbAction{w};
    if (o.activation_bits > 0) {
      PerturbSpec a{o.kind, std::nullopt, o.seed};
      if (!clip) a.intensity = intensity(activation_scheme(o.activation_bits, false));
      plan.activations[site] = PerturbAction{a};
    }
  }
  return plan;
}

InjectionPlan make_clip_matched_gaussian_plan(double k, std::uint64_t seed, const ModelConfig& config) {
  InjectionPlan plan;
  for (const auto& site : ParamLayout(config).site_names()) {
    const PerturbSpec spec{GaussianDelta{}, MatchClipL2{k}, seed};
    plan.weights[site] = PerturbAction{spec};
    plan.activations[site] = PerturbAction{spec};
  }
  return plan;
}

Tensor apply_action(const Tensor& x, const SiteAction& action, std::uint64_t stream_id) {
  if (const auto* q = std::get_if<QuantizeAction>(&action)) return fake_quant(x, q->scheme);
  if (const auto* p = std::get_if<PerturbAction>(&action)) {
    RngStream rng(substream_seed(p->spec.seed, stream_id));
    return add(x, gen_perturbation(x, p->spec, rng));
  }
  return x;
}

ModelParams apply_weight_actions(const ModelParams& params, const InjectionPlan& plan) {
  validate(plan, params.config);
  ModelParams out = params;
  const auto sites = params.layout.site_names();
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto it = plan.weights.find(sites[i]);
    if (it == plan.weights.end() || std::holds_alternative<NoAction>(it->second)) continue;
    out.set(sites[i], apply_action(params.get(sites[i]), it->second, i));
  }
  return out;
}

ModelParams inject_outliers(const ModelParams& params, double factor, double fraction, std::uint64_t seed) {
  require(factor > 0 && std::isfinite(factor), ErrorKind::kInvalidArgument, "outlier factor must be positive");
  require(fraction > 0 && fraction <= 1, ErrorKind::kInvalidArgument, "outlier fraction must be in (0, 1]");
  const ModelConfig& c = params.config;
  const std::size_t d = c.d_model;
  const std::size_t count =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(d))));
  RngStream rng(seed);
  ModelParams out = params;

  const auto rescale = [&](const std::string& gain, const std::string& bias,
                           const std::vector<std::string>& consumers) {
    std::vector<std::size_t> channels(d);
    std::iota(channels.begin(), channels.end(), 0);
    for (std::size_t i = 0; i < count; ++i) std::swap(channels[i], channels[i + rng.below(d - i)]);
    auto g = out.view(gain), b = out.view(bias);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t ch = channels[i];
      g[ch] = static_cast<float>(g[ch] * factor);
      b[ch] = static_cast<float>(b[ch] * factor);
      for (const auto& w : consumers) {
        const std::size_t cols = out.layout.at(w).shape[1];
        auto row = out.view(w).subspan(ch * cols, cols);
        for (auto& v : row) v = static_cast<float>(v / factor);
      }
    }
  };
  for (std::size_t l = 0; l < c.layers; ++l) {
    rescale(names::ln1_gain(l), names::ln1_bias(l), {names::wq(l), names::wk(l), names::wv(l)});
    rescale(names::ln2_gain(l), names::ln2_bias(l), {names::ffn_in(l)});
  }
  rescale(names::kFinalGain, names::kFinalBias, {names::kHead});
  return out;
}

}  // namespace qlens::toy
