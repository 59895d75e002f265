#include "qlens/quant.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "qlens/error.hpp"

namespace qlens {

namespace k = kernels::omp;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double parse_number(std::string_view text, std::string_view what) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end)
    fail(ErrorKind::kInvalidArgument, std::string("bad ") + std::string(what) + " '" + s + "'");
  return v;
}

std::size_t parse_index(std::string_view text, std::string_view what) {
  const double v = parse_number(text, what);
  if (v < 0 || v != std::floor(v))
    fail(ErrorKind::kInvalidArgument, std::string("bad ") + std::string(what) + " '" + std::string(text) + "'");
  return static_cast<std::size_t>(v);
}

std::string fmt9(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

}  // namespace

void validate(const QuantScheme& scheme) {
  require(scheme.bits >= 2 && scheme.bits <= 8, ErrorKind::kInvalidArgument,
          "bits must be in [2, 8], got " + std::to_string(scheme.bits));
  if (const auto* f = std::get_if<FixedScale>(&scheme.policy))
    require(f->alpha > 0 && std::isfinite(f->alpha), ErrorKind::kInvalidArgument,
            "fixed scale alpha must be positive and finite");
  if (const auto* g = std::get_if<PerGroup>(&scheme.granularity))
    require(g->group_size >= 2, ErrorKind::kInvalidArgument, "group_size must be >= 2");
  if (const auto* p = std::get_if<SignedPower>(&scheme.transform))
    require(p->exponent > 0 && p->exponent <= 1, ErrorKind::kInvalidArgument,
            "signed-power exponent must be in (0, 1]");
}

kernels::GroupLayout group_layout(const Shape& shape, const Granularity& granularity) {
  kernels::GroupLayout layout;
  const auto split = [&](std::size_t axis) {
    require(axis < shape.size(), ErrorKind::kInvalidArgument,
            "axis " + std::to_string(axis) + " out of range for shape " + to_string(shape));
    layout.outer = 1;
    for (std::size_t i = 0; i < axis; ++i) layout.outer *= shape[i];
    layout.axis = shape[axis];
    layout.inner = 1;
    for (std::size_t i = axis + 1; i < shape.size(); ++i) layout.inner *= shape[i];
  };
  std::visit(Overloaded{
                 [&](const PerTensor&) {
                   layout.outer = 1;
                   layout.axis = 1;
                   layout.inner = numel(shape);
                   layout.mode = kernels::GroupMode::kTensor;
                 },
                 [&](const PerChannel& c) {
                   split(c.axis);
                   layout.mode = kernels::GroupMode::kChannel;
                 },
                 [&](const PerGroup& g) {
                   split(g.axis);
                   require(g.group_size >= 2 && layout.axis % g.group_size == 0,
                           ErrorKind::kInvalidArgument,
                           "group_size " + std::to_string(g.group_size) + " does not divide extent " +
                               std::to_string(layout.axis) + " along axis " + std::to_string(g.axis));
                   layout.mode = kernels::GroupMode::kGroup;
                   layout.group_size = g.group_size;
                 },
             },
             granularity);
  return layout;
}

void validate(const QuantScheme& scheme, const Shape& shape) {
  validate(scheme);
  (void)group_layout(shape, scheme.granularity);
}

std::string to_string(const ScalePolicy& policy) {
  return std::visit(Overloaded{
                        [](const AbsmaxSymmetric&) { return std::string("absmax"); },
                        [](const MinMaxAsymmetric&) { return std::string("minmax"); },
                        [](const FixedScale& f) { return "fixed:" + fmt9(f.alpha); },
                    },
                    policy);
}

std::string to_string(const Granularity& granularity) {
  return std::visit(Overloaded{
                        [](const PerTensor&) { return std::string("per-tensor"); },
                        [](const PerChannel& c) { return "per-channel:" + std::to_string(c.axis); },
                        [](const PerGroup& g) {
                          return "per-group:" + std::to_string(g.axis) + ":" + std::to_string(g.group_size);
                        },
                    },
                    granularity);
}

std::string to_string(const Transform& transform) {
  return std::visit(Overloaded{
                        [](const Identity&) { return std::string("identity"); },
                        [](const SignedPower& p) { return "power:" + fmt9(p.exponent); },
                    },
                    transform);
}

std::string to_string(const QuantScheme& scheme) {
  return "b" + std::to_string(scheme.bits) + "/" + to_string(scheme.policy) + "/" +
         to_string(scheme.granularity) + "/" + to_string(scheme.transform);
}

ScalePolicy parse_policy(std::string_view text) {
  if (text == "absmax") return AbsmaxSymmetric{};
  if (text == "minmax") return MinMaxAsymmetric{};
  if (text.starts_with("fixed:")) {
    const double alpha = parse_number(text.substr(6), "alpha");
    require(alpha > 0, ErrorKind::kInvalidArgument, "fixed alpha must be positive");
    return FixedScale{alpha};
  }
  fail(ErrorKind::kInvalidArgument, "unknown scale policy '" + std::string(text) + "'");
}

Granularity parse_granularity(std::string_view text) {
  if (text == "per-tensor") return PerTensor{};
  if (text.starts_with("per-channel:")) return PerChannel{parse_index(text.substr(12), "axis")};
  if (text.starts_with("per-group:")) {
    const auto rest = text.substr(10);
    const auto colon = rest.find(':');
    require(colon != std::string_view::npos, ErrorKind::kInvalidArgument,
            "per-group granularity needs AXIS:SIZE");
    return PerGroup{parse_index(rest.substr(0, colon), "axis"),
                    parse_index(rest.substr(colon + 1), "group size")};
  }
  fail(ErrorKind::kInvalidArgument, "unknown granularity '" + std::string(text) + "'");
}

Transform parse_transform(std::string_view text) {
  if (text == "identity") return Identity{};
  if (text == "power" || text == "cbrt") return SignedPower{};
  if (text.starts_with("power:")) {
    const double p = parse_number(text.substr(6), "exponent");
    require(p > 0 && p <= 1, ErrorKind::kInvalidArgument, "exponent must be in (0, 1]");
    // "power:0.333333333" names the cube root
    if (std::abs(p - 1.0 / 3.0) < 1e-8) return SignedPower{};
    return SignedPower{p};
  }
  fail(ErrorKind::kInvalidArgument, "unknown transform '" + std::string(text) + "'");
}

Tensor forward_transform(const Tensor& t, const Transform& transform) {
  const auto* p = std::get_if<SignedPower>(&transform);
  if (!p || p->exponent == 1.0) return t;
  std::vector<float> out(t.size());
  k::signed_power(t.data(), p->exponent, out);
  return Tensor(t.shape(), std::move(out));
}

Tensor inverse_transform(const Tensor& t, const Transform& transform) {
  const auto* p = std::get_if<SignedPower>(&transform);
  if (!p || p->exponent == 1.0) return t;
  const double inv = p->exponent == 1.0 / 3.0 ? 3.0 : 1.0 / p->exponent;
  std::vector<float> out(t.size());
  k::signed_power(t.data(), inv, out);
  for (float v : out)
    if (!std::isfinite(v)) fail(ErrorKind::kNumerical, "inverse transform overflowed float32");
  return Tensor(t.shape(), std::move(out));
}

QuantizeResult quantize_with_report(const Tensor& t, const QuantScheme& scheme) {
  require(!t.empty(), ErrorKind::kEmptyInput, "empty input");
  validate(scheme);
  const auto layout = group_layout(t.shape(), scheme.granularity);
  const Tensor y = forward_transform(t, scheme.transform);

  const std::size_t groups = layout.group_count();
  const auto half = static_cast<std::uint16_t>(1u << (scheme.bits - 1));
  const double qmax = static_cast<double>((1u << scheme.bits) - 1u);

  QuantizeResult result;
  QuantizedTensor& q = result.tensor;
  q.shape = t.shape();
  q.scheme = scheme;
  q.scales.assign(groups, 1.0f);
  q.zero_points.assign(groups, half);

  if (const auto* fixed = std::get_if<FixedScale>(&scheme.policy)) {
    const auto s = static_cast<float>(fixed->alpha / half);
    require(s > 0 && std::isfinite(s), ErrorKind::kInvalidArgument,
            "fixed alpha gives a step that is not a positive float32");
    q.scales.assign(groups, s);
  } else {
    std::vector<float> gmin(groups), gmax(groups);
    k::group_range(y.data(), layout, gmin, gmax);
    const bool symmetric = std::holds_alternative<AbsmaxSymmetric>(scheme.policy);
    for (std::size_t g = 0; g < groups; ++g) {
      if (symmetric) {
        const double absmax = std::max(std::abs(gmin[g]), std::abs(gmax[g]));
        const auto s = static_cast<float>(absmax / half);
        // all-zero group: unit sentinel step, every code lands on z
        q.scales[g] = s > 0 ? s : 1.0f;
      } else {
        const double lo = std::min(gmin[g], 0.0f), hi = std::max(gmax[g], 0.0f);
        const auto s = static_cast<float>((hi - lo) / qmax);
        q.scales[g] = s > 0 ? s : 1.0f;
        const double z = std::nearbyint(-lo / static_cast<double>(q.scales[g]));
        q.zero_points[g] = static_cast<std::uint16_t>(std::clamp(z, 0.0, qmax));
      }
    }
  }

  q.codes.resize(t.size());
  result.clipped = k::quantize(y.data(), layout, {q.scales, q.zero_points, scheme.bits}, q.codes);
  return result;
}

QuantizedTensor quantize(const Tensor& t, const QuantScheme& scheme) {
  return quantize_with_report(t, scheme).tensor;
}

void validate(const QuantizedTensor& q) {
  validate(q.scheme);
  require(numel(q.shape) == q.codes.size(), ErrorKind::kShapeMismatch,
          "code count does not match shape " + to_string(q.shape));
  const auto layout = group_layout(q.shape, q.scheme.granularity);
  require(q.scales.size() == layout.group_count() && q.zero_points.size() == layout.group_count(),
          ErrorKind::kInvalidArgument, "group count does not match granularity");
  const unsigned qmax = (1u << q.scheme.bits) - 1u;
  for (float s : q.scales)
    require(s > 0 && std::isfinite(s), ErrorKind::kInvalidArgument, "scales must be positive and finite");
  for (auto z : q.zero_points)
    require(z <= qmax + 1, ErrorKind::kInvalidArgument, "zero-point out of range");
  for (auto c : q.codes) require(c <= qmax, ErrorKind::kInvalidArgument, "code out of range");
}

Tensor dequantize(const QuantizedTensor& q) {
  validate(q);
  const auto layout = group_layout(q.shape, q.scheme.granularity);
  std::vector<float> out(q.codes.size());
  k::dequantize(q.codes, layout, {q.scales, q.zero_points, q.scheme.bits}, out);
  return inverse_transform(Tensor(q.shape, std::move(out)), q.scheme.transform);
}

Tensor fake_quant(const Tensor& t, const QuantScheme& scheme) { return dequantize(quantize(t, scheme)); }

Tensor quant_perturbation(const Tensor& t, const QuantScheme& scheme) {
  return sub(t, fake_quant(t, scheme));
}

std::vector<SweepRow> scale_sweep(const Tensor& t, const QuantScheme& base,
                                  std::span<const double> alphas) {
  require(!alphas.empty(), ErrorKind::kInvalidArgument, "alphas must be non-empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    require(alphas[i] > 0 && std::isfinite(alphas[i]), ErrorKind::kInvalidArgument,
            "alphas must be positive");
    require(i == 0 || alphas[i - 1] <= alphas[i], ErrorKind::kInvalidArgument,
            "alphas must be sorted ascending");
  }
  std::vector<SweepRow> rows;
  rows.reserve(alphas.size());
  for (double alpha : alphas) {
    QuantScheme scheme = base;
    scheme.policy = FixedScale{alpha};
    auto r = quantize_with_report(t, scheme);
    const Tensor delta = sub(t, dequantize(r.tensor));
    rows.push_back({alpha, l2(delta), static_cast<double>(r.clipped) / static_cast<double>(t.size())});
  }
  return rows;
}

}  // namespace qlens
