#include "qlens/perturb.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "qlens/error.hpp"

namespace qlens {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt9(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

double parse_positive(std::string_view text, const char* what) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end || !(v > 0))
    fail(ErrorKind::kInvalidArgument, std::string(what) + " must be a positive number, got '" + s + "'");
  return v;
}

double population_variance(const Tensor& t) {
  const double s = stats(t).std;
  return s * s;
}

}  // namespace

std::vector<std::string> validate(const PerturbSpec& spec) {
  std::vector<std::string> warnings;
  std::visit(Overloaded{
                 [](const MagNegDelta& m) {
                   require(m.eps_rel > 0, ErrorKind::kInvalidArgument, "magneg eps_rel must be > 0");
                 },
                 [](const ClipDelta& c) {
                   require(c.k > 0, ErrorKind::kInvalidArgument, "clip k must be > 0");
                 },
                 [](const auto&) {},
             },
             spec.kind);
  const bool is_clip = std::holds_alternative<ClipDelta>(spec.kind);
  if (is_clip) {
    if (spec.intensity) warnings.push_back("clip perturbations are never rescaled; intensity ignored");
  } else {
    require(spec.intensity.has_value(), ErrorKind::kInvalidArgument,
            to_string(spec.kind) + " needs an intensity target");
  }
  if (spec.intensity) {
    std::visit(Overloaded{
                   [](const FixedL2& f) {
                     require(f.target >= 0 && std::isfinite(f.target), ErrorKind::kInvalidArgument,
                             "fixed l2 target must be >= 0");
                   },
                   [](const MatchQuantL2& m) { validate(m.scheme); },
                   [](const MatchQuantVariance& m) { validate(m.scheme); },
                   [](const MatchClipL2& m) {
                     require(m.k > 0, ErrorKind::kInvalidArgument, "clip k must be > 0");
                   },
               },
               *spec.intensity);
  }
  return warnings;
}

std::string to_string(const PerturbKind& kind) {
  return std::visit(Overloaded{
                        [](const GaussianDelta&) { return std::string("gaussian"); },
                        [](const UniformDelta&) { return std::string("uniform"); },
                        [](const RademacherDelta&) { return std::string("rademacher"); },
                        [](const MagPosDelta&) { return std::string("magpos"); },
                        [](const MagNegDelta& m) {
                          return m.eps_rel == 1e-3 ? std::string("magneg") : "magneg:" + fmt9(m.eps_rel);
                        },
                        [](const ClipDelta& c) {
                          return "clip:" + fmt9(c.k) + (c.two_sided ? "" : ":one-sided");
                        },
                    },
                    kind);
}

PerturbKind parse_kind(std::string_view text) {
  if (text == "gaussian") return GaussianDelta{};
  if (text == "uniform") return UniformDelta{};
  if (text == "rademacher") return RademacherDelta{};
  if (text == "magpos") return MagPosDelta{};
  if (text == "magneg") return MagNegDelta{};
  if (text.starts_with("magneg:")) return MagNegDelta{parse_positive(text.substr(7), "magneg eps_rel")};
  if (text.starts_with("clip:")) {
    auto rest = text.substr(5);
    bool two_sided = true;
    if (rest.ends_with(":one-sided")) {
      two_sided = false;
      rest.remove_suffix(10);
    }
    return ClipDelta{parse_positive(rest, "clip k"), two_sided};
  }
  fail(ErrorKind::kInvalidArgument, "unknown perturbation kind '" + std::string(text) + "'");
}

std::string to_string(const Intensity& intensity) {
  return std::visit(Overloaded{
                        [](const MatchQuantL2& m) { return "match-l2(" + to_string(m.scheme) + ")"; },
                        [](const FixedL2& f) { return "fixed-l2:" + fmt9(f.target); },
                        [](const MatchQuantVariance& m) { return "match-var(" + to_string(m.scheme) + ")"; },
                        [](const MatchClipL2& m) { return "match-clip:" + fmt9(m.k); },
                    },
                    intensity);
}

Tensor match_intensity(const Tensor& delta, double target_l2) {
  require(target_l2 >= 0 && std::isfinite(target_l2), ErrorKind::kInvalidArgument,
          "target l2 must be >= 0");
  if (target_l2 == 0) return Tensor::zeros(delta.shape());
  const double norm = l2(delta);
  if (norm == 0) fail(ErrorKind::kNumerical, "degenerate perturbation: zero delta cannot reach a positive target");
  return scale(delta, target_l2 / norm);
}

double native_intensity(const Tensor& t, const QuantScheme& scheme, IntensityMeasure measure) {
  const Tensor delta = quant_perturbation(t, scheme);
  return measure == IntensityMeasure::kL2 ? l2(delta) : population_variance(delta);
}

ClipBand clip_band(const Tensor& t, double k, bool two_sided) {
  require(k > 0, ErrorKind::kInvalidArgument, "clip k must be > 0");
  const TensorStats s = stats(t);
  return {two_sided ? s.mean - k * s.std : -std::numeric_limits<double>::infinity(),
          s.mean + k * s.std};
}

Tensor clip_to_band(const Tensor& t, const ClipBand& band) {
  std::vector<float> out(t.data().begin(), t.data().end());
  for (auto& v : out) {
    if (v < band.lo) v = static_cast<float>(band.lo);
    else if (v > band.hi) v = static_cast<float>(band.hi);
  }
  return Tensor(t.shape(), std::move(out));
}

double clip_fraction(const Tensor& t, double k, bool two_sided) {
  const ClipBand band = clip_band(t, k, two_sided);
  std::size_t outside = 0;
  for (float v : t.data()) outside += (v < band.lo || v > band.hi) ? 1 : 0;
  return static_cast<double>(outside) / static_cast<double>(t.size());
}

Tensor gen_perturbation(const Tensor& t, const PerturbSpec& spec) {
  RngStream rng(spec.seed);
  return gen_perturbation(t, spec, rng);
}

Tensor gen_perturbation(const Tensor& t, const PerturbSpec& spec, RngStream& rng) {
  require(!t.empty(), ErrorKind::kEmptyInput, "empty input");
  (void)validate(spec);

  if (const auto* clip = std::get_if<ClipDelta>(&spec.kind))
    return sub(clip_to_band(t, clip_band(t, clip->k, clip->two_sided)), t);

  const auto x = t.data();
  std::vector<float> raw(x.size());
  std::visit(Overloaded{
                 [&](const GaussianDelta&) {
                   for (auto& v : raw) v = static_cast<float>(rng.normal());
                 },
                 [&](const UniformDelta&) {
                   for (auto& v : raw) v = static_cast<float>(rng.uniform(-1.0, 1.0));
                 },
                 [&](const RademacherDelta&) {
                   for (auto& v : raw) v = static_cast<float>(rng.rademacher());
                 },
                 [&](const MagPosDelta&) {
                   for (std::size_t i = 0; i < raw.size(); ++i)
                     raw[i] = static_cast<float>(rng.rademacher()) * std::abs(x[i]);
                 },
                 [&](const MagNegDelta& m) {
                   const double absmax = stats(t).absmax;
                   const double eps = m.eps_rel * (absmax > 0 ? absmax : 1.0);
                   for (std::size_t i = 0; i < raw.size(); ++i)
                     raw[i] = static_cast<float>(rng.rademacher() / (std::abs(static_cast<double>(x[i])) + eps));
                 },
                 [](const ClipDelta&) {},
             },
             spec.kind);
  Tensor delta(t.shape(), std::move(raw));

  return std::visit(
      Overloaded{
          [&](const FixedL2& f) { return match_intensity(delta, f.target); },
          [&](const MatchQuantL2& m) { return match_intensity(delta, l2(quant_perturbation(t, m.scheme))); },
          [&](const MatchClipL2& m) { return match_intensity(delta, l2(sub(clip_to_band(t, clip_band(t, m.k)), t))); },
          [&](const MatchQuantVariance& m) {
            const double target = native_intensity(t, m.scheme, IntensityMeasure::kVariance);
            if (target == 0) return Tensor::zeros(t.shape());
            const double raw_var = population_variance(delta);
            if (raw_var == 0) fail(ErrorKind::kNumerical, "degenerate perturbation: zero-variance draw");
            return scale(delta, std::sqrt(target / raw_var));
          },
      },
      *spec.intensity);
}

}  // namespace qlens
