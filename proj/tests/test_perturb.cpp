#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "qlens/metrics.hpp"
#include "qlens/perturb.hpp"
#include "qlens/quant.hpp"
#include "qlens/rng.hpp"
#include "test_util.hpp"

using namespace qlens;

namespace {

const QuantScheme kW8{8, AbsmaxSymmetric{}, PerTensor{}, Identity{}};

std::vector<PerturbKind> stochastic_kinds() {
  return {GaussianDelta{}, UniformDelta{}, RademacherDelta{}, MagPosDelta{}, MagNegDelta{}};
}

std::vector<float> abs_of(const Tensor& t) {
  std::vector<float> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v[i] = std::fabs(t[i]);
  return v;
}

}  // namespace

TEST_SUITE("perturb") {

TEST_CASE("zero target gives zeros") {
  RngStream rng(1);
  Tensor t = sample(Normal{}, {64}, rng);
  for (const auto& k : stochastic_kinds()) CHECK(gen_perturbation(t, PerturbSpec{k, FixedL2{0}, 3}) == Tensor::zeros({64}));
}

TEST_CASE("MagPos proportionality on small input") {
  Tensor t({3}, {1, 2, 4});
  Tensor d = gen_perturbation(t, PerturbSpec{MagPosDelta{}, FixedL2{1.5}, 9});
  const double c = std::fabs(d[0]) / 1.0;
  CHECK(std::fabs(d[1]) / 2.0 == doctest::Approx(c).epsilon(1e-6));
  CHECK(std::fabs(d[2]) / 4.0 == doctest::Approx(c).epsilon(1e-6));
  CHECK(l2(d) == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("intensity contract for every stochastic kind") {
  RngStream rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor t = sample(Laplace{0, rng.uniform(0.1, 5)}, {1 + rng.below(3000)}, rng);
    const double tau = rng.uniform(1e-3, 10);
    const double native = l2(quant_perturbation(t, kW8));
    for (const auto& k : stochastic_kinds()) {
      CHECK(l2(gen_perturbation(t, PerturbSpec{k, FixedL2{tau}, static_cast<std::uint64_t>(rep)})) == doctest::Approx(tau).epsilon(1e-6));
      if (native > 0) {
        const double got = l2(gen_perturbation(t, PerturbSpec{k, MatchQuantL2{kW8}, static_cast<std::uint64_t>(rep)}));
        CHECK(std::fabs(got - native) / native < 1e-6);
      }
    }
  }
}

TEST_CASE("variance matching") {
  RngStream rng(3);
  Tensor t = sample(Normal{}, {5000}, rng);
  const double target = native_intensity(t, kW8, IntensityMeasure::kVariance);
  Tensor q = quant_perturbation(t, kW8);
  auto qs = oracle::stats(q.data());
  CHECK(target == doctest::Approx(static_cast<double>(qs.std * qs.std)).epsilon(1e-9));
  for (const auto& k : stochastic_kinds()) {
    Tensor d = gen_perturbation(t, PerturbSpec{k, MatchQuantVariance{kW8}, 4});
    auto ds = oracle::stats(d.data());
    CHECK(static_cast<double>(ds.std * ds.std) == doctest::Approx(target).epsilon(1e-5));
  }
}

TEST_CASE("exact magnitude laws") {
  RngStream rng(4);
  Tensor t = sample(Normal{}, {100000}, rng);
  const double eps = 1e-3 * stats(t).absmax;
  Tensor pos = gen_perturbation(t, PerturbSpec{MagPosDelta{}, MatchQuantL2{kW8}, 5});
  Tensor neg = gen_perturbation(t, PerturbSpec{MagNegDelta{}, MatchQuantL2{kW8}, 5});
  const double c_pos = std::fabs(pos[0]) / std::fabs(t[0]);
  const double c_neg = std::fabs(neg[0]) * (std::fabs(t[0]) + eps);
  double worst_pos = 0, worst_neg = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0) worst_pos = std::max(worst_pos, std::fabs(std::fabs(pos[i]) / std::fabs(t[i]) - c_pos) / c_pos);
    worst_neg = std::max(worst_neg, std::fabs(std::fabs(neg[i]) * (std::fabs(t[i]) + eps) - c_neg) / c_neg);
  }
  CHECK(worst_pos < 1e-6);
  CHECK(worst_neg < 1e-6);
}

TEST_CASE("rank correlation signs") {
  RngStream rng(6);
  Tensor t = sample(Normal{}, {20000}, rng);
  auto at = abs_of(t);
  auto rho = [&](PerturbKind k) {
    return spearman(abs_of(gen_perturbation(t, PerturbSpec{k, MatchQuantL2{kW8}, 7})), at);
  };
  CHECK(rho(MagPosDelta{}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rho(MagNegDelta{}) == doctest::Approx(-1.0).epsilon(1e-9));
  for (PerturbKind k : {PerturbKind{GaussianDelta{}}, PerturbKind{UniformDelta{}}}) {
    const double r = rho(k);
    CHECK(r > -0.1);
    CHECK(r < 0.1);
  }
  // Rademacher magnitudes are all equal, so the rank correlation is undefined.
  CHECK_THROWS_KIND(rho(RademacherDelta{}), ErrorKind::kNumerical);
}

TEST_CASE("zero-mean kinds and determinism") {
  RngStream rng(8);
  Tensor t = sample(Normal{}, {40000}, rng);
  const double n = t.size();
  for (PerturbKind k : {PerturbKind{GaussianDelta{}}, PerturbKind{UniformDelta{}}, PerturbKind{RademacherDelta{}}}) {
    Tensor d = gen_perturbation(t, PerturbSpec{k, FixedL2{std::sqrt(n)}, 11});
    CHECK(std::fabs(stats(d).mean) < 4 / std::sqrt(n));
    CHECK(gen_perturbation(t, PerturbSpec{k, FixedL2{1}, 11}) == gen_perturbation(t, PerturbSpec{k, FixedL2{1}, 11}));
    CHECK(gen_perturbation(t, PerturbSpec{k, FixedL2{1}, 11}) != gen_perturbation(t, PerturbSpec{k, FixedL2{1}, 12}));
  }
}

TEST_CASE("match_intensity") {
  CHECK(match_intensity(Tensor({2}, {3, 4}), 10) == Tensor({2}, {6, 8}));
  CHECK(match_intensity(Tensor({2}, {3, 4}), 0) == Tensor::zeros({2}));
  Tensor d({3}, {1, 2, 2});
  Tensor same = match_intensity(d, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(same[i] == doctest::Approx(d[i]).epsilon(1e-6));
  CHECK_THROWS_KIND(match_intensity(Tensor::zeros({3}), 1), ErrorKind::kNumerical);
  CHECK_THROWS_KIND(match_intensity(d, -1), ErrorKind::kInvalidArgument);
  RngStream rng(9);
  Tensor g = sample(Normal{}, {1000}, rng);
  Tensor m = match_intensity(g, 0.37);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK((g[i] > 0) == (m[i] > 0));
}

TEST_CASE("native intensity") {
  CHECK(native_intensity(Tensor::zeros({8}), kW8) == 0);
  RngStream rng(10);
  Tensor t = sample(Normal{}, {100000}, rng);
  QuantScheme w4 = kW8;
  w4.bits = 4;
  CHECK(native_intensity(t, w4) > native_intensity(t, kW8));
  CHECK(native_intensity(t, kW8) == l2(quant_perturbation(t, kW8)));
}

TEST_CASE("degenerate draw") {
  CHECK_THROWS_KIND(gen_perturbation(Tensor::zeros({4}), PerturbSpec{MagPosDelta{}, FixedL2{1}, 0}), ErrorKind::kNumerical);
  CHECK_THROWS_KIND(gen_perturbation(Tensor(), PerturbSpec{GaussianDelta{}, FixedL2{1}, 0}), ErrorKind::kEmptyInput);
}

TEST_CASE("clip fraction against the normal tail") {
  RngStream rng(12);
  Tensor t = sample(Normal{}, {1000000}, rng);
  const double f3 = clip_fraction(t, 3);
  CHECK(f3 >= 0.0022);
  CHECK(f3 <= 0.0032);
  CHECK(std::fabs(f3 - oracle::normal_two_sided_tail(3)) < 0.0005);
  CHECK(clip_fraction(t, 5) < 1e-5);
  Tensor d = gen_perturbation(t, PerturbSpec{ClipDelta{3}, std::nullopt, 0});
  const auto changed = std::count_if(d.data().begin(), d.data().end(), [](float v) { return v != 0; });
  CHECK(static_cast<double>(changed) / t.size() == doctest::Approx(f3).epsilon(1e-12));
}

TEST_CASE("clip band, idempotence, shrink-only") {
  CHECK(clip_fraction(Tensor({5}, {2, 2, 2, 2, 2}), 1) == 0);
  RngStream rng(13);
  Tensor t = sample(Laplace{0.5, 1}, {20000}, rng);
  auto s = oracle::stats(t.data());
  for (double k : {1.0, 3.0, 5.0}) {
    ClipBand band = clip_band(t, k);
    CHECK(band.lo == doctest::Approx(static_cast<double>(s.mean - k * s.std)).epsilon(1e-9));
    CHECK(band.hi == doctest::Approx(static_cast<double>(s.mean + k * s.std)).epsilon(1e-9));
    Tensor once = clip_to_band(t, band);
    CHECK(clip_to_band(once, band) == once);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const bool outside = t[i] < band.lo || t[i] > band.hi;
      if (!outside) REQUIRE(once[i] == t[i]);
      else REQUIRE(std::fabs(once[i] - t[i]) > 0);
      if (t[i] > band.hi) REQUIRE(once[i] < t[i]);
      if (t[i] < band.lo) REQUIRE(once[i] > t[i]);
    }
    ClipBand upper = clip_band(t, k, false);
    Tensor one = clip_to_band(t, upper);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] < band.lo) REQUIRE(one[i] == t[i]);
  }
}

TEST_CASE("clip ignores intensity and warns") {
  RngStream rng(14);
  Tensor t = sample(Normal{}, {1000}, rng);
  PerturbSpec with{ClipDelta{2}, FixedL2{100}, 0};
  CHECK(validate(with).size() == 1);
  CHECK(validate(PerturbSpec{ClipDelta{2}, std::nullopt, 0}).empty());
  CHECK(gen_perturbation(t, with) == gen_perturbation(t, PerturbSpec{ClipDelta{2}, std::nullopt, 0}));
  CHECK_THROWS(validate(PerturbSpec{ClipDelta{0}, std::nullopt, 0}));
  CHECK_THROWS(validate(PerturbSpec{MagNegDelta{0}, FixedL2{1}, 0}));
  CHECK_THROWS(validate(PerturbSpec{GaussianDelta{}, std::nullopt, 0}));
  CHECK_THROWS(validate(PerturbSpec{GaussianDelta{}, FixedL2{-1}, 0}));
}

TEST_CASE("clip-matched intensity") {
  RngStream rng(15);
  Tensor t = sample(OutlierMixture{0.01, 20}, {4000}, rng);
  const double target = l2(gen_perturbation(t, PerturbSpec{ClipDelta{3}, std::nullopt, 0}));
  CHECK(l2(gen_perturbation(t, PerturbSpec{GaussianDelta{}, MatchClipL2{3}, 1})) == doctest::Approx(target).epsilon(1e-6));
}

TEST_CASE("kind text forms") {
  for (const char* s : {"gaussian", "uniform", "rademacher", "magpos"}) CHECK(to_string(parse_kind(s)) == s);
  CHECK(parse_kind("magneg") == PerturbKind{MagNegDelta{1e-3}});
  CHECK(parse_kind("magneg:0.01") == PerturbKind{MagNegDelta{0.01}});
  CHECK(parse_kind("clip:5") == PerturbKind{ClipDelta{5, true}});
  CHECK(parse_kind("clip:5:one-sided") == PerturbKind{ClipDelta{5, false}});
  CHECK(parse_kind(to_string(parse_kind("clip:3"))) == parse_kind("clip:3"));
  CHECK_THROWS(parse_kind("laplace"));
  CHECK_THROWS(parse_kind("clip:-1"));
}

}  // TEST_SUITE
