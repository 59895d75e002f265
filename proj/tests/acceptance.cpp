// Acceptance suite: one PASS/FAIL line per criterion, exit status = number of
// failed criteria. Usage: acceptance [--work DIR] [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qlens/harness/config.hpp"
#include "qlens/harness/csv.hpp"
#include "qlens/harness/experiment.hpp"
#include "qlens/io_util.hpp"
#include "qlens/metrics.hpp"
#include "qlens/perturb.hpp"
#include "qlens/quant.hpp"
#include "qlens/toy/injection.hpp"
#include "qlens/toy/model.hpp"
#include "qlens/toy/train.hpp"

using namespace qlens;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// random (tensor, scheme) pairs shared by criteria 1 and 2

struct Pair {
  Tensor t;
  QuantScheme scheme;
};

std::vector<Pair> random_pairs(std::size_t count, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t nd = 1 + rng.below(3);
    Shape shape;
    for (std::size_t d = 0; d < nd; ++d) shape.push_back(2 * (1 + rng.below(nd == 1 ? 512 : 16)));
    QuantScheme s;
    s.bits = 2 + static_cast<int>(rng.below(7));
    switch (rng.below(3)) {
      case 0: s.policy = AbsmaxSymmetric{}; break;
      case 1: s.policy = MinMaxAsymmetric{}; break;
      default: s.policy = FixedScale{rng.uniform(0.05, 5)}; break;
    }
    const std::size_t axis = rng.below(nd);
    switch (rng.below(3)) {
      case 0: s.granularity = PerTensor{}; break;
      case 1: s.granularity = PerChannel{axis}; break;
      default: s.granularity = PerGroup{axis, 2}; break;
    }
    if (rng.below(4) == 0) s.transform = SignedPower{rng.uniform(0.2, 1.0)};
    Tensor t;
    switch (rng.below(4)) {
      case 0: t = sample(Normal{rng.uniform(-1, 1), rng.uniform(0.01, 4)}, shape, rng); break;
      case 1: t = sample(Uniform{-rng.uniform(0.1, 3), rng.uniform(0.1, 3)}, shape, rng); break;
      case 2: t = sample(Laplace{0, rng.uniform(0.1, 2)}, shape, rng); break;
      default: t = sample(OutlierMixture{0.01, 50}, shape, rng); break;
    }
    pairs.push_back({std::move(t), s});
  }
  return pairs;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  auto pairs = random_pairs(1000, 1);
  std::size_t range_bad = 0, mono_bad = 0, bound_bad = 0, refine_bad = 0, bound_checked = 0, refine_checked = 0;
  for (const auto& [t, s] : pairs) {
    const auto q = quantize(t, s);
    const int top = (1 << s.bits) - 1;
    for (auto c : q.codes) range_bad += c > top;

    const auto layout = group_layout(t.shape(), s.granularity);
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto ga = layout.group_of(a), gb = layout.group_of(b);
      return ga != gb ? ga < gb : t[a] < t[b];
    });
    for (std::size_t i = 1; i < order.size(); ++i)
      if (layout.group_of(order[i]) == layout.group_of(order[i - 1]))
        mono_bad += q.codes[order[i - 1]] > q.codes[order[i]];

    if (std::holds_alternative<Identity>(s.transform)) {
      const Tensor delta = quant_perturbation(t, s);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double step = q.scales[layout.group_of(i)];
        const double pre = std::nearbyint(static_cast<double>(t[i]) / step) + q.zero_points[layout.group_of(i)];
        if (pre < 0 || pre > top) continue;
        ++bound_checked;
        bound_bad += std::fabs(delta[i]) > step / 2 + 1e-6 * step;
      }
    }

    if (t.ndim() >= 2) {
      for (std::size_t axis = 0; axis < t.ndim(); ++axis) {
        QuantScheme per_tensor{s.bits, AbsmaxSymmetric{}, PerTensor{}, s.transform};
        QuantScheme per_channel{s.bits, AbsmaxSymmetric{}, PerChannel{axis}, s.transform};
        const float st = quantize(t, per_tensor).scales[0];
        for (float sc : quantize(t, per_channel).scales) {
          ++refine_checked;
          refine_bad += sc > st;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = range_bad == 0 && mono_bad == 0 && bound_bad == 0 && refine_bad == 0 && secs < 30;
  return {pass, fmt("1000 pairs; range %zu, monotonicity %zu, bound %zu/%zu, refinement %zu/%zu violations; %.1fs",
                    range_bad, mono_bad, bound_bad, bound_checked, refine_bad, refine_checked, secs)};
}

Outcome criterion2() {
  auto pairs = random_pairs(1000, 1);
  std::size_t bad_pairs = 0, bad = 0, bad_uniform_inside = 0, bad_clipped = 0, bad_power = 0, total = 0;
  for (const auto& [t, s] : pairs) {
    const Tensor fq = fake_quant(t, s), delta = quant_perturbation(t, s);
    const Tensor recon = sub(t, delta);
    bool pair_bad = std::memcmp(recon.data().data(), fq.data().data(), t.size() * sizeof(float)) != 0;
    const auto q = quantize(t, s);
    const int top = (1 << s.bits) - 1;
    for (std::size_t i = 0; i < t.size(); ++i) {
      ++total;
      if (recon[i] == fq[i] && fq[i] + delta[i] == t[i]) continue;
      pair_bad = true;
      ++bad;
      if (!std::holds_alternative<Identity>(s.transform)) ++bad_power;
      else if (q.codes[i] == 0 || q.codes[i] == top) ++bad_clipped;
      else ++bad_uniform_inside;
    }
    bad_pairs += pair_bad;
  }
  return {bad_pairs == 0,
          fmt("1000 pairs; %zu pairs violate t == fake_quant + delta; %zu/%zu elements "
              "(%zu SignedPower, %zu at an end code, %zu uniform interior)",
              bad_pairs, bad, total, bad_power, bad_clipped, bad_uniform_inside)};
}

Outcome criterion3() {
  RngStream rng(3);
  Tensor t = sample(Normal{}, {100000}, rng);
  const double amax = stats(t).absmax;
  std::vector<double> alphas{0.25 * amax, amax, 2 * amax, 4 * amax};
  auto rows = scale_sweep(t, QuantScheme{}, alphas);
  // direct computation as the oracle
  auto direct = [&](double alpha) {
    long double step = alpha / 128.0L, sq = 0;
    std::size_t clipped = 0;
    for (float v : t.data()) {
      long double c = oracle::rne(v / step) + 128;
      clipped += c < 0 || c > 255;
      c = std::clamp<long double>(c, 0, 255);
      const long double d = v - static_cast<float>((c - 128) * step);
      sq += d * d;
    }
    return std::pair<double, double>{static_cast<double>(std::sqrt(sq)), clipped / 1e5};
  };
  bool oracle_ok = true;
  for (const auto& r : rows) {
    auto [l2o, co] = direct(r.alpha);
    oracle_ok &= std::fabs(r.l2_delta - l2o) <= 1e-4 * l2o && r.clip_fraction == co;
  }
  const bool pass = oracle_ok && rows[1].l2_delta <= rows[2].l2_delta && rows[2].l2_delta <= rows[3].l2_delta &&
                    rows[0].clip_fraction > 0.2;
  return {pass, fmt("l2 at 1x/2x/4x = %.4g/%.4g/%.4g; clip_fraction at 0.25x = %.4f; oracle %s", rows[1].l2_delta,
                    rows[2].l2_delta, rows[3].l2_delta, rows[0].clip_fraction, oracle_ok ? "agrees" : "DISAGREES")};
}

Outcome criterion4() {
  // every injection-site matrix of the default toy model, plus a few generated tensors
  toy::ModelConfig cfg;
  const auto params = toy::init(cfg);
  std::vector<Tensor> mats;
  for (const auto& name : params.layout.site_names()) mats.push_back(params.get(name));
  RngStream rng(4);
  mats.push_back(sample(OutlierMixture{0.01, 50}, {256, 64}, rng));
  mats.push_back(sample(Laplace{0, 1}, {100000}, rng));
  const QuantScheme schemes[] = {toy::weight_scheme(8, false), toy::weight_scheme(4, true),
                                 QuantScheme{8, AbsmaxSymmetric{}, PerTensor{}, Identity{}}};
  const PerturbKind kinds[] = {GaussianDelta{}, UniformDelta{}, RademacherDelta{}, MagPosDelta{}, MagNegDelta{}};
  double worst = 0;
  std::size_t checked = 0;
  for (const auto& m : mats)
    for (const auto& s : schemes) {
      if (!std::holds_alternative<PerTensor>(s.granularity) && m.ndim() < 2) continue;
      const double native = l2(quant_perturbation(m, s));
      for (std::size_t k = 0; k < 5; ++k) {
        const double art = l2(gen_perturbation(m, PerturbSpec{kinds[k], MatchQuantL2{s}, 17 + k}));
        worst = std::max(worst, std::fabs(art - native) / native);
        ++checked;
      }
    }
  return {worst < 1e-6, fmt("%zu (matrix, scheme, kind) combinations; max relative l2 mismatch %.3g", checked, worst)};
}

Outcome criterion5() {
  RngStream rng(5);
  Tensor t = sample(Normal{}, {100000}, rng);
  const QuantScheme w8{};
  const double eps = 1e-3 * stats(t).absmax;
  Tensor pos = gen_perturbation(t, PerturbSpec{MagPosDelta{}, MatchQuantL2{w8}, 1});
  Tensor neg = gen_perturbation(t, PerturbSpec{MagNegDelta{}, MatchQuantL2{w8}, 1});
  std::vector<double> rp, rn;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0) rp.push_back(std::fabs(pos[i]) / std::fabs(t[i]));
    rn.push_back(std::fabs(neg[i]) * (std::fabs(t[i]) + eps));
  }
  auto spread = [](const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / *lo;
  };
  const double sp = spread(rp), sn = spread(rn);
  std::vector<float> at(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) at[i] = std::fabs(t[i]);
  std::string rhos;
  bool rho_ok = true;
  const std::pair<const char*, PerturbKind> kinds[] = {
      {"gaussian", GaussianDelta{}}, {"uniform", UniformDelta{}}, {"rademacher", RademacherDelta{}}};
  for (const auto& [name, kind] : kinds) {
    Tensor d = gen_perturbation(t, PerturbSpec{kind, MatchQuantL2{w8}, 2});
    std::vector<float> ad(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) ad[i] = std::fabs(d[i]);
    if (*std::min_element(ad.begin(), ad.end()) == *std::max_element(ad.begin(), ad.end())) {
      rhos += fmt(" %s undefined (|d| constant, no association)", name);
      continue;
    }
    const double rho = spearman(ad, at);
    rho_ok &= rho > -0.1 && rho < 0.1;
    rhos += fmt(" %s %.4f", name, rho);
  }
  return {sp < 1e-6 && sn < 1e-6 && rho_ok,
          fmt("MagPos |d|/|t| spread %.2g, MagNeg |d|(|t|+eps) spread %.2g; spearman(|d|,|t|):%s", sp, sn,
              rhos.c_str())};
}

Outcome criterion6() {
  RngStream rng(6);
  Tensor t = sample(Normal{}, {1000000}, rng);
  const double f3 = clip_fraction(t, 3), f5 = clip_fraction(t, 5);
  return {f3 >= 0.0022 && f3 <= 0.0032 && f5 < 1e-5,
          fmt("k=3: %.5f (2*Phi(-3) = %.5f), k=5: %.2g (2*Phi(-5) = %.2g); Gaussian tails exceed the <0.1%% "
              "reported for LLM tensors at k=3",
              f3, oracle::normal_two_sided_tail(3), f5, oracle::normal_two_sided_tail(5))};
}

Outcome criterion7() {
  bool ok = true;
  std::string detail;
  for (int bits : {4, 8}) {
    const int n = 1 << bits;
    QuantizedTensor q;
    q.shape = {static_cast<std::size_t>(n)};
    q.scheme = QuantScheme{bits, AbsmaxSymmetric{}, PerTensor{}, SignedPower{1.0 / 3.0}};
    for (int c = 0; c < n; ++c) q.codes.push_back(static_cast<std::uint8_t>(c));
    q.scales = {static_cast<float>(2.0 / n)};
    q.zero_points = {static_cast<std::uint16_t>(n / 2)};
    Tensor grid = dequantize(q);
    std::size_t violations = 0;
    // gaps ordered by the magnitude of their outer endpoint, on each side of zero
    for (int c = n / 2 + 1; c + 1 < n; ++c) violations += !(grid[c + 1] - grid[c] > grid[c] - grid[c - 1]);
    for (int c = n / 2 - 1; c - 1 >= 0; --c) violations += !(grid[c] - grid[c - 1] > grid[c + 1] - grid[c]);
    ok &= violations == 0;
    if (!detail.empty()) detail += "; ";
    detail += fmt("b=%d: %d points, %zu gap-order violations, smallest gap %.3g, largest %.3g", bits, n, violations,
                  grid[n / 2 + 1] - grid[n / 2], grid[1] - grid[0]);
  }
  return {ok, detail};
}

Outcome criterion8() {
  const auto t0 = Clock::now();
  RngStream rng(8);
  Tensor t = sample(Normal{}, {100000}, rng);
  const double amax = stats(t).absmax;
  Tensor du = quant_perturbation(t, QuantScheme{8, AbsmaxSymmetric{}, PerTensor{}, Identity{}});
  Tensor dn = quant_perturbation(t, QuantScheme{8, AbsmaxSymmetric{}, PerTensor{}, SignedPower{}});
  double su = 0, sn = 0, lu = 0, ln = 0;
  std::size_t cs = 0, cl = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double a = std::fabs(t[i]);
    if (a <= 0.1 * amax) su += std::fabs(du[i]), sn += std::fabs(dn[i]), ++cs;
    if (a >= 0.9 * amax) lu += std::fabs(du[i]), ln += std::fabs(dn[i]), ++cl;
  }
  su /= cs, sn /= cs, lu /= cl, ln /= cl;
  const double secs = seconds_since(t0);
  return {sn < su && ln > lu && secs < 5,
          fmt("|x|<=0.1 amax (n=%zu): power %.3g vs identity %.3g; |x|>=0.9 amax (n=%zu): power %.3g vs identity "
              "%.3g; %.2fs",
              cs, sn, su, cl, ln, lu, secs)};
}

Outcome criterion9() {
  toy::ModelConfig cfg;
  cfg.init_seed = 1;
  const auto params = toy::init(cfg);
  toy::TaskSpec task;
  toy::GradCheckOptions opt;
  const auto main = toy::grad_check(params, task, opt);
  opt.analytic = toy::Precision::kFloat64;
  const auto f64 = toy::grad_check(params, task, opt);
  opt.analytic = toy::Precision::kFloat32;
  opt.finite_difference = toy::Precision::kFloat32;
  const auto f32 = toy::grad_check(params, task, opt);
  return {main.coordinates >= 100 && main.max_rel_error < 1e-2,
          fmt("%zu coords, 32-bit analytic vs central difference: %.3g (64-bit both sides %.3g; 32-bit difference, "
              "informational: %.3g)",
              main.coordinates, main.max_rel_error, f64.max_rel_error, f32.max_rel_error)};
}

Outcome criterion10() {
  toy::ModelConfig cfg;
  cfg.init_seed = 0;
  toy::TaskSpec task;
  task.kind = toy::TaskKind::kCopy;
  const auto t0 = Clock::now();
  RngStream rng(1);
  const auto result = toy::train(toy::init(cfg), task, 2000, toy::OptimizerConfig{}, rng);
  const double secs = seconds_since(t0);
  const auto m = toy::evaluate(result.params, task, {}, 8, 0x5eed);
  return {m.accuracy >= 0.95 && secs < 600,
          fmt("2000 steps in %.0fs; loss %.3f -> %.4f; held-out accuracy %.4f, perplexity %.4f", secs,
              result.loss_curve.front(), result.loss_curve.back(), m.accuracy, m.perplexity)};
}

// ---------------------------------------------------------------------------
// criteria 11-14 read the harness CSVs

struct Row {
  std::string kind, transform, metric;
  std::uint64_t seed = 0;
  double baseline = 0, value = 0;
};

std::vector<Row> load_rows(const std::string& csv) {
  const auto t = harness::parse_csv(csv);
  std::vector<Row> rows;
  for (const auto& r : t.rows)
    rows.push_back({r[t.column("kind")], r[t.column("transform")], r[t.column("metric")],
                    std::stoull(r[t.column("seed")]), std::stod(r[t.column("baseline")]),
                    std::stod(r[t.column("value")])});
  return rows;
}

struct ToyRuns {
  fs::path dir;
  std::string figure2_csv, table1_csv;
  std::string error;
  double train_seconds = 0, figure2_seconds = 0;
};

ToyRuns& toy_runs(const fs::path& work) {
  static ToyRuns runs;
  static bool done = false;
  if (done) return runs;
  done = true;
  runs.dir = work / "toy";
  try {
    auto f2 = harness::preset_config("figure2");
    f2.output_dir = runs.dir.string();
    const harness::RunOptions quiet{true, {}};
    auto t0 = Clock::now();
    (void)harness::resolve_model(f2, quiet);
    runs.train_seconds = seconds_since(t0);
    t0 = Clock::now();
    auto r = harness::run(f2, quiet);
    runs.figure2_seconds = seconds_since(t0);
    if (r.failed()) runs.error = "figure2 run had failed trials";
    runs.figure2_csv = r.csv;
    auto t1 = harness::preset_config("table1");
    t1.output_dir = runs.dir.string();
    auto r1 = harness::run(t1, quiet);
    if (r1.failed()) runs.error = "table1 run had failed trials";
    runs.table1_csv = r1.csv;
  } catch (const std::exception& e) {
    runs.error = e.what();
  }
  return runs;
}

Outcome criterion11(const fs::path& work) {
  const auto& runs = toy_runs(work);
  if (!runs.error.empty()) return {false, runs.error};
  std::map<std::string, std::map<std::uint64_t, double>> acc;
  for (const auto& r : load_rows(runs.figure2_csv))
    if (r.metric == "accuracy") acc[r.kind][r.seed] = r.value;
  auto mean = [&](const std::string& k) {
    double s = 0;
    for (const auto& [seed, v] : acc[k]) s += v;
    return s / acc[k].size();
  };
  const double mp = mean("magpos"), g = mean("gaussian"), u = mean("uniform"), rd = mean("rademacher"),
               mn = mean("magneg");
  const bool order = mp >= g && mp >= u && mp >= rd && g >= mn && u >= mn && rd >= mn;
  std::size_t strict = 0;
  std::string per_seed;
  for (const auto& [seed, v] : acc["magneg"]) {
    const double others = std::min({acc["gaussian"][seed], acc["uniform"][seed], acc["rademacher"][seed], acc["magpos"][seed]});
    strict += v < others;
    per_seed += fmt(" %.4f/%.4f", v, others);
  }
  return {order && strict >= 3,
          fmt("model trained in %.0fs, grid ran in %.0fs; mean accuracy M+ %.4f, G %.4f, U %.4f, R %.4f, M- %.4f (order %s); M- strictly worst in %zu/4 seeds "
              "(M- vs lowest other kind per seed:%s)",
              runs.train_seconds, runs.figure2_seconds, mp, g, u, rd, mn, order ? "holds" : "violated", strict, per_seed.c_str())};
}

Outcome criterion12(const fs::path& work) {
  const auto& runs = toy_runs(work);
  if (!runs.error.empty()) return {false, runs.error};
  std::map<std::string, std::map<std::uint64_t, double>> drop;
  for (const auto& r : load_rows(runs.figure2_csv))
    if (r.metric == "accuracy") drop[r.kind][r.seed] = r.baseline - r.value;
  std::size_t wins = 0;
  std::string per_seed;
  for (const auto& [seed, d] : drop["clip:3"]) {
    wins += d > drop["gaussian"][seed];
    per_seed += fmt(" %.4f>%.4f", d, drop["gaussian"][seed]);
  }
  return {wins >= 3, fmt("accuracy drop clip(k=3) vs W8A8-matched Gaussian larger in %zu/4 seeds:%s", wins,
                         per_seed.c_str())};
}

Outcome criterion13(const fs::path& work) {
  const auto& runs = toy_runs(work);
  if (!runs.error.empty()) return {false, runs.error};
  std::map<std::uint64_t, std::map<std::string, double>> ppl;
  for (const auto& r : load_rows(runs.table1_csv))
    if (r.metric == "perplexity") ppl[r.seed][r.kind + "/" + r.transform] = r.value;
  std::size_t good = 0;
  std::string per_seed;
  for (auto& [seed, p] : ppl) {
    const double fp = p["FP/none"];
    const std::string power = to_string(Transform{SignedPower{}});
    const double w4u = p["W4A8/identity"], w4n = p["W4A8/" + power];
    const double w8u = p["W8A8/identity"], w8n = p["W8A8/" + power];
    const bool ok = w4n <= w4u && std::fabs(w8n - fp) <= 0.05 * fp && w8u > w8n;
    good += ok;
    per_seed += fmt(" [fp %.4f w8a8 %.4f/%.4f w4a8 %.4f/%.4f]", fp, w8u, w8n, w4u, w4n);
  }
  return {good >= 3 && ppl.size() == 4,
          fmt("conditions hold in %zu/4 seeds; perplexity uniform/non-uniform:%s", good, per_seed.c_str())};
}

Outcome criterion14(const fs::path& work) {
  const auto& runs = toy_runs(work);
  if (!runs.error.empty()) return {false, runs.error};
  auto f2 = harness::preset_config("figure2");
  f2.toy.checkpoint = (runs.dir / "checkpoint").string();
  f2.output_dir = (work / "toy-p8").string();
  f2.parallelism = 8;
  const auto toy = harness::run(f2, harness::RunOptions{true, {}});
  const bool toy_same = read_file(toy.csv_path) == runs.figure2_csv;

  harness::ExperimentConfig c;
  c.id = "determinism";
  c.kind = harness::ExperimentKind::kPerturbCompare;
  c.inputs.push_back(harness::InputSource{"w", "", Normal{0, 1}, {256, 128}, std::nullopt});
  c.schemes.push_back(QuantScheme{});
  c.perturbations = {"gaussian", "uniform", "rademacher", "magpos", "magneg", "clip:3"};
  c.n_seeds = 4;
  c.output_dir = (work / "p1").string();
  c.parallelism = 1;
  const auto a = harness::run(c);
  c.output_dir = (work / "p8").string();
  c.parallelism = 8;
  const auto b = harness::run(c);
  const bool tensor_same = read_file(a.csv_path) == read_file(b.csv_path);
  return {toy_same && tensor_same,
          fmt("figure2 preset CSV (%zu bytes) %s at parallelism 1 vs 8; tensor perturb-compare CSV (%zu bytes) %s",
              toy.csv.size(), toy_same ? "identical" : "DIFFERS", a.csv.size(), tensor_same ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "qlens-acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: acceptance [--work DIR] [--only N[,N...]]\n");
      return 64;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"quantizer correctness", criterion1},
      {"perturbation identity", criterion2},
      {"scale-sweep shape", criterion3},
      {"intensity matching", criterion4},
      {"magnitude laws", criterion5},
      {"clipping tails", criterion6},
      {"non-uniform bin structure", criterion7},
      {"non-uniform small-value advantage", criterion8},
      {"gradient check", criterion9},
      {"toy training (copy)", criterion10},
      {"perturbation ordering", [&] { return criterion11(work); }},
      {"clipping severity", [&] { return criterion12(work); }},
      {"non-uniform quantization on outlier model", [&] { return criterion13(work); }},
      {"harness determinism", [&] { return criterion14(work); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed;
}
