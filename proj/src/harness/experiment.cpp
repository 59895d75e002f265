#include "qlens/harness/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <thread>

#include "qlens/harness/csv.hpp"
#include "qlens/io_util.hpp"
#include "qlens/perturb.hpp"
#include "qlens/quant.hpp"
#include "qlens/rng.hpp"
#include "qlens/tensor_io.hpp"
#include "qlens/toy/checkpoint.hpp"
#include "qlens/toy/injection.hpp"
#include "qlens/toy/model.hpp"
#include "qlens/toy/train.hpp"

namespace qlens::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

Tensor load_input(const InputSource& in, std::uint64_t seed) {
  if (!in.path.empty()) return read_tensor(in.path);
  RngStream rng(in.seed ? *in.seed : seed);
  return sample(*in.dist, in.shape, rng);
}

double pick(const toy::EvalMetrics& m, const std::string& metric) {
  if (metric == "accuracy") return m.accuracy;
  if (metric == "perplexity") return m.perplexity;
  return m.ce_loss;
}

// Immutable state shared by all trials of a run.
struct Context {
  const ExperimentConfig& config;
  std::optional<toy::ModelParams> model;
};

toy::ModelParams model_for(const Context& ctx, std::uint64_t seed) {
  const auto& o = ctx.config.toy.outliers;
  if (!o) return *ctx.model;
  return toy::inject_outliers(*ctx.model, o->factor, o->fraction, o->per_seed ? seed : o->seed);
}

toy::EvalMetrics eval(const Context& ctx, const toy::ModelParams& params, const toy::InjectionPlan& plan,
                      std::uint64_t eval_seed) {
  const auto& t = ctx.config.toy;
  return toy::evaluate(params, t.task, plan, t.eval_batches, eval_seed, t.eval_batch_size);
}

void metric_rows(TrialResult& r, const std::vector<std::string>& metrics, const toy::EvalMetrics& base,
                 const toy::EvalMetrics& value) {
  for (const auto& m : metrics) r.rows.push_back(degradation(r.point.kind, m, pick(base, m), pick(value, m), r.seed));
}

void run_kernel_trial(const Context& ctx, TrialResult& r, const InputSource& in, const QuantScheme& scheme) {
  const Tensor x = load_input(in, r.seed);
  const auto q = quantize_with_report(x, scheme);
  const Tensor delta = sub(x, dequantize(q.tensor));
  const auto report = bucketed_error(x, delta, 10);
  const auto add = [&](const char* metric, double v) { r.rows.push_back(degradation(r.point.kind, metric, 0.0, v, r.seed)); };
  add("l2_delta", l2(delta));
  add("clip_fraction", static_cast<double>(q.clipped) / static_cast<double>(x.size()));
  add("max_abs_delta", stats(delta).absmax);
  add("mean_abs_delta_low", report.buckets.front().mean_abs_delta);
  add("mean_abs_delta_high", report.buckets.back().mean_abs_delta);
  (void)ctx;
}

double resolve_alpha(const std::string& text, double alpha_max) {
  std::size_t used = 0;
  double v = 0;
  const bool relative = !text.empty() && (text.back() == 'x' || text.back() == 'X');
  const std::string num = relative ? text.substr(0, text.size() - 1) : text;
  try {
    v = std::stod(num, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == num.size() && !num.empty() && std::isfinite(v) && v > 0, ErrorKind::kInvalidArgument,
          "bad alpha '" + text + "'");
  return relative ? v * alpha_max : v;
}

void run_scale_trial(TrialResult& r, const InputSource& in, const QuantScheme& scheme, const std::string& alpha) {
  const Tensor x = load_input(in, r.seed);
  const double amax = stats(forward_transform(x, scheme.transform)).absmax;
  require(amax > 0, ErrorKind::kNumerical, "alpha_max is zero for input '" + in.name + "'");
  const double a = resolve_alpha(alpha, amax);
  const double both[] = {std::min(a, amax), std::max(a, amax)};
  const auto rows = scale_sweep(x, scheme, both);
  const auto& base = a <= amax ? rows[1] : rows[0];
  const auto& at = a <= amax ? rows[0] : rows[1];
  r.rows.push_back(degradation(r.point.kind, "l2_delta", base.l2_delta, at.l2_delta, r.seed));
  r.rows.push_back(degradation(r.point.kind, "clip_fraction", base.clip_fraction, at.clip_fraction, r.seed));
}

PerturbSpec make_spec(const ExperimentConfig& c, const PerturbChoice& ch, int bits, bool weight, std::uint64_t seed) {
  PerturbSpec spec{ch.kind, std::nullopt, seed};
  if (ch.clip_match) {
    spec.intensity = MatchClipL2{*ch.clip_match};
  } else if (!std::holds_alternative<ClipDelta>(ch.kind)) {
    const QuantScheme s = weight ? toy::weight_scheme(bits, false) : toy::activation_scheme(bits, false);
    if (c.intensity == "variance")
      spec.intensity = MatchQuantVariance{s};
    else
      spec.intensity = MatchQuantL2{s};
  }
  return spec;
}

void run_tensor_perturb_trial(const Context& ctx, TrialResult& r, const InputSource& in, const PerturbChoice& ch) {
  const Tensor x = load_input(in, r.seed);
  PerturbSpec spec{ch.kind, std::nullopt, r.seed};
  if (ch.clip_match) {
    spec.intensity = MatchClipL2{*ch.clip_match};
  } else if (!std::holds_alternative<ClipDelta>(ch.kind)) {
    const QuantScheme s = ctx.config.schemes.empty() ? QuantScheme{ctx.config.bits_w} : ctx.config.schemes.front();
    if (ctx.config.intensity == "variance")
      spec.intensity = MatchQuantVariance{s};
    else
      spec.intensity = MatchQuantL2{s};
  }
  const Tensor delta = gen_perturbation(x, spec);
  r.rows.push_back(degradation(r.point.kind, "l2_delta", 0.0, l2(delta), r.seed));
  std::vector<float> ad(x.size()), ax(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ad[i] = std::abs(delta[i]);
    ax[i] = std::abs(x[i]);
  }
  try {
    r.rows.push_back(degradation(r.point.kind, "spearman_abs", 0.0, spearman(ad, ax), r.seed));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumerical) throw;  // constant |delta|: no rank correlation
  }
}

void run_toy_perturb_trial(const Context& ctx, TrialResult& r, const PerturbChoice& ch) {
  const auto& c = ctx.config;
  const toy::ModelParams params = model_for(ctx, r.seed);
  toy::InjectionPlan plan;
  const bool weights = c.site_scope != SiteScope::kActivations;
  const bool acts = c.site_scope != SiteScope::kWeights && (c.bits_a > 0 || ch.clip_match ||
                                                           std::holds_alternative<ClipDelta>(ch.kind));
  for (const auto& site : params.layout.site_names()) {
    if (weights) plan.weights[site] = toy::PerturbAction{make_spec(c, ch, c.bits_w, true, r.seed)};
    if (acts) plan.activations[site] = toy::PerturbAction{make_spec(c, ch, c.bits_a, false, r.seed)};
  }
  const auto base = eval(ctx, params, {}, c.toy.eval_seed);
  const auto value = eval(ctx, params, plan, c.toy.eval_seed);
  metric_rows(r, c.metrics, base, value);
}

toy::InjectionPlan quant_plan(const std::string& preset, const Transform& transform, const toy::ModelConfig& mc) {
  toy::InjectionPlan plan = toy::make_preset(toy::parse_preset(preset), false, mc);
  for (auto* side : {&plan.weights, &plan.activations})
    for (auto& [site, action] : *side)
      if (auto* q = std::get_if<toy::QuantizeAction>(&action)) q->scheme.transform = transform;
  return plan;
}

void run_quant_trial(const Context& ctx, TrialResult& r, const std::string& preset) {
  const auto& c = ctx.config;
  const toy::ModelParams params = model_for(ctx, r.seed);
  const auto base = eval(ctx, params, {}, c.toy.eval_seed);
  if (preset == "fp") {
    metric_rows(r, c.metrics, base, base);
    return;
  }
  const auto plan = quant_plan(preset, parse_transform(r.point.transform), params.config);
  metric_rows(r, c.metrics, base, eval(ctx, params, plan, c.toy.eval_seed));
}

void run_train_trial(const Context& ctx, TrialResult& r, const RunOptions& opt) {
  const auto& c = ctx.config;
  toy::ModelConfig mc = c.train.model;
  mc.init_seed = r.seed;
  const toy::ModelParams init = toy::init(mc);
  RngStream rng(substream_seed(r.seed, c.train.data_seed));
  const auto result = toy::train(init, c.toy.task, c.train.steps, c.train.optimizer, rng);
  const auto before = eval(ctx, init, {}, c.toy.eval_seed);
  const auto after = eval(ctx, result.params, {}, c.toy.eval_seed);
  metric_rows(r, c.metrics, before, after);
  const std::size_t tail = std::min<std::size_t>(100, result.loss_curve.size());
  double mean_tail = 0;
  for (std::size_t i = result.loss_curve.size() - tail; i < result.loss_curve.size(); ++i)
    mean_tail += result.loss_curve[i];
  r.rows.push_back(degradation(r.point.kind, "train_loss", result.loss_curve.front(),
                               mean_tail / static_cast<double>(tail), r.seed));
  if (opt.write_files) {
    json meta = {{"task", task_to_json(c.toy.task)},
                 {"steps", c.train.steps},
                 {"seed", r.seed},
                 {"optimizer", optimizer_to_json(c.train.optimizer)},
                 {"loss_curve", result.loss_curve}};
    toy::save_checkpoint(fs::path(c.output_dir) / (c.id + "-model-" + std::to_string(r.replicate)), result.params,
                         meta);
  }
}

void run_eval_trial(const Context& ctx, TrialResult& r) {
  const auto& c = ctx.config;
  const toy::ModelParams params = model_for(ctx, r.seed);
  const double v = static_cast<double>(params.config.vocab);
  toy::EvalMetrics uniform;
  uniform.ce_loss = std::log(v);
  uniform.perplexity = v;
  uniform.accuracy = 1.0 / v;
  metric_rows(r, c.metrics, uniform, eval(ctx, params, {}, r.seed));
}

void run_trial(const Context& ctx, TrialResult& r, const RunOptions& opt) {
  const auto& c = ctx.config;
  const std::size_t per_input = [&] {
    switch (c.kind) {
      case ExperimentKind::kKernelSweep: return c.schemes.size();
      case ExperimentKind::kScaleSweep: return c.schemes.size() * c.alphas.size();
      case ExperimentKind::kPerturbCompare: return c.perturbations.size();
      default: return std::size_t{1};
    }
  }();
  const std::size_t g = r.index / c.n_seeds;
  switch (c.kind) {
    case ExperimentKind::kKernelSweep:
      run_kernel_trial(ctx, r, c.inputs[g / per_input], c.schemes[g % per_input]);
      break;
    case ExperimentKind::kScaleSweep: {
      const std::size_t local = g % per_input;
      run_scale_trial(r, c.inputs[g / per_input], c.schemes[local / c.alphas.size()],
                      c.alphas[local % c.alphas.size()]);
      break;
    }
    case ExperimentKind::kPerturbCompare:
      if (c.inputs.empty())
        run_toy_perturb_trial(ctx, r, parse_choice(c.perturbations[g]));
      else
        run_tensor_perturb_trial(ctx, r, c.inputs[g / per_input], parse_choice(c.perturbations[g % per_input]));
      break;
    case ExperimentKind::kQuantCompare: {
      std::string preset = r.point.kind;
      std::transform(preset.begin(), preset.end(), preset.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      run_quant_trial(ctx, r, preset);
      break;
    }
    case ExperimentKind::kToyTrain:
      run_train_trial(ctx, r, opt);
      break;
    case ExperimentKind::kToyEval:
      run_eval_trial(ctx, r);
      break;
  }
}

bool uses_model(const ExperimentConfig& c) {
  return c.kind == ExperimentKind::kQuantCompare || c.kind == ExperimentKind::kToyEval ||
         (c.kind == ExperimentKind::kPerturbCompare && c.inputs.empty());
}

json trial_json(const TrialResult& t) {
  json j = {{"index", t.index},
            {"replicate", t.replicate},
            {"seed", t.seed},
            {"site_scope", t.point.site_scope},
            {"kind", t.point.kind},
            {"bits_w", t.point.bits_w},
            {"bits_a", t.point.bits_a},
            {"transform", t.point.transform},
            {"rows", t.rows.size()},
            {"wall_seconds", t.wall_seconds},
            {"status", t.error_kind ? "failed" : "ok"}};
  if (t.error_kind) {
    j["error_kind"] = to_string(*t.error_kind);
    j["error"] = t.error;
  }
  return j;
}

}  // namespace

std::size_t RunResult::failed() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const TrialResult& t) { return t.error_kind.has_value(); }));
}

std::optional<ErrorKind> RunResult::first_error() const {
  for (const auto& t : trials)
    if (t.error_kind) return t.error_kind;
  return std::nullopt;
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t replicate) {
  return substream_seed(base_seed, replicate);
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& c) {
  std::vector<GridPoint> grid;
  switch (c.kind) {
    case ExperimentKind::kKernelSweep:
      for (const auto& in : c.inputs)
        for (const auto& s : c.schemes)
          grid.push_back({in.name, to_string(s.policy) + "/" + to_string(s.granularity), s.bits, 0,
                          to_string(s.transform)});
      break;
    case ExperimentKind::kScaleSweep:
      for (const auto& in : c.inputs)
        for (const auto& s : c.schemes)
          for (const auto& a : c.alphas)
            grid.push_back({in.name, "alpha:" + a, s.bits, 0, to_string(s.transform)});
      break;
    case ExperimentKind::kPerturbCompare: {
      const auto point = [&](const std::string& scope, const std::string& p) {
        const auto ch = parse_choice(p);
        const bool matched_to_quant = !ch.clip_match && !std::holds_alternative<ClipDelta>(ch.kind);
        const int bw = matched_to_quant && c.site_scope != SiteScope::kActivations ? c.bits_w : 0;
        const int ba = matched_to_quant && c.site_scope != SiteScope::kWeights ? c.bits_a : 0;
        return GridPoint{scope, p, bw, ba, "identity"};
      };
      if (c.inputs.empty()) {
        for (const auto& p : c.perturbations) grid.push_back(point(to_string(c.site_scope), p));
      } else {
        for (const auto& in : c.inputs)
          for (const auto& p : c.perturbations) {
            GridPoint gp = point(in.name, p);
            gp.bits_a = 0;
            if (gp.bits_w) gp.bits_w = c.schemes.empty() ? c.bits_w : c.schemes.front().bits;
            grid.push_back(gp);
          }
      }
      break;
    }
    case ExperimentKind::kQuantCompare:
      for (const auto& p : c.presets) {
        if (p == "fp") {
          grid.push_back({"all", "FP", 0, 0, "none"});
          continue;
        }
        const auto preset = toy::parse_preset(p);
        const int bw = preset == toy::Preset::kW8A8 ? 8 : 4;
        const int ba = preset == toy::Preset::kW4A16 ? 0 : 8;
        for (const auto& t : c.transforms) grid.push_back({"all", upper(p), bw, ba, to_string(parse_transform(t))});
      }
      break;
    case ExperimentKind::kToyTrain:
      grid.push_back({"all", "train", 0, 0, "identity"});
      break;
    case ExperimentKind::kToyEval:
      grid.push_back({"all", "fp", 0, 0, "identity"});
      break;
  }
  return grid;
}

std::string results_csv(const ExperimentConfig& c, const std::vector<TrialResult>& trials) {
  CsvTable t;
  t.header = result_columns();
  for (const auto& tr : trials) {
    for (const auto& row : tr.rows) {
      t.rows.push_back({c.id, c.preset, tr.point.site_scope, tr.point.kind, std::to_string(tr.point.bits_w),
                        std::to_string(tr.point.bits_a), tr.point.transform, std::to_string(tr.seed), row.metric,
                        format_double(row.baseline), format_double(row.value), format_double(row.delta)});
    }
  }
  return to_csv(t);
}

toy::ModelParams resolve_model(const ExperimentConfig& c, const RunOptions& opt) {
  if (!c.toy.checkpoint.empty()) return toy::load_checkpoint(c.toy.checkpoint).params;
  const fs::path dir = fs::path(c.output_dir) / "checkpoint";
  if (fs::exists(dir / "manifest.json")) {
    if (opt.log) opt.log("reusing model " + dir.string());
    return toy::load_checkpoint(dir).params;
  }
  if (opt.log) opt.log("training default model into " + dir.string());
  const toy::ModelParams init = toy::init(c.train.model);
  RngStream rng(c.train.data_seed);
  const auto log = opt.log;
  const auto result = toy::train(init, c.toy.task, c.train.steps, c.train.optimizer, rng,
                                 [&](std::size_t step, double loss) {
                                   if (log && (step + 1) % 250 == 0)
                                     log("step " + std::to_string(step + 1) + " loss " + format_double(loss));
                                 });
  json meta = {{"task", task_to_json(c.toy.task)},
               {"steps", c.train.steps},
               {"data_seed", c.train.data_seed},
               {"optimizer", optimizer_to_json(c.train.optimizer)},
               {"loss_curve", result.loss_curve}};
  toy::save_checkpoint(dir, result.params, meta);
  return result.params;
}

RunResult run(const ExperimentConfig& c, const RunOptions& opt) {
  validate(c);
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  if (opt.write_files) {
    std::error_code ec;
    fs::create_directories(c.output_dir, ec);
    require(!ec && fs::is_directory(c.output_dir), ErrorKind::kIo,
            "cannot create output directory '" + c.output_dir + "'");
  }
  Context ctx{c, std::nullopt};
  if (uses_model(c)) {
    ctx.model = resolve_model(c, opt);
    validate(c.toy.task, ctx.model->config);
  }

  const auto grid = expand_grid(c);
  RunResult result;
  result.trials.resize(grid.size() * c.n_seeds);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t rep = 0; rep < c.n_seeds; ++rep) {
      auto& t = result.trials[g * c.n_seeds + rep];
      t.index = g * c.n_seeds + rep;
      t.replicate = rep;
      t.point = grid[g];
      t.seed = trial_seed(c.base_seed, rep);
    }
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&](bool single_threaded) {
    if (single_threaded) omp_set_num_threads(1);
    for (std::size_t i = next++; i < result.trials.size(); i = next++) {
      auto& t = result.trials[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        run_trial(ctx, t, opt);
      } catch (const Error& e) {
        t.rows.clear();
        t.error_kind = e.kind();
        t.error = e.what();
      } catch (const std::exception& e) {
        t.rows.clear();
        t.error_kind = ErrorKind::kInvalidArgument;
        t.error = e.what();
      }
      t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (opt.log)
        opt.log("trial " + std::to_string(i + 1) + "/" + std::to_string(result.trials.size()) + " " + t.point.kind +
                (t.error_kind ? " failed: " + t.error : ""));
    }
  };
  const std::size_t n_workers = std::min(c.parallelism, result.trials.size());
  if (n_workers <= 1) {
    worker(false);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker, true);
    for (auto& th : pool) th.join();
  }

  result.csv = results_csv(c, result.trials);
  if (opt.write_files) {
    result.csv_path = fs::path(c.output_dir) / (c.id + ".csv");
    result.manifest_path = fs::path(c.output_dir) / (c.id + ".json");
    write_file_atomic(result.csv_path, result.csv);
    json manifest = {{"format", "qlens-run-manifest"},
                     {"version", 1},
                     {"config", to_json(c)},
                     {"started_at", started},
                     {"finished_at", utc_now()},
                     {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                     {"csv", result.csv_path.filename().string()},
                     {"failed_trials", result.failed()}};
    manifest["trials"] = json::array();
    for (const auto& t : result.trials) manifest["trials"].push_back(trial_json(t));
    write_file_atomic(result.manifest_path, manifest.dump(2) + "\n");
  }
  return result;
}

}  // namespace qlens::harness
