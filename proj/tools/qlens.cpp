// qlens command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qlens/error.hpp"
#include "qlens/harness/config.hpp"
#include "qlens/harness/csv.hpp"
#include "qlens/harness/experiment.hpp"
#include "qlens/harness/report.hpp"
#include "qlens/io_util.hpp"
#include "qlens/perturb.hpp"
#include "qlens/quant.hpp"
#include "qlens/tensor.hpp"
#include "qlens/tensor_io.hpp"
#include "qlens/toy/checkpoint.hpp"
#include "qlens/toy/injection.hpp"
#include "qlens/toy/model.hpp"
#include "qlens/toy/train.hpp"

namespace fs = std::filesystem;
using namespace qlens;
using harness::format_double;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flag values are converted inside usage(); a qlens::Error there is the
// caller's fault and exits with 1 rather than 2.
template <typename F>
auto usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

void print(const std::string& key, double v) { std::printf("%s: %s\n", key.c_str(), format_double(v).c_str()); }

Shape parse_shape(const std::string& text) {
  Shape s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == part.size() && !part.empty() && v > 0, ErrorKind::kInvalidArgument, "bad shape '" + text + "'");
    s.push_back(static_cast<std::size_t>(v));
  }
  require(!s.empty(), ErrorKind::kInvalidArgument, "empty shape");
  return s;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == text.size() && !text.empty() && std::isfinite(v), ErrorKind::kInvalidArgument,
          "bad " + what + " '" + text + "'");
  return v;
}

struct SchemeFlags {
  int bits = 8;
  std::string policy = "absmax";
  std::string granularity = "per-tensor";
  std::string transform = "identity";

  void add(CLI::App* app) {
    app->add_option("--bits", bits, "Bit width, 2..8")->capture_default_str();
    app->add_option("--policy", policy, "absmax | minmax | fixed:ALPHA")->capture_default_str();
    app->add_option("--granularity", granularity, "per-tensor | per-channel:AXIS | per-group:AXIS:SIZE")
        ->capture_default_str();
    app->add_option("--transform", transform, "identity | power[:P]")->capture_default_str();
  }
  QuantScheme scheme() const {
    QuantScheme s{bits, parse_policy(policy), parse_granularity(granularity), parse_transform(transform)};
    validate(s);
    return s;
  }
};

void report_quant(const Tensor& t, const QuantizeResult& r) {
  print("l2_delta", l2(sub(t, dequantize(r.tensor))));
  print("clip_fraction", static_cast<double>(r.clipped) / static_cast<double>(t.size()));
}

void print_eval(const toy::EvalMetrics& m) {
  print("ce_loss", m.ce_loss);
  print("perplexity", m.perplexity);
  print("accuracy", m.accuracy);
  std::printf("scored: %zu\n", m.scored);
}

std::function<void(const std::string&)> stderr_log(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlens: quantization and perturbation laboratory"};
  app.require_subcommand(1);
  std::function<int()> action;

  // gen
  std::string gen_dist = "normal:0,1", gen_shape, gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "Draw a tensor from a distribution");
  gen->add_option("--dist", gen_dist, "normal:MEAN,STD | uniform:LO,HI | laplace:MEAN,B | outlier:P,S")
      ->capture_default_str();
  gen->add_option("--shape", gen_shape, "Comma-separated extents")->required();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out, "QTNS output")->required();
  gen->callback([&] {
    action = [&] {
      const auto [dist, shape] = usage([&] { return std::pair{parse_dist(gen_dist), parse_shape(gen_shape)}; });
      RngStream rng(gen_seed);
      write_tensor(gen_out, sample(dist, shape, rng));
      return 0;
    };
  });

  // stats
  std::string stats_in;
  auto* st = app.add_subcommand("stats", "Summary statistics of a QTNS tensor");
  st->add_option("--in", stats_in)->required();
  st->callback([&] {
    action = [&] {
      const Tensor t = read_tensor(stats_in);
      const auto s = stats(t);
      std::printf("shape: %s\n", to_string(t.shape()).c_str());
      std::printf("count: %zu\n", s.count);
      print("mean", s.mean);
      print("std", s.std);
      print("min", s.min);
      print("max", s.max);
      print("absmax", s.absmax);
      print("l2norm", s.l2norm);
      print("kurtosis", s.kurtosis);
      return 0;
    };
  });

  // quantize
  std::string q_in, q_out;
  SchemeFlags q_flags;
  auto* qz = app.add_subcommand("quantize", "Quantize a QTNS tensor to QTNQ");
  qz->add_option("--in", q_in)->required();
  qz->add_option("--out", q_out, "QTNQ output (default: input with .qtnq)");
  q_flags.add(qz);
  qz->callback([&] {
    action = [&] {
      const QuantScheme scheme = usage([&] { return q_flags.scheme(); });
      const Tensor t = read_tensor(q_in);
      const auto r = quantize_with_report(t, scheme);
      const fs::path out = q_out.empty() ? fs::path(q_in).replace_extension(".qtnq") : fs::path(q_out);
      write_quantized(out, r.tensor);
      report_quant(t, r);
      return 0;
    };
  });

  // dequantize
  std::string dq_in, dq_out;
  auto* dq = app.add_subcommand("dequantize", "Dequantize a QTNQ file to QTNS");
  dq->add_option("--in", dq_in)->required();
  dq->add_option("--out", dq_out)->required();
  dq->callback([&] {
    action = [&] {
      write_tensor(dq_out, dequantize(read_quantized(dq_in)));
      return 0;
    };
  });

  // fake-quant
  std::string fq_in, fq_out;
  SchemeFlags fq_flags;
  auto* fq = app.add_subcommand("fake-quant", "Quantize and dequantize in one step");
  fq->add_option("--in", fq_in)->required();
  fq->add_option("--out", fq_out)->required();
  fq_flags.add(fq);
  fq->callback([&] {
    action = [&] {
      const QuantScheme scheme = usage([&] { return fq_flags.scheme(); });
      const Tensor t = read_tensor(fq_in);
      const auto r = quantize_with_report(t, scheme);
      write_tensor(fq_out, dequantize(r.tensor));
      report_quant(t, r);
      return 0;
    };
  });

  // perturb
  std::string p_in, p_out, p_delta_out, p_kind = "gaussian", p_intensity = "match-l2";
  std::uint64_t p_seed = 0;
  SchemeFlags p_flags;
  auto* pt = app.add_subcommand("perturb", "Add an artificial perturbation");
  pt->add_option("--in", p_in)->required();
  pt->add_option("--out", p_out, "Perturbed tensor")->required();
  pt->add_option("--delta-out", p_delta_out, "Also write the perturbation itself");
  pt->add_option("--kind", p_kind, "gaussian | uniform | rademacher | magpos | magneg[:EPS] | clip:K[:one-sided]")
      ->capture_default_str();
  pt->add_option("--intensity", p_intensity,
                 "match-l2 | match-variance (against --bits etc.) | l2:TARGET | match-clip:K | none")
      ->capture_default_str();
  pt->add_option("--seed", p_seed)->capture_default_str();
  p_flags.add(pt);
  pt->callback([&] {
    action = [&] {
      const PerturbSpec spec = usage([&] {
        PerturbSpec s{parse_kind(p_kind), std::nullopt, p_seed};
        if (p_intensity == "match-l2") {
          if (!std::holds_alternative<ClipDelta>(s.kind)) s.intensity = MatchQuantL2{p_flags.scheme()};
        } else if (p_intensity == "match-variance") {
          if (!std::holds_alternative<ClipDelta>(s.kind)) s.intensity = MatchQuantVariance{p_flags.scheme()};
        } else if (p_intensity.rfind("l2:", 0) == 0) {
          s.intensity = FixedL2{parse_number(p_intensity.substr(3), "l2 target")};
        } else if (p_intensity.rfind("match-clip:", 0) == 0) {
          s.intensity = MatchClipL2{parse_number(p_intensity.substr(11), "clip k")};
        } else if (p_intensity != "none") {
          fail(ErrorKind::kInvalidArgument, "unknown intensity '" + p_intensity + "'");
        }
        for (const auto& w : validate(s)) std::fprintf(stderr, "warning: %s\n", w.c_str());
        return s;
      });
      const Tensor t = read_tensor(p_in);
      const Tensor delta = gen_perturbation(t, spec);
      write_tensor(p_out, add(t, delta));
      if (!p_delta_out.empty()) write_tensor(p_delta_out, delta);
      print("l2_delta", l2(delta));
      return 0;
    };
  });

  // sweep-scale
  std::string sw_in, sw_out, sw_alphas = "0.25x,0.5x,1x,2x,4x";
  SchemeFlags sw_flags;
  auto* sw = app.add_subcommand("sweep-scale", "l2(delta) and clip fraction over scale factors");
  sw->add_option("--in", sw_in)->required();
  sw->add_option("--alphas", sw_alphas, "Ascending list; a trailing x is relative to alpha_max")
      ->capture_default_str();
  sw->add_option("--out", sw_out, "CSV output (default: stdout)");
  sw_flags.add(sw);
  sw->callback([&] {
    action = [&] {
      const auto [scheme, alpha_text] = usage([&] {
        auto s = sw_flags.scheme();
        auto a = split(sw_alphas, ',');
        require(!a.empty(), ErrorKind::kInvalidArgument, "--alphas is empty");
        return std::pair{s, a};
      });
      const Tensor t = read_tensor(sw_in);
      const double amax = stats(forward_transform(t, scheme.transform)).absmax;
      std::vector<double> alphas;
      usage([&] {
        for (const auto& a : alpha_text) {
          const bool rel = !a.empty() && a.back() == 'x';
          const double v = parse_number(rel ? a.substr(0, a.size() - 1) : a, "alpha");
          require(v > 0, ErrorKind::kInvalidArgument, "alphas must be positive");
          alphas.push_back(rel ? v * amax : v);
        }
        for (std::size_t i = 1; i < alphas.size(); ++i)
          require(alphas[i - 1] <= alphas[i], ErrorKind::kInvalidArgument, "alphas must be ascending");
        return 0;
      });
      require(amax > 0, ErrorKind::kNumerical, "alpha_max is zero");
      harness::CsvTable table{{"alpha", "l2_delta", "clip_fraction"}, {}};
      for (const auto& r : scale_sweep(t, scheme, alphas))
        table.rows.push_back({format_double(r.alpha), format_double(r.l2_delta), format_double(r.clip_fraction)});
      const std::string csv = harness::to_csv(table);
      if (sw_out.empty())
        std::fwrite(csv.data(), 1, csv.size(), stdout);
      else
        write_file_atomic(sw_out, csv);
      return 0;
    };
  });

  // train-toy
  toy::ModelConfig tr_model;
  toy::OptimizerConfig tr_opt;
  std::string tr_task = "copy", tr_out;
  std::size_t tr_steps = 2000, tr_eval_batches = 8;
  std::uint64_t tr_data_seed = 1;
  bool tr_quiet = false;
  auto* tr = app.add_subcommand("train-toy", "Train the toy decoder and save a checkpoint");
  tr->add_option("--task", tr_task, "copy | induction | modadd")->capture_default_str();
  tr->add_option("--steps", tr_steps)->capture_default_str();
  tr->add_option("--seed", tr_model.init_seed, "Initialization seed")->capture_default_str();
  tr->add_option("--data-seed", tr_data_seed)->capture_default_str();
  tr->add_option("--lr", tr_opt.lr)->capture_default_str();
  tr->add_option("--batch", tr_opt.batch)->capture_default_str();
  tr->add_option("--grad-clip", tr_opt.grad_clip)->capture_default_str();
  tr->add_option("--layers", tr_model.layers)->capture_default_str();
  tr->add_option("--d-model", tr_model.d_model)->capture_default_str();
  tr->add_option("--heads", tr_model.heads)->capture_default_str();
  tr->add_option("--ffn-dim", tr_model.ffn_dim)->capture_default_str();
  tr->add_option("--vocab", tr_model.vocab)->capture_default_str();
  tr->add_option("--context", tr_model.context)->capture_default_str();
  tr->add_option("--eval-batches", tr_eval_batches)->capture_default_str();
  tr->add_option("--out", tr_out, "Checkpoint directory")->required();
  tr->add_flag("--quiet", tr_quiet);
  tr->callback([&] {
    action = [&] {
      const toy::TaskSpec task = usage([&] {
        toy::validate(tr_model);
        toy::TaskSpec t;
        t.kind = toy::parse_task_kind(tr_task);
        t.seq_len = tr_model.context;
        toy::validate(t, tr_model);
        require(tr_steps >= 1, ErrorKind::kInvalidArgument, "--steps must be >= 1");
        return t;
      });
      RngStream rng(tr_data_seed);
      const auto log = stderr_log(tr_quiet);
      const auto r = toy::train(toy::init(tr_model), task, tr_steps, tr_opt, rng, [&](std::size_t s, double loss) {
        if (log && (s + 1) % 100 == 0) log("step " + std::to_string(s + 1) + " loss " + format_double(loss));
      });
      nlohmann::json meta = {{"task", harness::task_to_json(task)},
                             {"steps", tr_steps},
                             {"data_seed", tr_data_seed},
                             {"optimizer", harness::optimizer_to_json(tr_opt)},
                             {"loss_curve", r.loss_curve}};
      toy::save_checkpoint(tr_out, r.params, meta);
      print("final_loss", r.loss_curve.back());
      print_eval(toy::evaluate(r.params, task, {}, tr_eval_batches, 0x5eed));
      return 0;
    };
  });

  // eval-toy
  std::string ev_ckpt, ev_task = "copy", ev_preset = "fp", ev_outliers;
  bool ev_nonuniform = false;
  std::size_t ev_batches = 8;
  std::uint64_t ev_seed = 0x5eed;
  auto* ev = app.add_subcommand("eval-toy", "Evaluate a checkpoint, optionally under a quantization preset");
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--task", ev_task)->capture_default_str();
  ev->add_option("--preset", ev_preset, "fp | w4a16 | w8a8 | w4a8")->capture_default_str();
  ev->add_flag("--non-uniform", ev_nonuniform, "Signed cube-root transform around the quantizer");
  ev->add_option("--outliers", ev_outliers, "FACTOR:FRACTION:SEED function-preserving outlier channels");
  ev->add_option("--batches", ev_batches)->capture_default_str();
  ev->add_option("--eval-seed", ev_seed)->capture_default_str();
  ev->callback([&] {
    action = [&] {
      const auto kind = usage([&] { return toy::parse_task_kind(ev_task); });
      std::optional<std::tuple<double, double, std::uint64_t>> outliers;
      if (!ev_outliers.empty()) {
        outliers = usage([&] {
          const auto parts = split(ev_outliers, ':');
          require(parts.size() == 3, ErrorKind::kInvalidArgument, "--outliers wants FACTOR:FRACTION:SEED");
          return std::tuple{parse_number(parts[0], "factor"), parse_number(parts[1], "fraction"),
                            static_cast<std::uint64_t>(parse_number(parts[2], "seed"))};
        });
      }
      toy::ModelParams params = toy::load_checkpoint(ev_ckpt).params;
      toy::TaskSpec task;
      task.kind = kind;
      task.seq_len = params.config.context;
      if (outliers)
        params = toy::inject_outliers(params, std::get<0>(*outliers), std::get<1>(*outliers), std::get<2>(*outliers));
      const toy::InjectionPlan plan =
          usage([&] { return toy::make_preset(toy::parse_preset(ev_preset), ev_nonuniform, params.config); });
      print_eval(toy::evaluate(params, task, plan, ev_batches, ev_seed));
      return 0;
    };
  });

  // experiment
  std::string ex_config, ex_preset, ex_out, ex_ckpt;
  std::size_t ex_seeds = 0, ex_par = 0;
  std::uint64_t ex_base_seed = 0;
  bool ex_quiet = false;
  auto* ex = app.add_subcommand("experiment", "Run an experiment grid from a JSON config or a preset");
  auto* ex_cfg_opt = ex->add_option("--config", ex_config, "JSON experiment config");
  ex->add_option("--preset", ex_preset, "figure2 | figure3 | table1")->excludes(ex_cfg_opt);
  ex->add_option("--seeds", ex_seeds, "Override n_seeds");
  auto* ex_base_opt = ex->add_option("--base-seed", ex_base_seed, "Override base_seed");
  ex->add_option("--out", ex_out, "Override output_dir");
  ex->add_option("--parallelism", ex_par, "Override the worker count");
  ex->add_option("--checkpoint", ex_ckpt, "Toy checkpoint for model experiments");
  ex->add_flag("--quiet", ex_quiet);
  ex->callback([&] {
    action = [&] {
      harness::ExperimentConfig cfg = usage([&] {
        require(ex_config.empty() != ex_preset.empty(), ErrorKind::kInvalidArgument,
                "give exactly one of --config or --preset");
        return ex_preset.empty() ? harness::ExperimentConfig{} : harness::preset_config(ex_preset);
      });
      if (!ex_config.empty()) cfg = harness::load_config(ex_config);
      usage([&] {
        if (ex_seeds) cfg.n_seeds = ex_seeds;
        if (ex_base_opt->count()) cfg.base_seed = ex_base_seed;
        if (!ex_out.empty()) cfg.output_dir = ex_out;
        if (ex_par) cfg.parallelism = ex_par;
        if (!ex_ckpt.empty()) cfg.toy.checkpoint = ex_ckpt;
        harness::validate(cfg);
        return 0;
      });
      const auto r = harness::run(cfg, {true, stderr_log(ex_quiet)});
      std::printf("csv: %s\n", r.csv_path.string().c_str());
      std::printf("manifest: %s\n", r.manifest_path.string().c_str());
      std::printf("trials: %zu failed: %zu\n", r.trials.size(), r.failed());
      if (const auto e = r.first_error()) return *e == ErrorKind::kNumerical ? 3 : 2;
      return 0;
    };
  });

  // report
  std::vector<std::string> rp_in;
  std::string rp_out = "report";
  auto* rp = app.add_subcommand("report", "Summarize result CSVs into mean ± std tables and .dat files");
  rp->add_option("--in", rp_in, "Result CSV files")->required();
  rp->add_option("--out", rp_out)->capture_default_str();
  rp->callback([&] {
    action = [&] {
      std::vector<harness::CsvTable> tables;
      for (const auto& p : rp_in) tables.push_back(harness::parse_csv(read_file(p)));
      for (const auto& p : harness::write_report(harness::summarize(tables), rp_out))
        std::printf("%s\n", p.string().c_str());
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return e.kind() == ErrorKind::kNumerical ? 3 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
