#include "qlens/toy/train.hpp"

#include <algorithm>
#include <cmath>

#include "qlens/error.hpp"
#include "qlens/toy/model.hpp"

namespace qlens::toy {

TrainResult train(const ModelParams& params, const TaskSpec& task, std::size_t steps,
                  const OptimizerConfig& opt, RngStream& rng, const StepCallback& on_step) {
  validate(task, params.config);
  require(opt.lr > 0 && opt.batch > 0, ErrorKind::kInvalidArgument, "lr and batch must be positive");
  require(opt.beta1 >= 0 && opt.beta1 < 1 && opt.beta2 >= 0 && opt.beta2 < 1, ErrorKind::kInvalidArgument,
          "Adam betas must be in [0, 1)");
  TrainResult result{params, {}};
  result.loss_curve.reserve(steps);
  const std::size_t n = params.values.size();
  std::vector<double> m(n, 0.0), v(n, 0.0);
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t step = 0; step < steps; ++step) {
    const Batch batch = make_batch(task, params.config, opt.batch, rng);
    LossAndGrad lg = loss_and_grad<float>(result.params, batch);
    if (!std::isfinite(lg.loss))
      fail(ErrorKind::kNumerical, "training diverged at step " + std::to_string(step) + " (loss is not finite)");
    result.loss_curve.push_back(lg.loss);

    double scale = 1.0;
    if (opt.grad_clip > 0) {
      double sq = 0;
      for (double g : lg.grad) sq += g * g;
      const double norm = std::sqrt(sq);
      if (norm > opt.grad_clip) scale = opt.grad_clip / norm;
    }
    b1t *= opt.beta1;
    b2t *= opt.beta2;
    const double lr_t = opt.lr * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = lg.grad[i] * scale;
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      result.params.values[i] =
          static_cast<float>(result.params.values[i] - lr_t * m[i] / (std::sqrt(v[i]) + opt.eps));
    }
    if (on_step) on_step(step, lg.loss);
  }
  return result;
}

EvalMetrics evaluate(const ModelParams& params, const TaskSpec& task, const InjectionPlan& plan,
                     std::size_t n_batches, std::uint64_t eval_seed, std::size_t batch_size) {
  validate(task, params.config);
  validate(plan, params.config);
  require(n_batches > 0 && batch_size > 0, ErrorKind::kInvalidArgument, "n_batches and batch size must be positive");
  const ModelParams prepared = plan.weights.empty() ? params : apply_weight_actions(params, plan);
  RngStream rng(eval_seed);
  const std::size_t vocab = params.config.vocab;
  double total = 0;
  std::size_t hits = 0, scored = 0;
  for (std::size_t bi = 0; bi < n_batches; ++bi) {
    const Batch batch = make_batch(task, params.config, batch_size, rng);
    const Tensor logits = forward_prepared(prepared, batch, plan, bi);
    const auto x = logits.data();
    for (std::size_t r = 0; r < batch.targets.size(); ++r) {
      const auto target = batch.targets[r];
      if (target == kIgnore) continue;
      const float* row = x.data() + r * vocab;
      const auto argmax = static_cast<std::int32_t>(std::max_element(row, row + vocab) - row);
      const double mx = row[argmax];
      double z = 0;
      for (std::size_t j = 0; j < vocab; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
      total += std::log(z) + mx - static_cast<double>(row[target]);
      hits += argmax == target;
      ++scored;
    }
  }
  EvalMetrics m;
  m.scored = scored;
  m.ce_loss = scored ? total / static_cast<double>(scored) : 0.0;
  m.perplexity = std::exp(m.ce_loss);
  m.accuracy = scored ? static_cast<double>(hits) / static_cast<double>(scored) : 0.0;
  return m;
}

GradCheckResult grad_check(const ModelParams& params, const TaskSpec& task, const GradCheckOptions& o) {
  validate(task, params.config);
  require(o.coordinates > 0 && o.step > 0, ErrorKind::kInvalidArgument, "grad_check needs coordinates and a step");
  RngStream rng(o.seed);
  const Batch batch = make_batch(task, params.config, o.batch, rng);
  const bool a64 = o.analytic == Precision::kFloat64;
  const bool f64 = o.finite_difference == Precision::kFloat64;
  const LossAndGrad lg = a64 ? loss_and_grad<double>(params, batch) : loss_and_grad<float>(params, batch);

  std::vector<std::size_t> coords;
  const auto sites = params.layout.site_names();
  for (std::size_t i = 0; i < o.coordinates; ++i) {
    const auto& e = params.layout.at(sites[i % sites.size()]);
    coords.push_back(e.offset + rng.below(numel(e.shape)));
  }

  std::vector<double> values(params.values.begin(), params.values.end());
  std::vector<double> analytic, numeric;
  for (std::size_t c : coords) {
    const double w = values[c];
    // in float32 the representable step differs slightly from the requested one
    const double w_up = f64 ? w + o.step : static_cast<float>(w + o.step);
    const double w_dn = f64 ? w - o.step : static_cast<float>(w - o.step);
    values[c] = w_up;
    const double up = f64 ? loss_only<double>(params, values, batch) : loss_only<float>(params, values, batch);
    values[c] = w_dn;
    const double dn = f64 ? loss_only<double>(params, values, batch) : loss_only<float>(params, values, batch);
    values[c] = w;
    analytic.push_back(lg.grad[c]);
    numeric.push_back((up - dn) / (w_up - w_dn));
  }

  GradCheckResult r;
  r.coordinates = coords.size();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double err = std::abs(analytic[i] - numeric[i]);
    const double denom = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    r.max_abs_error = std::max(r.max_abs_error, err);
    if (denom > 0) r.max_rel_error = std::max(r.max_rel_error, err / denom);
  }
  return r;
}

}  // namespace qlens::toy
