#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qlens/rng.hpp"
#include "qlens/toy/config.hpp"
#include "qlens/toy/injection.hpp"
#include "qlens/toy/task.hpp"

namespace qlens::toy {

struct OptimizerConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 32;
  double grad_clip = 0;  // global-norm clip; 0 disables
};

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve;  // one entry per optimizer step
};

using StepCallback = std::function<void(std::size_t step, double loss)>;

/// Adam on mean cross-entropy. Batches come from `rng`; deterministic given
/// its seed. Throws kNumerical if the loss becomes non-finite.
TrainResult train(const ModelParams& params, const TaskSpec& task, std::size_t steps,
                  const OptimizerConfig& optimizer, RngStream& rng, const StepCallback& on_step = {});

struct EvalMetrics {
  double ce_loss = 0;
  double perplexity = 0;  // exp(ce_loss)
  double accuracy = 0;    // argmax hit rate over scored positions
  std::size_t scored = 0;
};

/// Mean over `n_batches` batches drawn from a stream seeded with `eval_seed`.
/// Weight actions are applied once; activation actions per batch.
EvalMetrics evaluate(const ModelParams& params, const TaskSpec& task, const InjectionPlan& plan,
                     std::size_t n_batches, std::uint64_t eval_seed, std::size_t batch_size = 32);

enum class Precision { kFloat32, kFloat64 };

struct GradCheckOptions {
  std::size_t coordinates = 128;  // sampled across all injection sites
  double step = 1e-3;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  Precision analytic = Precision::kFloat32;
  Precision finite_difference = Precision::kFloat64;
};

struct GradCheckResult {
  double max_rel_error = 0;
  double max_abs_error = 0;
  std::size_t coordinates = 0;
};

/// Compares the analytic gradient with central differences
/// (L(w + h e_i) - L(w - h e_i)) / 2h on random site coordinates.
/// Each side runs the forward at its own precision. A float32 finite difference
/// cannot resolve gradients below roughly 1e-4 at h = 1e-3, so the default pairs
/// the float32 analytic gradient with a float64 difference.
/// Relative error is |g - fd| / max(|g|, |fd|); coordinates where both are zero are skipped.
GradCheckResult grad_check(const ModelParams& params, const TaskSpec& task, const GradCheckOptions& options);

}  // namespace qlens::toy
