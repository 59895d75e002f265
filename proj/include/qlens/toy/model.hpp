#pragma once

#include <cstdint>
#include <vector>

#include "qlens/rng.hpp"
#include "qlens/tensor.hpp"
#include "qlens/toy/config.hpp"
#include "qlens/toy/injection.hpp"
#include "qlens/toy/task.hpp"

namespace qlens::toy {

inline constexpr double kInitStd = 0.02;

/// Gaussian init with std 0.02; wo and ffn.w_out additionally scaled by
/// 1/sqrt(2 L). Layernorm gains are 1 and biases 0.
ModelParams init(const ModelConfig& config, RngStream& rng);
ModelParams init(const ModelConfig& config);  // seeded from config.init_seed

/// Logits [batch, seq_len, vocab] of a pre-norm decoder. Weight actions are
/// applied to a copy of the weights; activation actions are applied per call,
/// with `call_index` salting the perturbation streams.
Tensor forward(const ModelParams& params, const Batch& batch, const InjectionPlan& plan,
               std::uint64_t call_index = 0);
Tensor forward(const ModelParams& params, const Batch& batch);

/// Forward with weight actions already applied (see apply_weight_actions).
Tensor forward_prepared(const ModelParams& prepared, const Batch& batch, const InjectionPlan& plan,
                        std::uint64_t call_index);

/// Attention probabilities [layers, batch, heads, seq, seq] of the plain forward.
std::vector<float> attention_probs(const ModelParams& params, const Batch& batch);

struct LossAndGrad {
  double loss = 0;          // mean cross-entropy over scored positions
  std::size_t scored = 0;
  std::vector<double> grad;  // same layout as params.values
};

/// Mean cross-entropy and its exact gradient, in float32 (`Real` = float) or
/// float64 arithmetic.
template <class Real>
LossAndGrad loss_and_grad(const ModelParams& params, const Batch& batch);

/// Mean cross-entropy only. `Real` as above.
template <class Real>
double loss_only(const ModelParams& params, const std::vector<double>& values, const Batch& batch);

}  // namespace qlens::toy
