#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qlens/tensor.hpp"

namespace qlens {

struct Bucket {
  double lo = 0;  // |x| range covered by the bucket
  double hi = 0;
  std::size_t count = 0;
  double mean_abs_delta = 0;
  double mean_rel_error = 0;  // mean |delta| / (|x| + eps_r)
  double max_abs_delta = 0;
};

/// Error of `delta` grouped by equal-count quantile buckets of |x|.
struct BucketReport {
  std::vector<double> edges;  // n_buckets + 1 non-decreasing |x| values
  std::vector<Bucket> buckets;
  double eps_r = 0;
};

BucketReport bucketed_error(const Tensor& x, const Tensor& delta, std::size_t n_buckets = 10);

/// Spearman rank correlation with average ranks for ties. Throws on constant input.
double spearman(std::span<const float> a, std::span<const float> b);
double spearman(const Tensor& a, const Tensor& b);

/// Mean over rows of KL(softmax(p) || softmax(q)); the last axis holds the logits.
double kl_logits(const Tensor& p_logits, const Tensor& q_logits);

struct DegradationRow {
  std::string setting;
  std::string metric;
  double baseline = 0;
  double value = 0;
  double delta = 0;  // value - baseline
  std::uint64_t seed = 0;
};

DegradationRow degradation(std::string setting, std::string metric, double baseline, double value,
                           std::uint64_t seed);

}  // namespace qlens
