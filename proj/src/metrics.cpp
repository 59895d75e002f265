#include "qlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qlens/error.hpp"

namespace qlens {

BucketReport bucketed_error(const Tensor& x, const Tensor& delta, std::size_t n_buckets) {
  if (x.shape() != delta.shape())
    fail(ErrorKind::kShapeMismatch,
         "shape mismatch: " + to_string(x.shape()) + " vs " + to_string(delta.shape()));
  require(n_buckets >= 2, ErrorKind::kInvalidArgument, "n_buckets must be >= 2");
  require(!x.empty(), ErrorKind::kEmptyInput, "empty input");
  const std::size_t n = x.size();
  require(n_buckets <= n, ErrorKind::kInvalidArgument, "more buckets than elements");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(x[i]) < std::abs(x[j]); });

  BucketReport report;
  report.eps_r = 1e-8 * stats(x).absmax;
  report.buckets.resize(n_buckets);
  report.edges.resize(n_buckets + 1);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    const std::size_t lo = b * n / n_buckets, hi = (b + 1) * n / n_buckets;
    Bucket& bk = report.buckets[b];
    bk.count = hi - lo;
    double sum_abs = 0, sum_rel = 0;
    for (std::size_t r = lo; r < hi; ++r) {
      const std::size_t i = order[r];
      const double d = std::abs(static_cast<double>(delta[i]));
      sum_abs += d;
      // an all-zero x leaves eps_r = 0; zero error is then zero relative error
      const double denom = std::abs(static_cast<double>(x[i])) + report.eps_r;
      sum_rel += denom > 0 ? d / denom : 0.0;
      bk.max_abs_delta = std::max(bk.max_abs_delta, d);
    }
    bk.mean_abs_delta = bk.count ? sum_abs / static_cast<double>(bk.count) : 0.0;
    bk.mean_rel_error = bk.count ? sum_rel / static_cast<double>(bk.count) : 0.0;
    bk.lo = std::abs(x[order[lo]]);
    bk.hi = std::abs(x[order[hi - 1]]);
    report.edges[b] = bk.lo;
  }
  report.edges[n_buckets] = report.buckets.back().hi;
  return report;
}

namespace {

std::vector<double> average_ranks(std::span<const float> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), ErrorKind::kShapeMismatch, "spearman: length mismatch");
  require(a.size() >= 2, ErrorKind::kInvalidArgument, "spearman: need at least two values");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) fail(ErrorKind::kNumerical, "spearman: constant input has no rank correlation");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(const Tensor& a, const Tensor& b) { return spearman(a.data(), b.data()); }

double kl_logits(const Tensor& p_logits, const Tensor& q_logits) {
  if (p_logits.shape() != q_logits.shape())
    fail(ErrorKind::kShapeMismatch,
         "shape mismatch: " + to_string(p_logits.shape()) + " vs " + to_string(q_logits.shape()));
  require(!p_logits.empty(), ErrorKind::kEmptyInput, "empty input");
  const std::size_t v = p_logits.shape().back();
  const std::size_t rows = p_logits.size() / v;
  const auto p = p_logits.data(), q = q_logits.data();
  double total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* pr = p.data() + r * v;
    const float* qr = q.data() + r * v;
    const double pmax = *std::max_element(pr, pr + v), qmax = *std::max_element(qr, qr + v);
    double pz = 0, qz = 0;
    for (std::size_t i = 0; i < v; ++i) {
      pz += std::exp(pr[i] - pmax);
      qz += std::exp(qr[i] - qmax);
    }
    const double plz = std::log(pz), qlz = std::log(qz);
    double kl = 0;
    for (std::size_t i = 0; i < v; ++i) {
      const double lp = pr[i] - pmax - plz, lq = qr[i] - qmax - qlz;
      kl += std::exp(lp) * (lp - lq);
    }
    total += std::max(kl, 0.0);
  }
  return total / static_cast<double>(rows);
}

DegradationRow degradation(std::string setting, std::string metric, double baseline, double value,
                           std::uint64_t seed) {
  return {std::move(setting), std::move(metric), baseline, value, value - baseline, seed};
}

}  // namespace qlens
