#include "qlens/toy/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "qlens/error.hpp"
#include "qlens/kernels.hpp"

namespace qlens::toy {

namespace k = kernels::omp;

namespace {

using Index = std::ptrdiff_t;
constexpr double kLnEps = 1e-5;

struct LayerOffsets {
  std::size_t ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w_in, w_out;
};

struct Offsets {
  std::size_t tok, pos, lnf_g, lnf_b, head;
  std::vector<LayerOffsets> layers;

  explicit Offsets(const ParamLayout& layout, std::size_t n_layers) {
    const auto off = [&](const std::string& n) { return layout.at(n).offset; };
    tok = off(names::kTokEmbed);
    pos = off(names::kPosEmbed);
    lnf_g = off(names::kFinalGain);
    lnf_b = off(names::kFinalBias);
    head = off(names::kHead);
    for (std::size_t l = 0; l < n_layers; ++l)
      layers.push_back({off(names::ln1_gain(l)), off(names::ln1_bias(l)), off(names::wq(l)),
                        off(names::wk(l)), off(names::wv(l)), off(names::wo(l)),
                        off(names::ln2_gain(l)), off(names::ln2_bias(l)), off(names::ffn_in(l)),
                        off(names::ffn_out(l))});
  }
};

/// Called with the input of a site's matmul, [rows, cols], before use.
template <class Real>
using ActivationHook = std::function<void(const std::string& site, std::vector<Real>& x, std::size_t rows,
                                          std::size_t cols)>;

template <class Real>
struct LayerCache {
  std::vector<Real> xhat1, rstd1, h1, q, k, v, probs, attn, xhat2, rstd2, h2, u, g;
};

template <class Real>
Real gelu(Real x) {
  return Real(0.5) * x * (Real(1) + std::erf(x * Real(std::numbers::sqrt2 / 2)));
}

template <class Real>
Real gelu_grad(Real x) {
  const Real cdf = Real(0.5) * (Real(1) + std::erf(x * Real(std::numbers::sqrt2 / 2)));
  const Real pdf = std::exp(Real(-0.5) * x * x) * Real(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + x * pdf;
}

/// Pre-norm decoder with a hand-written reverse pass.
template <class Real>
class Net {
 public:
  Net(const ModelConfig& cfg, const ParamLayout& layout, const Real* p)
      : c_(cfg), off_(layout, cfg.layers), p_(p) {}

  /// Fills logits_ [N, V]. Caches what backward() needs when no hook is set.
  void forward(const Batch& b, const ActivationHook<Real>* hook) {
    b_ = b.batch;
    t_ = b.seq_len;
    n_ = b_ * t_;
    const std::size_t d = c_.d_model;
    for (auto tok : b.tokens)
      require(tok >= 0 && static_cast<std::size_t>(tok) < c_.vocab, ErrorKind::kInvalidArgument,
              "token id " + std::to_string(tok) + " out of range for vocab " + std::to_string(c_.vocab));
    require(t_ <= c_.context, ErrorKind::kInvalidArgument, "sequence longer than model context");

    std::vector<Real> x(n_ * d);
    for (std::size_t r = 0; r < n_; ++r) {
      const Real* te = p_ + off_.tok + static_cast<std::size_t>(b.tokens[r]) * d;
      const Real* pe = p_ + off_.pos + (r % t_) * d;
      for (std::size_t j = 0; j < d; ++j) x[r * d + j] = te[j] + pe[j];
    }

    cache_.assign(c_.layers, {});
    for (std::size_t l = 0; l < c_.layers; ++l) {
      const LayerOffsets& lo = off_.layers[l];
      LayerCache<Real>& lc = cache_[l];
      layer_norm(x, p_ + lo.ln1_g, p_ + lo.ln1_b, lc.xhat1, lc.rstd1, lc.h1);
      lc.q = project(lc.h1, names::wq(l), lo.wq, d, d, hook);
      lc.k = project(lc.h1, names::wk(l), lo.wk, d, d, hook);
      lc.v = project(lc.h1, names::wv(l), lo.wv, d, d, hook);
      attention(lc);
      const std::vector<Real> y = project(lc.attn, names::wo(l), lo.wo, d, d, hook);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];

      layer_norm(x, p_ + lo.ln2_g, p_ + lo.ln2_b, lc.xhat2, lc.rstd2, lc.h2);
      lc.u = project(lc.h2, names::ffn_in(l), lo.w_in, d, c_.ffn_dim, hook);
      lc.g.resize(lc.u.size());
#pragma omp parallel for schedule(static) if (lc.u.size() >= (1 << 14))
      for (Index i = 0; i < static_cast<Index>(lc.u.size()); ++i) lc.g[i] = gelu(lc.u[i]);
      const std::vector<Real> y2 = project(lc.g, names::ffn_out(l), lo.w_out, c_.ffn_dim, d, hook);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += y2[i];
    }
    layer_norm(x, p_ + off_.lnf_g, p_ + off_.lnf_b, xhatf_, rstdf_, hf_);
    logits_ = project(hf_, names::kHead, off_.head, d, c_.vocab, hook);
  }

  const std::vector<Real>& logits() const noexcept { return logits_; }

  std::vector<Real> probs_of_layer(std::size_t l) const { return cache_.at(l).probs; }

  /// Mean cross-entropy over scored positions, accumulated in double.
  double loss(const Batch& b, std::size_t& scored) const {
    const std::size_t v = c_.vocab;
    double total = 0;
    scored = 0;
    for (std::size_t r = 0; r < n_; ++r) {
      if (b.targets[r] == kIgnore) continue;
      const Real* row = logits_.data() + r * v;
      const double mx = *std::max_element(row, row + v);
      double z = 0;
      for (std::size_t j = 0; j < v; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
      total += std::log(z) + mx - static_cast<double>(row[b.targets[r]]);
      ++scored;
    }
    return scored ? total / static_cast<double>(scored) : 0.0;
  }

  /// Gradient of loss() with respect to every parameter, written to `grad`.
  void backward(const Batch& b, Real* grad) {
    const std::size_t d = c_.d_model, v = c_.vocab, f = c_.ffn_dim;
    std::fill(grad, grad + total_params(), Real(0));

    std::size_t scored = 0;
    for (auto t : b.targets) scored += t != kIgnore;
    std::vector<Real> dlogits(n_ * v, Real(0));
    if (scored > 0) {
      const Real inv = Real(1) / static_cast<Real>(scored);
#pragma omp parallel for schedule(static)
      for (Index r = 0; r < static_cast<Index>(n_); ++r) {
        if (b.targets[r] == kIgnore) continue;
        const Real* row = logits_.data() + r * v;
        Real* dr = dlogits.data() + r * v;
        const Real mx = *std::max_element(row, row + v);
        Real z = 0;
        for (std::size_t j = 0; j < v; ++j) {
          dr[j] = std::exp(row[j] - mx);
          z += dr[j];
        }
        for (std::size_t j = 0; j < v; ++j) dr[j] = dr[j] / z * inv;
        dr[b.targets[r]] -= inv;
      }
    }

    k::matmul_tn(hf_.data(), dlogits.data(), grad + off_.head, n_, d, v, true);
    std::vector<Real> dh(n_ * d);
    k::matmul_nt(dlogits.data(), p_ + off_.head, dh.data(), n_, v, d, false);
    std::vector<Real> dx(n_ * d, Real(0));
    layer_norm_backward(dh, xhatf_, rstdf_, p_ + off_.lnf_g, grad + off_.lnf_g, grad + off_.lnf_b, dx);

    for (std::size_t li = c_.layers; li-- > 0;) {
      const LayerOffsets& lo = off_.layers[li];
      LayerCache<Real>& lc = cache_[li];

      // x_out = x_mid + gelu(LN2(x_mid) W_in) W_out
      k::matmul_tn(lc.g.data(), dx.data(), grad + lo.w_out, n_, f, d, true);
      std::vector<Real> du(n_ * f);
      k::matmul_nt(dx.data(), p_ + lo.w_out, du.data(), n_, d, f, false);
#pragma omp parallel for schedule(static) if (du.size() >= (1 << 14))
      for (Index i = 0; i < static_cast<Index>(du.size()); ++i) du[i] *= gelu_grad(lc.u[i]);
      k::matmul_tn(lc.h2.data(), du.data(), grad + lo.w_in, n_, d, f, true);
      k::matmul_nt(du.data(), p_ + lo.w_in, dh.data(), n_, f, d, false);
      layer_norm_backward(dh, lc.xhat2, lc.rstd2, p_ + lo.ln2_g, grad + lo.ln2_g, grad + lo.ln2_b, dx);

      // x_mid = x_in + attn(LN1(x_in)) W_o
      k::matmul_tn(lc.attn.data(), dx.data(), grad + lo.wo, n_, d, d, true);
      std::vector<Real> dattn(n_ * d);
      k::matmul_nt(dx.data(), p_ + lo.wo, dattn.data(), n_, d, d, false);
      std::vector<Real> dq(n_ * d, Real(0)), dk(n_ * d, Real(0)), dv(n_ * d, Real(0));
      attention_backward(lc, dattn, dq, dk, dv);
      k::matmul_tn(lc.h1.data(), dq.data(), grad + lo.wq, n_, d, d, true);
      k::matmul_tn(lc.h1.data(), dk.data(), grad + lo.wk, n_, d, d, true);
      k::matmul_tn(lc.h1.data(), dv.data(), grad + lo.wv, n_, d, d, true);
      k::matmul_nt(dq.data(), p_ + lo.wq, dh.data(), n_, d, d, false);
      k::matmul_nt(dk.data(), p_ + lo.wk, dh.data(), n_, d, d, true);
      k::matmul_nt(dv.data(), p_ + lo.wv, dh.data(), n_, d, d, true);
      layer_norm_backward(dh, lc.xhat1, lc.rstd1, p_ + lo.ln1_g, grad + lo.ln1_g, grad + lo.ln1_b, dx);
    }

    for (std::size_t r = 0; r < n_; ++r) {
      Real* gt = grad + off_.tok + static_cast<std::size_t>(b.tokens[r]) * d;
      Real* gp = grad + off_.pos + (r % t_) * d;
      for (std::size_t j = 0; j < d; ++j) {
        gt[j] += dx[r * d + j];
        gp[j] += dx[r * d + j];
      }
    }
  }

 private:
  std::size_t total_params() const { return ParamLayout(c_).total(); }

  std::vector<Real> project(const std::vector<Real>& in, const std::string& site, std::size_t w_off,
                            std::size_t rows_in, std::size_t cols_out, const ActivationHook<Real>* hook) {
    std::vector<Real> out(n_ * cols_out);
    if (hook && *hook) {
      std::vector<Real> a = in;
      (*hook)(site, a, n_, rows_in);
      k::matmul(a.data(), p_ + w_off, out.data(), n_, rows_in, cols_out, false);
    } else {
      k::matmul(in.data(), p_ + w_off, out.data(), n_, rows_in, cols_out, false);
    }
    return out;
  }

  void layer_norm(const std::vector<Real>& x, const Real* gain, const Real* bias, std::vector<Real>& xhat,
                  std::vector<Real>& rstd, std::vector<Real>& out) const {
    const std::size_t d = c_.d_model;
    xhat.resize(n_ * d);
    rstd.resize(n_);
    out.resize(n_ * d);
#pragma omp parallel for schedule(static) if (n_ * d >= (1 << 14))
    for (Index r = 0; r < static_cast<Index>(n_); ++r) {
      const Real* xr = x.data() + r * d;
      double mean = 0, var = 0;
      for (std::size_t j = 0; j < d; ++j) mean += xr[j];
      mean /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
      var /= static_cast<double>(d);
      const auto rs = static_cast<Real>(1.0 / std::sqrt(var + kLnEps));
      rstd[r] = rs;
      for (std::size_t j = 0; j < d; ++j) {
        const Real xh = (xr[j] - static_cast<Real>(mean)) * rs;
        xhat[r * d + j] = xh;
        out[r * d + j] = xh * gain[j] + bias[j];
      }
    }
  }

  /// dx += LN backward of dh; gain/bias gradients accumulate.
  void layer_norm_backward(const std::vector<Real>& dh, const std::vector<Real>& xhat,
                           const std::vector<Real>& rstd, const Real* gain, Real* dgain, Real* dbias,
                           std::vector<Real>& dx) const {
    const std::size_t d = c_.d_model;
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t j = 0; j < d; ++j) {
        dgain[j] += dh[r * d + j] * xhat[r * d + j];
        dbias[j] += dh[r * d + j];
      }
#pragma omp parallel for schedule(static) if (n_ * d >= (1 << 14))
    for (Index r = 0; r < static_cast<Index>(n_); ++r) {
      double m1 = 0, m2 = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double dxh = static_cast<double>(dh[r * d + j]) * gain[j];
        m1 += dxh;
        m2 += dxh * xhat[r * d + j];
      }
      m1 /= static_cast<double>(d);
      m2 /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        const double dxh = static_cast<double>(dh[r * d + j]) * gain[j];
        dx[r * d + j] += static_cast<Real>(rstd[r] * (dxh - m1 - xhat[r * d + j] * m2));
      }
    }
  }

  void attention(LayerCache<Real>& lc) const {
    const std::size_t d = c_.d_model, h = c_.heads, dh = c_.head_dim();
    const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
    lc.probs.assign(b_ * h * t_ * t_, Real(0));
    lc.attn.assign(n_ * d, Real(0));
#pragma omp parallel for schedule(static) collapse(2)
    for (Index bi = 0; bi < static_cast<Index>(b_); ++bi)
      for (Index hi = 0; hi < static_cast<Index>(h); ++hi) {
        Real* pr = lc.probs.data() + (bi * h + hi) * t_ * t_;
        for (std::size_t i = 0; i < t_; ++i) {
          const Real* qi = lc.q.data() + (bi * t_ + i) * d + hi * dh;
          Real* row = pr + i * t_;
          Real mx = -std::numeric_limits<Real>::infinity();
          for (std::size_t j = 0; j <= i; ++j) {
            const Real* kj = lc.k.data() + (bi * t_ + j) * d + hi * dh;
            Real s = 0;
            for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
            row[j] = s * scale;
            mx = std::max(mx, row[j]);
          }
          Real z = 0;
          for (std::size_t j = 0; j <= i; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
          }
          Real* out = lc.attn.data() + (bi * t_ + i) * d + hi * dh;
          for (std::size_t j = 0; j <= i; ++j) {
            row[j] /= z;
            const Real* vj = lc.v.data() + (bi * t_ + j) * d + hi * dh;
            for (std::size_t c = 0; c < dh; ++c) out[c] += row[j] * vj[c];
          }
        }
      }
  }

  void attention_backward(const LayerCache<Real>& lc, const std::vector<Real>& dattn, std::vector<Real>& dq,
                          std::vector<Real>& dk, std::vector<Real>& dv) const {
    const std::size_t d = c_.d_model, h = c_.heads, dh = c_.head_dim();
    const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
#pragma omp parallel for schedule(static) collapse(2)
    for (Index bi = 0; bi < static_cast<Index>(b_); ++bi)
      for (Index hi = 0; hi < static_cast<Index>(h); ++hi) {
        const Real* pr = lc.probs.data() + (bi * h + hi) * t_ * t_;
        std::vector<Real> dp(t_);
        for (std::size_t i = 0; i < t_; ++i) {
          const Real* doi = dattn.data() + (bi * t_ + i) * d + hi * dh;
          const Real* row = pr + i * t_;
          Real dot = 0;
          for (std::size_t j = 0; j <= i; ++j) {
            const Real* vj = lc.v.data() + (bi * t_ + j) * d + hi * dh;
            Real* dvj = dv.data() + (bi * t_ + j) * d + hi * dh;
            Real s = 0;
            for (std::size_t c = 0; c < dh; ++c) {
              s += doi[c] * vj[c];
              dvj[c] += row[j] * doi[c];
            }
            dp[j] = s;
            dot += s * row[j];
          }
          const Real* qi = lc.q.data() + (bi * t_ + i) * d + hi * dh;
          Real* dqi = dq.data() + (bi * t_ + i) * d + hi * dh;
          for (std::size_t j = 0; j <= i; ++j) {
            const Real ds = row[j] * (dp[j] - dot) * scale;
            const Real* kj = lc.k.data() + (bi * t_ + j) * d + hi * dh;
            Real* dkj = dk.data() + (bi * t_ + j) * d + hi * dh;
            for (std::size_t c = 0; c < dh; ++c) {
              dqi[c] += ds * kj[c];
              dkj[c] += ds * qi[c];
            }
          }
        }
      }
  }

  ModelConfig c_;
  Offsets off_;
  const Real* p_;
  std::size_t b_ = 0, t_ = 0, n_ = 0;
  std::vector<LayerCache<Real>> cache_;
  std::vector<Real> xhatf_, rstdf_, hf_, logits_;
};

template <class Real>
std::vector<Real> convert(std::span<const float> v) {
  return std::vector<Real>(v.begin(), v.end());
}

void check_batch(const ModelParams& params, const Batch& batch) {
  require(batch.batch > 0 && batch.seq_len > 0 && batch.tokens.size() == batch.batch * batch.seq_len &&
              batch.targets.size() == batch.tokens.size(),
          ErrorKind::kInvalidArgument, "malformed batch");
  require(batch.seq_len <= params.config.context, ErrorKind::kInvalidArgument,
          "sequence longer than model context");
}

}  // namespace

ModelParams init(const ModelConfig& config, RngStream& rng) {
  ModelParams params(config);
  const double resid_std = kInitStd / std::sqrt(2.0 * static_cast<double>(config.layers));
  for (const auto& e : params.layout.entries()) {
    auto v = params.view(e.name);
    if (e.shape.size() == 1) {
      const bool gain = e.name.ends_with(".gain");
      std::fill(v.begin(), v.end(), gain ? 1.0f : 0.0f);
      continue;
    }
    const bool resid = e.name.ends_with("attn.wo") || e.name.ends_with("ffn.w_out");
    const double std = resid ? resid_std : kInitStd;
    for (auto& x : v) x = static_cast<float>(std * rng.normal());
  }
  return params;
}

ModelParams init(const ModelConfig& config) {
  RngStream rng(config.init_seed);
  return init(config, rng);
}

Tensor forward_prepared(const ModelParams& prepared, const Batch& batch, const InjectionPlan& plan,
                        std::uint64_t call_index) {
  check_batch(prepared, batch);
  const auto sites = prepared.layout.site_names();
  ActivationHook<float> hook;
  if (!plan.activations.empty()) {
    hook = [&](const std::string& site, std::vector<float>& x, std::size_t rows, std::size_t cols) {
      const auto it = plan.activations.find(site);
      if (it == plan.activations.end() || std::holds_alternative<NoAction>(it->second)) return;
      const auto idx = static_cast<std::uint64_t>(std::find(sites.begin(), sites.end(), site) - sites.begin());
      const Tensor in(Shape{rows, cols}, std::move(x));
      x = apply_action(in, it->second, substream_seed(call_index, 1000 + idx)).release();
    };
  }
  Net<float> net(prepared.config, prepared.layout, prepared.values.data());
  net.forward(batch, &hook);
  return Tensor(Shape{batch.batch, batch.seq_len, prepared.config.vocab}, net.logits());
}

Tensor forward(const ModelParams& params, const Batch& batch, const InjectionPlan& plan,
               std::uint64_t call_index) {
  validate(plan, params.config);
  if (plan.weights.empty()) return forward_prepared(params, batch, plan, call_index);
  return forward_prepared(apply_weight_actions(params, plan), batch, plan, call_index);
}

Tensor forward(const ModelParams& params, const Batch& batch) {
  return forward(params, batch, InjectionPlan{}, 0);
}

std::vector<float> attention_probs(const ModelParams& params, const Batch& batch) {
  check_batch(params, batch);
  Net<float> net(params.config, params.layout, params.values.data());
  net.forward(batch, nullptr);
  std::vector<float> out;
  for (std::size_t l = 0; l < params.config.layers; ++l) {
    const auto p = net.probs_of_layer(l);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <class Real>
LossAndGrad loss_and_grad(const ModelParams& params, const Batch& batch) {
  check_batch(params, batch);
  const auto values = convert<Real>(params.values);
  Net<Real> net(params.config, params.layout, values.data());
  net.forward(batch, nullptr);
  LossAndGrad out;
  out.loss = net.loss(batch, out.scored);
  std::vector<Real> grad(values.size());
  net.backward(batch, grad.data());
  out.grad.assign(grad.begin(), grad.end());
  return out;
}

template <class Real>
double loss_only(const ModelParams& params, const std::vector<double>& values, const Batch& batch) {
  check_batch(params, batch);
  require(values.size() == params.layout.total(), ErrorKind::kInvalidArgument, "parameter count mismatch");
  const std::vector<Real> v(values.begin(), values.end());
  Net<Real> net(params.config, params.layout, v.data());
  net.forward(batch, nullptr);
  std::size_t scored = 0;
  return net.loss(batch, scored);
}

template LossAndGrad loss_and_grad<float>(const ModelParams&, const Batch&);
template LossAndGrad loss_and_grad<double>(const ModelParams&, const Batch&);
template double loss_only<float>(const ModelParams&, const std::vector<double>&, const Batch&);
template double loss_only<double>(const ModelParams&, const std::vector<double>&, const Batch&);

}  // namespace qlens::toy
