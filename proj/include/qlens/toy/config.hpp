#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qlens/tensor.hpp"

namespace qlens::toy {

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t vocab = 64;
  std::size_t context = 32;
  std::uint64_t init_seed = 0;

  std::size_t head_dim() const noexcept { return d_model / heads; }
  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& config);

/// One named parameter inside the flat parameter vector.
struct ParamEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  bool site = false;  // linear projection eligible for injection
};

/// Fixed ordering of every parameter:
///   embed.tok [V,d], embed.pos [T,d], then per layer i
///   layers.i.ln1.{gain,bias} [d], layers.i.attn.{wq,wk,wv,wo} [d,d],
///   layers.i.ln2.{gain,bias} [d], layers.i.ffn.w_in [d,F], layers.i.ffn.w_out [F,d],
///   then ln_f.{gain,bias} [d] and head [d,V].
/// Linear layers compute x @ W, so axis 1 of every site is the output channel.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
  std::size_t total() const noexcept { return total_; }
  const ParamEntry& at(const std::string& name) const;
  const ParamEntry* find(const std::string& name) const;
  /// Injection sites in layout order.
  std::vector<std::string> site_names() const;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t total_ = 0;
};

namespace names {
std::string wq(std::size_t layer);
std::string wk(std::size_t layer);
std::string wv(std::size_t layer);
std::string wo(std::size_t layer);
std::string ffn_in(std::size_t layer);
std::string ffn_out(std::size_t layer);
std::string ln1_gain(std::size_t layer);
std::string ln1_bias(std::size_t layer);
std::string ln2_gain(std::size_t layer);
std::string ln2_bias(std::size_t layer);
inline constexpr const char* kTokEmbed = "embed.tok";
inline constexpr const char* kPosEmbed = "embed.pos";
inline constexpr const char* kFinalGain = "ln_f.gain";
inline constexpr const char* kFinalBias = "ln_f.bias";
inline constexpr const char* kHead = "head";
}  // namespace names

/// Model weights: the config, its layout, and one flat float vector.
struct ModelParams {
  ModelConfig config;
  ParamLayout layout{config};
  std::vector<float> values;

  explicit ModelParams(const ModelConfig& cfg) : config(cfg), layout(cfg), values(layout.total(), 0.0f) {}

  std::span<const float> view(const std::string& name) const;
  std::span<float> view(const std::string& name);
  Tensor get(const std::string& name) const;
  void set(const std::string& name, const Tensor& t);

  bool operator==(const ModelParams& other) const {
    return config == other.config && values == other.values;
  }
};

}  // namespace qlens::toy
