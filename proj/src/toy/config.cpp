#include "qlens/toy/config.hpp"

#include "qlens/error.hpp"

namespace qlens::toy {

void validate(const ModelConfig& c) {
  require(c.layers > 0 && c.d_model > 0 && c.heads > 0 && c.ffn_dim > 0 && c.vocab > 0 && c.context > 0,
          ErrorKind::kInvalidArgument, "model extents must be positive");
  require(c.d_model % c.heads == 0, ErrorKind::kInvalidArgument, "heads must divide d_model");
}

namespace names {
namespace {
std::string layer_prefix(std::size_t l) { return "layers." + std::to_string(l) + "."; }
}  // namespace
std::string wq(std::size_t l) { return layer_prefix(l) + "attn.wq"; }
std::string wk(std::size_t l) { return layer_prefix(l) + "attn.wk"; }
std::string wv(std::size_t l) { return layer_prefix(l) + "attn.wv"; }
std::string wo(std::size_t l) { return layer_prefix(l) + "attn.wo"; }
std::string ffn_in(std::size_t l) { return layer_prefix(l) + "ffn.w_in"; }
std::string ffn_out(std::size_t l) { return layer_prefix(l) + "ffn.w_out"; }
std::string ln1_gain(std::size_t l) { return layer_prefix(l) + "ln1.gain"; }
std::string ln1_bias(std::size_t l) { return layer_prefix(l) + "ln1.bias"; }
std::string ln2_gain(std::size_t l) { return layer_prefix(l) + "ln2.gain"; }
std::string ln2_bias(std::size_t l) { return layer_prefix(l) + "ln2.bias"; }
}  // namespace names

ParamLayout::ParamLayout(const ModelConfig& c) {
  validate(c);
  const auto add = [&](std::string name, Shape shape, bool site) {
    const std::size_t n = numel(shape);
    entries_.push_back({std::move(name), std::move(shape), total_, site});
    total_ += n;
  };
  const std::size_t d = c.d_model, f = c.ffn_dim;
  add(names::kTokEmbed, {c.vocab, d}, false);
  add(names::kPosEmbed, {c.context, d}, false);
  for (std::size_t l = 0; l < c.layers; ++l) {
    add(names::ln1_gain(l), {d}, false);
    add(names::ln1_bias(l), {d}, false);
    add(names::wq(l), {d, d}, true);
    add(names::wk(l), {d, d}, true);
    add(names::wv(l), {d, d}, true);
    add(names::wo(l), {d, d}, true);
    add(names::ln2_gain(l), {d}, false);
    add(names::ln2_bias(l), {d}, false);
    add(names::ffn_in(l), {d, f}, true);
    add(names::ffn_out(l), {f, d}, true);
  }
  add(names::kFinalGain, {d}, false);
  add(names::kFinalBias, {d}, false);
  add(names::kHead, {d, c.vocab}, true);
}

const ParamEntry* ParamLayout::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

const ParamEntry& ParamLayout::at(const std::string& name) const {
  const ParamEntry* e = find(name);
  if (!e) fail(ErrorKind::kInvalidArgument, "unknown parameter '" + name + "'");
  return *e;
}

std::vector<std::string> ParamLayout::site_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.site) out.push_back(e.name);
  return out;
}

std::span<const float> ModelParams::view(const std::string& name) const {
  const auto& e = layout.at(name);
  return std::span<const float>(values).subspan(e.offset, numel(e.shape));
}

std::span<float> ModelParams::view(const std::string& name) {
  const auto& e = layout.at(name);
  return std::span<float>(values).subspan(e.offset, numel(e.shape));
}

Tensor ModelParams::get(const std::string& name) const {
  const auto& e = layout.at(name);
  const auto v = view(name);
  return Tensor(e.shape, std::vector<float>(v.begin(), v.end()));
}

void ModelParams::set(const std::string& name, const Tensor& t) {
  const auto& e = layout.at(name);
  if (t.shape() != e.shape)
    fail(ErrorKind::kShapeMismatch, name + ": shape mismatch: " + to_string(e.shape) + " vs " + to_string(t.shape()));
  std::copy(t.data().begin(), t.data().end(), view(name).begin());
}

}  // namespace qlens::toy
