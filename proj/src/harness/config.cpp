#include "qlens/harness/config.hpp"

#include <algorithm>
#include <initializer_list>

#include "qlens/error.hpp"
#include "qlens/io_util.hpp"
#include "qlens/perturb.hpp"
#include "qlens/toy/checkpoint.hpp"
#include "qlens/toy/injection.hpp"

namespace qlens::harness {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::kInvalidArgument, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(ErrorKind::kInvalidArgument, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

toy::TaskSpec task_from_json(const json& j) {
  check_keys(j, {"kind", "seq_len", "modulus"}, "toy.task");
  toy::TaskSpec t;
  if (j.contains("kind")) t.kind = toy::parse_task_kind(j.at("kind").get<std::string>());
  read_opt(j, "seq_len", t.seq_len);
  read_opt(j, "modulus", t.modulus);
  return t;
}

toy::OptimizerConfig optimizer_from_json(const json& j) {
  check_keys(j, {"lr", "beta1", "beta2", "eps", "batch", "grad_clip"}, "train.optimizer");
  toy::OptimizerConfig o;
  read_opt(j, "lr", o.lr);
  read_opt(j, "beta1", o.beta1);
  read_opt(j, "beta2", o.beta2);
  read_opt(j, "eps", o.eps);
  read_opt(j, "batch", o.batch);
  read_opt(j, "grad_clip", o.grad_clip);
  return o;
}

toy::ModelConfig model_from_json(const json& j) {
  check_keys(j, {"layers", "d_model", "heads", "ffn_dim", "vocab", "context", "init_seed"}, "train.model");
  toy::ModelConfig c;
  read_opt(j, "layers", c.layers);
  read_opt(j, "d_model", c.d_model);
  read_opt(j, "heads", c.heads);
  read_opt(j, "ffn_dim", c.ffn_dim);
  read_opt(j, "vocab", c.vocab);
  read_opt(j, "context", c.context);
  read_opt(j, "init_seed", c.init_seed);
  return c;
}

InputSource input_from_json(const json& j) {
  check_keys(j, {"name", "path", "dist", "shape", "seed"}, "inputs[]");
  InputSource in;
  read_opt(j, "name", in.name);
  read_opt(j, "path", in.path);
  if (j.contains("dist")) in.dist = parse_dist(j.at("dist").get<std::string>());
  if (j.contains("shape")) in.shape = j.at("shape").get<Shape>();
  if (j.contains("seed")) in.seed = j.at("seed").get<std::uint64_t>();
  if (in.name.empty()) in.name = in.path.empty() ? (in.dist ? to_string(*in.dist) : "input") : in.path;
  return in;
}

json input_to_json(const InputSource& in) {
  json j = {{"name", in.name}};
  if (!in.path.empty()) j["path"] = in.path;
  if (in.dist) j["dist"] = to_string(*in.dist);
  if (!in.shape.empty()) j["shape"] = in.shape;
  if (in.seed) j["seed"] = *in.seed;
  return j;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kKernelSweep: return "kernel-sweep";
    case ExperimentKind::kScaleSweep: return "scale-sweep";
    case ExperimentKind::kPerturbCompare: return "perturb-compare";
    case ExperimentKind::kQuantCompare: return "quant-compare";
    case ExperimentKind::kToyTrain: return "toy-train";
    case ExperimentKind::kToyEval: return "toy-eval";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view text) {
  for (auto k : {ExperimentKind::kKernelSweep, ExperimentKind::kScaleSweep, ExperimentKind::kPerturbCompare,
                 ExperimentKind::kQuantCompare, ExperimentKind::kToyTrain, ExperimentKind::kToyEval}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorKind::kInvalidArgument, "unknown experiment kind '" + std::string(text) + "'");
}

std::string to_string(SiteScope scope) {
  switch (scope) {
    case SiteScope::kAll: return "all";
    case SiteScope::kWeights: return "weights";
    case SiteScope::kActivations: return "activations";
  }
  return "?";
}

SiteScope parse_site_scope(std::string_view text) {
  if (text == "all") return SiteScope::kAll;
  if (text == "weights") return SiteScope::kWeights;
  if (text == "activations") return SiteScope::kActivations;
  fail(ErrorKind::kInvalidArgument, "unknown site scope '" + std::string(text) + "'");
}

json scheme_to_json(const QuantScheme& s) {
  return {{"bits", s.bits},
          {"policy", to_string(s.policy)},
          {"granularity", to_string(s.granularity)},
          {"transform", to_string(s.transform)}};
}

QuantScheme scheme_from_json(const json& j) {
  check_keys(j, {"bits", "policy", "granularity", "transform"}, "schemes[]");
  QuantScheme s;
  read_opt(j, "bits", s.bits);
  if (j.contains("policy")) s.policy = parse_policy(j.at("policy").get<std::string>());
  if (j.contains("granularity")) s.granularity = parse_granularity(j.at("granularity").get<std::string>());
  if (j.contains("transform")) s.transform = parse_transform(j.at("transform").get<std::string>());
  validate(s);
  return s;
}

json optimizer_to_json(const toy::OptimizerConfig& o) {
  return {{"lr", o.lr},   {"beta1", o.beta1}, {"beta2", o.beta2},
          {"eps", o.eps}, {"batch", o.batch}, {"grad_clip", o.grad_clip}};
}

json task_to_json(const toy::TaskSpec& t) {
  return {{"kind", toy::to_string(t.kind)}, {"seq_len", t.seq_len}, {"modulus", t.modulus}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j,
               {"schema_version", "id", "preset", "kind", "inputs", "schemes", "alphas", "perturbations",
                "intensity", "bits_w", "bits_a", "site_scope", "presets", "transforms", "metrics", "toy", "train",
                "base_seed", "n_seeds", "output_dir", "parallelism"},
               "experiment config");
    require(j.contains("schema_version"), ErrorKind::kInvalidArgument, "config needs schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    require(c.schema_version == kSchemaVersion, ErrorKind::kInvalidArgument,
            "unsupported schema_version " + std::to_string(c.schema_version));
    require(j.contains("kind"), ErrorKind::kInvalidArgument, "config needs kind");
    c.kind = parse_experiment_kind(j.at("kind").get<std::string>());
    read_opt(j, "id", c.id);
    read_opt(j, "preset", c.preset);
    if (j.contains("inputs"))
      for (const auto& e : j.at("inputs")) c.inputs.push_back(input_from_json(e));
    if (j.contains("schemes"))
      for (const auto& e : j.at("schemes")) c.schemes.push_back(scheme_from_json(e));
    read_opt(j, "alphas", c.alphas);
    read_opt(j, "perturbations", c.perturbations);
    read_opt(j, "intensity", c.intensity);
    read_opt(j, "bits_w", c.bits_w);
    read_opt(j, "bits_a", c.bits_a);
    if (j.contains("site_scope")) c.site_scope = parse_site_scope(j.at("site_scope").get<std::string>());
    read_opt(j, "presets", c.presets);
    read_opt(j, "transforms", c.transforms);
    read_opt(j, "metrics", c.metrics);
    if (j.contains("toy")) {
      const json& t = j.at("toy");
      check_keys(t, {"checkpoint", "task", "eval_batches", "eval_batch_size", "eval_seed", "outliers"}, "toy");
      read_opt(t, "checkpoint", c.toy.checkpoint);
      if (t.contains("task")) c.toy.task = task_from_json(t.at("task"));
      read_opt(t, "eval_batches", c.toy.eval_batches);
      read_opt(t, "eval_batch_size", c.toy.eval_batch_size);
      read_opt(t, "eval_seed", c.toy.eval_seed);
      if (t.contains("outliers") && !t.at("outliers").is_null()) {
        const json& o = t.at("outliers");
        check_keys(o, {"factor", "fraction", "per_seed", "seed"}, "toy.outliers");
        OutlierSetup os;
        read_opt(o, "factor", os.factor);
        read_opt(o, "fraction", os.fraction);
        read_opt(o, "per_seed", os.per_seed);
        read_opt(o, "seed", os.seed);
        c.toy.outliers = os;
      }
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      check_keys(t, {"model", "steps", "data_seed", "optimizer"}, "train");
      if (t.contains("model")) c.train.model = model_from_json(t.at("model"));
      read_opt(t, "steps", c.train.steps);
      read_opt(t, "data_seed", c.train.data_seed);
      if (t.contains("optimizer")) c.train.optimizer = optimizer_from_json(t.at("optimizer"));
    }
    read_opt(j, "base_seed", c.base_seed);
    read_opt(j, "n_seeds", c.n_seeds);
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "parallelism", c.parallelism);
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("bad experiment config: ") + e.what());
  }
  validate(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j = {{"schema_version", c.schema_version},
            {"id", c.id},
            {"preset", c.preset},
            {"kind", to_string(c.kind)}};
  j["inputs"] = json::array();
  for (const auto& in : c.inputs) j["inputs"].push_back(input_to_json(in));
  j["schemes"] = json::array();
  for (const auto& s : c.schemes) j["schemes"].push_back(scheme_to_json(s));
  j["alphas"] = c.alphas;
  j["perturbations"] = c.perturbations;
  j["intensity"] = c.intensity;
  j["bits_w"] = c.bits_w;
  j["bits_a"] = c.bits_a;
  j["site_scope"] = to_string(c.site_scope);
  j["presets"] = c.presets;
  j["transforms"] = c.transforms;
  j["metrics"] = c.metrics;
  json toy = {{"checkpoint", c.toy.checkpoint},
              {"task", task_to_json(c.toy.task)},
              {"eval_batches", c.toy.eval_batches},
              {"eval_batch_size", c.toy.eval_batch_size},
              {"eval_seed", c.toy.eval_seed}};
  if (c.toy.outliers) {
    const auto& o = *c.toy.outliers;
    toy["outliers"] = {{"factor", o.factor}, {"fraction", o.fraction}, {"per_seed", o.per_seed}, {"seed", o.seed}};
  }
  j["toy"] = toy;
  j["train"] = {{"model", toy::config_to_json(c.train.model)},
                {"steps", c.train.steps},
                {"data_seed", c.train.data_seed},
                {"optimizer", optimizer_to_json(c.train.optimizer)}};
  j["base_seed"] = c.base_seed;
  j["n_seeds"] = c.n_seeds;
  j["output_dir"] = c.output_dir;
  j["parallelism"] = c.parallelism;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidArgument, "cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

PerturbChoice parse_choice(const std::string& text) {
  const auto at = text.find('@');
  if (at == std::string::npos) return {parse_kind(text), std::nullopt};
  const auto kind = parse_kind(text.substr(0, at));
  const auto rhs = text.substr(at + 1);
  require(rhs.rfind("clip:", 0) == 0, ErrorKind::kInvalidArgument, "expected KIND@clip:K, got '" + text + "'");
  const auto ck = std::get<ClipDelta>(parse_kind(rhs));
  require(!std::holds_alternative<ClipDelta>(kind), ErrorKind::kInvalidArgument,
          "clipping cannot be intensity-matched");
  return {kind, ck.k};
}

void validate(const ExperimentConfig& c) {
  const auto bad = [](const std::string& what) { fail(ErrorKind::kInvalidArgument, what); };
  if (c.schema_version != kSchemaVersion) bad("unsupported schema_version");
  if (c.id.empty()) bad("experiment id must be non-empty");
  if (c.n_seeds < 1) bad("n_seeds must be >= 1");
  if (c.parallelism < 1) bad("parallelism must be >= 1");
  if (c.output_dir.empty()) bad("output_dir must be non-empty");
  for (const auto& in : c.inputs) {
    if (in.path.empty() == !in.dist.has_value()) bad("input '" + in.name + "' needs exactly one of path or dist");
    if (in.dist) {
      validate(*in.dist);
      if (in.shape.empty() || numel(in.shape) == 0) bad("generated input '" + in.name + "' needs a shape");
    }
  }
  for (const auto& s : c.schemes) validate(s);
  const bool tensor_inputs = !c.inputs.empty();
  switch (c.kind) {
    case ExperimentKind::kKernelSweep:
      if (!tensor_inputs || c.schemes.empty()) bad("kernel-sweep needs inputs and schemes");
      break;
    case ExperimentKind::kScaleSweep:
      if (!tensor_inputs || c.schemes.empty() || c.alphas.empty()) bad("scale-sweep needs inputs, schemes and alphas");
      break;
    case ExperimentKind::kPerturbCompare:
      if (c.perturbations.empty()) bad("perturb-compare needs perturbations");
      for (const auto& p : c.perturbations) parse_choice(p);
      break;
    case ExperimentKind::kQuantCompare:
      if (c.presets.empty() || c.transforms.empty()) bad("quant-compare needs presets and transforms");
      for (const auto& p : c.presets)
        if (p != "fp") toy::parse_preset(p);
      for (const auto& t : c.transforms) parse_transform(t);
      break;
    case ExperimentKind::kToyTrain:
      validate(c.train.model);
      if (c.train.steps < 1) bad("train.steps must be >= 1");
      break;
    case ExperimentKind::kToyEval:
      break;
  }
  if (c.intensity != "l2" && c.intensity != "variance") bad("intensity must be l2 or variance");
  if (c.bits_w < 2 || c.bits_w > 8 || c.bits_a < 0 || c.bits_a > 8 || c.bits_a == 1)
    bad("bits_w must be in [2, 8] and bits_a in {0} or [2, 8]");
  for (const auto& m : c.metrics)
    if (m != "accuracy" && m != "perplexity" && m != "ce_loss") bad("unknown metric '" + m + "'");
  if (c.toy.eval_batches < 1 || c.toy.eval_batch_size < 1) bad("toy evaluation needs batches");
  if (c.toy.outliers && (!(c.toy.outliers->factor > 0) || !(c.toy.outliers->fraction > 0) ||
                         c.toy.outliers->fraction > 1))
    bad("outliers need factor > 0 and fraction in (0, 1]");
}

std::vector<std::string> preset_names() { return {"figure2", "figure3", "table1"}; }

ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig c;
  c.id = std::string(name);
  c.preset = std::string(name);
  c.n_seeds = 4;
  c.toy.task.kind = toy::TaskKind::kModularAdd;
  c.toy.outliers = OutlierSetup{};
  if (name == "figure2") {
    c.kind = ExperimentKind::kPerturbCompare;
    c.perturbations = {"gaussian", "uniform", "rademacher", "magpos", "magneg", "clip:3"};
    c.metrics = {"accuracy"};
  } else if (name == "figure3") {
    c.kind = ExperimentKind::kPerturbCompare;
    c.perturbations = {"clip:3", "gaussian@clip:3", "clip:5", "gaussian@clip:5", "clip:10", "gaussian@clip:10"};
  } else if (name == "table1") {
    c.kind = ExperimentKind::kQuantCompare;
    c.presets = {"fp", "w4a16", "w8a8", "w4a8"};
    c.transforms = {"identity", "power"};
  } else {
    fail(ErrorKind::kInvalidArgument, "unknown preset '" + std::string(name) + "'");
  }
  return c;
}

}  // namespace qlens::harness
