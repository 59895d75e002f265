#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qlens/perturb.hpp"
#include "qlens/quant.hpp"
#include "qlens/tensor.hpp"
#include "qlens/toy/config.hpp"
#include "qlens/toy/task.hpp"
#include "qlens/toy/train.hpp"

namespace qlens::harness {

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { kKernelSweep, kScaleSweep, kPerturbCompare, kQuantCompare, kToyTrain, kToyEval };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view text);

/// A tensor read from a QTNS file or drawn from `dist`. Without an explicit
/// seed a generated tensor is redrawn for every trial from the trial seed.
struct InputSource {
  std::string name;
  std::string path;
  std::optional<DistSpec> dist;
  Shape shape;
  std::optional<std::uint64_t> seed;
};

enum class SiteScope { kAll, kWeights, kActivations };

std::string to_string(SiteScope scope);
SiteScope parse_site_scope(std::string_view text);

struct OutlierSetup {
  double factor = 20;
  double fraction = 0.01;
  bool per_seed = true;  // channel choice follows the trial seed, else `seed`
  std::uint64_t seed = 0;
};

struct ToySetup {
  std::string checkpoint;  // empty: train (or reuse) `<output_dir>/checkpoint`
  toy::TaskSpec task;
  std::size_t eval_batches = 8;
  std::size_t eval_batch_size = 32;
  std::uint64_t eval_seed = 0x5eed;
  std::optional<OutlierSetup> outliers;
};

struct TrainSetup {
  toy::ModelConfig model;
  std::size_t steps = 2000;
  std::uint64_t data_seed = 1;
  toy::OptimizerConfig optimizer;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string id = "experiment";
  std::string preset;  // free label copied to the CSV
  ExperimentKind kind = ExperimentKind::kKernelSweep;

  std::vector<InputSource> inputs;  // tensor experiments
  std::vector<QuantScheme> schemes;
  std::vector<std::string> alphas;  // "2x" means 2 * alpha_max of each tensor

  // perturbation kinds; "KIND@clip:K" matches the l2 of clipping at K
  std::vector<std::string> perturbations;
  std::string intensity = "l2";  // l2 | variance
  int bits_w = 8;
  int bits_a = 8;
  SiteScope site_scope = SiteScope::kAll;

  std::vector<std::string> presets;     // fp | w4a16 | w8a8 | w4a8
  std::vector<std::string> transforms;  // identity | power[:P]
  std::vector<std::string> metrics = {"accuracy", "perplexity"};

  ToySetup toy;
  TrainSetup train;

  std::uint64_t base_seed = 0;
  std::size_t n_seeds = 1;
  std::string output_dir = "results";
  std::size_t parallelism = 1;
};

// "gaussian@clip:3" -> kind gaussian, matched to the l2 of clipping at 3
struct PerturbChoice {
  PerturbKind kind;
  std::optional<double> clip_match;
};

PerturbChoice parse_choice(const std::string& text);

void validate(const ExperimentConfig& config);

/// Rejects unknown keys and a missing or unsupported schema_version.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// figure2 | figure3 | table1
ExperimentConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

nlohmann::json scheme_to_json(const QuantScheme& scheme);
QuantScheme scheme_from_json(const nlohmann::json& j);
nlohmann::json optimizer_to_json(const toy::OptimizerConfig& o);
nlohmann::json task_to_json(const toy::TaskSpec& task);

}  // namespace qlens::harness
