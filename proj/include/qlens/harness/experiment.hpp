#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qlens/error.hpp"
#include "qlens/harness/config.hpp"
#include "qlens/metrics.hpp"
#include "qlens/toy/config.hpp"

namespace qlens::harness {

/// Coordinates of one grid point, as they appear in the CSV.
struct GridPoint {
  std::string site_scope;  // input name for tensor experiments
  std::string kind;
  int bits_w = 0;
  int bits_a = 0;
  std::string transform = "identity";

  bool operator==(const GridPoint&) const = default;
};

struct TrialResult {
  std::size_t index = 0;  // grid-major, replicate-minor
  std::size_t replicate = 0;
  GridPoint point;
  std::uint64_t seed = 0;
  std::vector<DegradationRow> rows;
  double wall_seconds = 0;
  std::optional<ErrorKind> error_kind;
  std::string error;
};

struct RunOptions {
  bool write_files = true;
  std::function<void(const std::string&)> log;
};

struct RunResult {
  std::vector<TrialResult> trials;
  std::string csv;
  std::filesystem::path csv_path;
  std::filesystem::path manifest_path;

  std::size_t failed() const;
  /// Kind of the first failed trial in grid order.
  std::optional<ErrorKind> first_error() const;
};

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t replicate);

std::vector<GridPoint> expand_grid(const ExperimentConfig& config);

std::string results_csv(const ExperimentConfig& config, const std::vector<TrialResult>& trials);

/// The model used by toy experiments: toy.checkpoint if set, otherwise
/// `<output_dir>/checkpoint`, trained from `train` on first use.
toy::ModelParams resolve_model(const ExperimentConfig& config, const RunOptions& options = {});

/// Runs every grid point for n_seeds replicates on a pool of `parallelism`
/// threads, then writes `<output_dir>/<id>.csv` and `<output_dir>/<id>.json`.
/// A failing trial is recorded and the others still run.
RunResult run(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace qlens::harness
