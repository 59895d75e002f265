#pragma once

#include <filesystem>

#include "json.hpp"
#include "qlens/toy/config.hpp"

namespace qlens::toy {

/// A checkpoint directory holds one QTNS file per parameter (`<name>.qtns`)
/// and `manifest.json` with the config, the parameter list, and free-form
/// training metadata.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params,
                     const nlohmann::json& training = nlohmann::json::object());

struct Checkpoint {
  ModelParams params;
  nlohmann::json manifest;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace qlens::toy
