#pragma once

#include <filesystem>

#include "streamflow/backbone.hpp"

namespace streamflow::backbone {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

/// Writes `manifest.json` (config plus tensor directory) and one SFTN file per
/// named parameter into `dir`, creating it if needed.
void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& config, const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace streamflow::backbone
