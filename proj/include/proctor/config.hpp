#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "proctor/face_geometry.hpp"
#include "proctor/gbdt.hpp"
#include "proctor/lstm.hpp"

namespace proctor {

/// Everything a pipeline run depends on. Paths are defaults for commands
/// whose inputs or outputs are not given on the command line.
struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path models_dir = "models";
  std::filesystem::path reports_dir = "reports";

  FaceConfig face;
  GBDTParams gbdt;
  LSTMParams lstm;
  int smote_k = 5;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Overlays the keys present in a JSON document onto the defaults:
///
///   {"paths": {"data", "models", "reports"}, "seed", "smote_k",
///    "thresholds": {"pose_yellow", "pose_red", "gaze_lower", "gaze_upper",
///                   "mouth_partial", "mouth_open", "identity"},
///    "gbdt": {"n_trees", "max_depth", "learning_rate", "min_samples_leaf",
///             "l2_lambda"},
///    "lstm": {"hidden", "dropout_rate", "fc1_dim", "window", "learning_rate",
///             "batch_size", "max_epochs", "seed"}}
///
/// Unknown keys and invalid values raise ConfigError.
RunConfig config_from_json(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Environment variable naming a default config file.
inline constexpr const char* kConfigEnvVar = "PROCTOR_CONFIG";

}  // namespace proctor
