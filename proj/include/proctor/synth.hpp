#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "proctor/face_geometry.hpp"
#include "proctor/ingest.hpp"

namespace proctor {

enum class Behavior { Normal, LookAway, PhoneUse, Talking, Impostor, NotesPeek };

std::string_view to_string(Behavior b) noexcept;
Behavior behavior_from_string(std::string_view name);

struct BehaviorSegment {
  Behavior behavior = Behavior::Normal;
  int duration_frames = 1;
  /// Sub-type: look_away side (0 left, 1 right), notes_peek item (0 chits,
  /// 1 sheet). -1 draws it from the session seed.
  int variant = -1;
};

struct NoiseLevels {
  double landmark_jitter = 0.002;   // normalized units
  double detection_dropout = 0.05;  // per detection per frame
};

struct ScenarioScript {
  std::string session_id;
  std::string split;  // "train", "test" or empty
  std::vector<BehaviorSegment> segments;
  double frame_rate_hz = kDefaultFrameRateHz;
  NoiseLevels noise;
  std::uint64_t seed = 0;

  int total_frames() const;
};

struct GeneratedSession {
  SessionStream stream;
  Eigen::VectorXd reference_embedding;
  std::vector<Behavior> behaviors;  // one per frame
  std::string split;
};

struct SynthOptions {
  FaceConfig face;
  /// Scripts shorter than this raise ScriptTooShort (window + 1 frames).
  int min_frames = 16;
};

/// Renders a script into labeled frame records. Labels are 1 inside every
/// non-normal segment. Output is bitwise deterministic given the script.
GeneratedSession generate_session(const ScenarioScript& script, const SynthOptions& options = {});

/// The ten scripted sessions of the default benchmark, split 80:20 by
/// duration.
std::vector<ScenarioScript> default_benchmark_scripts();

struct Benchmark {
  std::vector<GeneratedSession> train;
  std::vector<GeneratedSession> test;
};

Benchmark default_benchmark(const SynthOptions& options = {});

/// Script file: {"sessions": [{"session_id", "split", "seed", "frame_rate_hz",
/// "noise": {"landmark_jitter", "detection_dropout"}, "segments": [{"behavior",
/// "frames", "variant"}]}]}.
std::vector<ScenarioScript> scripts_from_json(std::string_view text);
std::string scripts_to_json(const std::vector<ScenarioScript>& scripts);
std::vector<ScenarioScript> load_scripts(const std::filesystem::path& path);

std::string embedding_to_json(const Eigen::VectorXd& e);
Eigen::VectorXd embedding_from_json(std::string_view text);

}  // namespace proctor
