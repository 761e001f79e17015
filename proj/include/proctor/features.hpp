#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <deque>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "proctor/face_geometry.hpp"
#include "proctor/hand_interaction.hpp"

namespace proctor {

inline constexpr int kNumFeatures = 27;
inline constexpr int kSchemaVersion = 1;

/// Fused per-frame feature layout. Categorical readings are encoded
/// ordinally (pose_zone, mouth_state 0/1/2) and gaze as -1 left / 0 center
/// / +1 right. The list is a reconstruction of the face and hand module
/// outputs, not a published enumeration.
struct FeatureSchema {
  int version = kSchemaVersion;
  std::array<std::string_view, kNumFeatures> names;

  static const FeatureSchema& current();
  int index_of(std::string_view name) const;
};

namespace feature {
enum Index : int {
  FaceCount = 0,
  IdentitySimilarity,
  Pitch,
  Yaw,
  Roll,
  Radial,
  PoseZone,
  IrisRatioLeft,
  IrisRatioRight,
  GazeCode,
  MouthAreaNorm,
  MouthState,
  ConfFirst,                                // conf_cell_phone .. conf_watch
  DistFirst = ConfFirst + kNumItemClasses,  // dist_cell_phone .. dist_watch
  GlobalMinDistance = DistFirst + kNumItemClasses,
  NumHands,
  NumItems,
};
static_assert(NumItems + 1 == kNumFeatures);
}  // namespace feature

using FeatureRow = Eigen::Matrix<double, kNumFeatures, 1>;
/// Rows are frames, columns follow FeatureSchema.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumFeatures, Eigen::RowMajor>;

/// Missing values are quiet NaNs.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct FeatureVector {
  FeatureRow values = FeatureRow::Constant(kMissing);
  std::uint64_t frame_index = 0;
  std::optional<bool> label;
};

FeatureVector assemble(const FaceGeometryReport& face, const InteractionReport& hand,
                       const FeatureSchema& schema = FeatureSchema::current());

// ---------------------------------------------------------------------------
// Preprocessing

struct ImputerState {
  FeatureRow means = FeatureRow::Zero();
  std::array<std::size_t, kNumFeatures> counts{};
};

/// Throws AllMissingFeature when a column has no observed value.
ImputerState fit_imputer(const FeatureMatrix& rows);
FeatureRow apply_imputer(const ImputerState& state, const FeatureRow& row);
FeatureMatrix apply_imputer(const ImputerState& state, const FeatureMatrix& rows);

struct ScalerState {
  FeatureRow means = FeatureRow::Zero();
  FeatureRow stds = FeatureRow::Ones();
};

/// Population moments; a constant column gets std 1.
ScalerState fit_scaler(const FeatureMatrix& rows);
FeatureRow apply_scaler(const ScalerState& state, const FeatureRow& row);
FeatureMatrix apply_scaler(const ScalerState& state, const FeatureMatrix& rows);

/// Imputer followed by scaler, fitted on training rows and then frozen.
struct Preprocessor {
  int schema_version = kSchemaVersion;
  ImputerState imputer;
  ScalerState scaler;

  static Preprocessor fit(const FeatureMatrix& training_rows);

  FeatureRow transform(const FeatureRow& row) const { return apply_scaler(scaler, apply_imputer(imputer, row)); }
  FeatureMatrix transform(const FeatureMatrix& rows) const {
    return apply_scaler(scaler, apply_imputer(imputer, rows));
  }

  std::string to_json() const;
  /// Throws VersionMismatch when schema_version differs from the build.
  static Preprocessor from_json(std::string_view text);
  /// Fingerprint of to_json(), referenced by model files.
  std::string fingerprint() const;

  void save(const std::filesystem::path& path) const;
  static Preprocessor load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Windows and sequences

/// FIFO of at most `capacity` feature vectors.
class WindowBuffer {
 public:
  explicit WindowBuffer(std::size_t capacity);

  void push(FeatureVector v);
  bool full() const { return items_.size() == capacity_; }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const FeatureVector& front() const { return items_.front(); }
  const FeatureVector& back() const { return items_.back(); }

  /// Rows in arrival order.
  FeatureMatrix matrix() const;

 private:
  std::size_t capacity_;
  std::deque<FeatureVector> items_;
};

struct LabeledSequence {
  FeatureMatrix window;  // w x kNumFeatures
  bool target = false;
  std::uint64_t target_frame_index = 0;
};

/// Sequence i covers frames [i, i + w) and targets the label of frame i + w.
std::vector<LabeledSequence> build_sequences(std::span<const FeatureVector> vectors, std::size_t w);

FeatureMatrix stack_rows(std::span<const FeatureVector> vectors);

}  // namespace proctor
