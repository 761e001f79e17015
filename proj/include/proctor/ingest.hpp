#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace proctor {

/// N x 3 landmark coordinates, one row per point: normalized x, y and a
/// unitless depth proxy z.
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline constexpr int kFaceMeshPoints = 468;
/// Face mesh followed by the ten refined iris points (468..477).
inline constexpr int kFaceMeshWithIrisPoints = 478;
inline constexpr int kHandPoints = 21;
inline constexpr int kEmbeddingDim = 512;

enum class LandmarkKind { Face, Hand };

struct LandmarkSet {
  LandmarkKind kind = LandmarkKind::Face;
  Points3 points;

  bool has_iris() const { return kind == LandmarkKind::Face && points.rows() == kFaceMeshWithIrisPoints; }
};

/// Throws SchemaViolation on wrong point count or coordinates outside [0, 1].
void validate(const LandmarkSet& set);

enum class ItemClass : int { CellPhone = 0, Chits, ClosedBook, Headphone, Sheet, Watch };
inline constexpr int kNumItemClasses = 6;
inline constexpr std::array<ItemClass, kNumItemClasses> kAllItemClasses = {
    ItemClass::CellPhone, ItemClass::Chits, ItemClass::ClosedBook,
    ItemClass::Headphone, ItemClass::Sheet,  ItemClass::Watch};

std::string_view to_string(ItemClass c) noexcept;
/// Throws SchemaViolation for names outside the six prohibited classes.
ItemClass item_class_from_string(std::string_view name);

enum class Camera { FaceCam, HandCam };
std::string_view to_string(Camera c) noexcept;

/// Axis-aligned box. Construction rejects empty or inverted extents.
class BBox {
 public:
  BBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  bool normalized() const;

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_min_, y_min_, x_max_, y_max_;
};

struct DetectionRecord {
  ItemClass item = ItemClass::CellPhone;
  double confidence = 0.0;
  BBox bbox{0.0, 0.0, 1.0, 1.0};
  Camera camera = Camera::HandCam;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

struct FrameRecord {
  std::string session_id;
  std::uint64_t frame_index = 0;
  std::uint64_t timestamp_ms = 0;
  std::optional<LandmarkSet> face_landmarks;
  int face_count = 0;
  std::optional<Eigen::VectorXd> live_embedding;
  std::vector<LandmarkSet> hands;
  std::vector<DetectionRecord> detections;
  std::optional<bool> label;
};

bool operator==(const LandmarkSet& a, const LandmarkSet& b);
bool operator==(const FrameRecord& a, const FrameRecord& b);

/// Checks every per-record invariant; throws SchemaViolation.
void validate(const FrameRecord& record);

/// One NDJSON line -> record. MalformedRecord for syntax/type/field-set
/// problems, SchemaViolation for invariant breaches.
FrameRecord parse_frame_record(std::string_view line);

/// Record -> one NDJSON line (no trailing newline). Field order is fixed.
std::string serialize_frame_record(const FrameRecord& record);

struct SessionStream {
  std::string session_id;
  double frame_rate_hz = 10.0;
  std::vector<FrameRecord> frames;
};

/// Incremental reader over a record file. Rejects a frame_index that does
/// not strictly increase and records belonging to another session.
class SessionReader {
 public:
  explicit SessionReader(const std::filesystem::path& path);

  std::optional<FrameRecord> next();
  std::size_t line_number() const { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::optional<std::uint64_t> last_index_;
  std::optional<std::string> session_id_;
};

inline constexpr double kDefaultFrameRateHz = 10.0;

/// Reads a whole session. The frame rate is recovered from timestamps when
/// at least two frames exist, otherwise kDefaultFrameRateHz.
SessionStream read_session(const std::filesystem::path& path);

void write_session(const std::filesystem::path& path, const SessionStream& session);

}  // namespace proctor
