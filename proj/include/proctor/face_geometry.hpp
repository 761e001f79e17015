#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include <Eigen/Core>

#include "proctor/error.hpp"
#include "proctor/ingest.hpp"
#include "proctor/pnp.hpp"

namespace proctor {

/// Face-mesh landmark indices used by the geometry analyses.
namespace mesh {
inline constexpr int kNoseTip = 1;
inline constexpr int kChin = 152;
// Subject's right eye sits on the image left.
inline constexpr int kRightEyeOuter = 33;
inline constexpr int kRightEyeInner = 133;
inline constexpr int kLeftEyeInner = 362;
inline constexpr int kLeftEyeOuter = 263;
inline constexpr int kMouthRight = 61;
inline constexpr int kMouthLeft = 291;
inline constexpr int kRightIrisCenter = 468;
inline constexpr int kLeftIrisCenter = 473;
/// Inner lip contour, image-left corner, along the upper lip, then back
/// along the lower lip.
inline constexpr std::array<int, 20> kInnerLip = {78,  191, 80, 81, 82, 13, 312, 311, 310, 415,
                                                  308, 324, 318, 402, 317, 14, 87, 178, 88, 95};
}  // namespace mesh

// ---------------------------------------------------------------------------
// Scalar formulas

template <typename Scalar>
Scalar radial_deviation(Scalar pitch, Scalar yaw, Scalar roll) {
  using std::sqrt;
  return sqrt(pitch * pitch + yaw * yaw + roll * roll);
}

enum class PoseZone : int { White = 0, Yellow = 1, Red = 2 };

struct PoseZoneThresholds {
  double yellow_above = 15.0;
  double red_above = 30.0;
};

inline PoseZone classify_pose_zone(double radial, const PoseZoneThresholds& t = {}) {
  if (radial > t.red_above) return PoseZone::Red;
  if (radial > t.yellow_above) return PoseZone::Yellow;
  return PoseZone::White;
}

/// Normalized iris position between the eye corners: 0 at p_right, 1 at
/// p_left, clamped to [0, 1].
template <typename D1, typename D2, typename D3>
typename D1::Scalar iris_ratio(const Eigen::MatrixBase<D1>& center, const Eigen::MatrixBase<D2>& p_left,
                               const Eigen::MatrixBase<D3>& p_right) {
  using Scalar = typename D1::Scalar;
  const Scalar width = (p_left - p_right).norm();
  if (!(width > Scalar(1e-9))) throw Error(Errc::DegenerateEye, "eye corners coincide");
  const Scalar ratio = (center - p_right).norm() / width;
  return std::clamp(ratio, Scalar(0), Scalar(1));
}

enum class GazeClass : int { Left = -1, Center = 0, Right = 1 };

struct GazeBounds {
  double lower = 0.35;
  double upper = 0.65;
};

inline GazeClass classify_gaze(double ratio_left, double ratio_right, const GazeBounds& b = {}) {
  const double m = 0.5 * (ratio_left + ratio_right);
  if (m < b.lower) return GazeClass::Right;
  if (m > b.upper) return GazeClass::Left;
  return GazeClass::Center;
}

/// Shoelace area of an ordered polygon given as n x 2 rows, with wraparound.
template <typename Derived>
typename Derived::Scalar shoelace_area(const Eigen::MatrixBase<Derived>& polygon) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = polygon.rows();
  if (n < 3 || polygon.cols() != 2) throw Error(Errc::TooFewPoints, "polygon needs at least 3 points");
  Scalar twice = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    twice += polygon(i, 0) * polygon(j, 1) - polygon(i, 1) * polygon(j, 0);
  }
  using std::abs;
  return abs(twice) / Scalar(2);
}

enum class MouthState : int { Closed = 0, Partial = 1, Open = 2 };

struct MouthThresholds {
  double partial = 0.02;
  double open = 0.06;
};

inline MouthState classify_mouth(double area_norm, const MouthThresholds& t = {}) {
  if (area_norm >= t.open) return MouthState::Open;
  if (area_norm >= t.partial) return MouthState::Partial;
  return MouthState::Closed;
}

struct IdentityReading {
  double similarity = 0.0;
  bool match = false;
  double threshold_used = 0.55;
};

/// Cosine similarity of two L2-normalized embeddings against a threshold.
IdentityReading verify_identity(const Eigen::VectorXd& live, const Eigen::VectorXd& reference,
                                double threshold = 0.55);

// ---------------------------------------------------------------------------
// Per-frame analysis

struct HeadPose {
  double pitch = 0.0;
  double yaw = 0.0;
  double roll = 0.0;
  double radial = 0.0;
  PoseZone zone = PoseZone::White;
  double reproj_rmse = 0.0;
  bool converged = false;
};

struct GazeReading {
  double ratio_left = 0.5;
  double ratio_right = 0.5;
  GazeClass gaze_class = GazeClass::Center;
};

struct MouthReading {
  double area_norm = 0.0;
  MouthState state = MouthState::Closed;
};

struct FaceConfig {
  CameraIntrinsics intrinsics = CameraIntrinsics::for_image(640, 480);
  CanonicalFaceModel model = CanonicalFaceModel::six_point();
  PnPSettings solver;
  PoseZoneThresholds zones;
  GazeBounds gaze;
  MouthThresholds mouth;
  double identity_threshold = 0.55;
};

struct FaceGeometryReport {
  int face_count = 0;
  std::optional<HeadPose> pose;
  std::optional<GazeReading> gaze;
  std::optional<MouthReading> mouth;
  std::optional<IdentityReading> identity;
  bool single_face_ok = false;
};

HeadPose estimate_head_pose(const LandmarkSet& face, const FaceConfig& cfg);
/// Requires the refined iris points.
GazeReading estimate_gaze(const LandmarkSet& face, const FaceConfig& cfg);
/// Inner-lip area divided by the squared outer-eye-corner distance.
MouthReading estimate_mouth(const LandmarkSet& face, const FaceConfig& cfg);

/// Runs every face analysis the record supports. The record carries the
/// landmarks of the largest detected face; with several faces present the
/// analyses still run and single_face_ok is false. Gaze needs the iris
/// points; identity needs both a live and a reference embedding.
FaceGeometryReport analyze_face_frame(const FrameRecord& record, const FaceConfig& cfg,
                                      const Eigen::VectorXd* reference_embedding);

/// Index of the landmark set with the largest bounding extent (area of the
/// x/y hull). Used by front-ends that receive several faces per frame.
std::size_t largest_face(const std::vector<LandmarkSet>& faces);

}  // namespace proctor
