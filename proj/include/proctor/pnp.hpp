#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace proctor {

using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using ModelPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct CameraIntrinsics {
  double fx = 640.0;
  double fy = 640.0;
  double cx = 320.0;
  double cy = 240.0;
  int image_w = 640;
  int image_h = 480;

  /// Webcam approximation: focal length = image width, centered principal point.
  static CameraIntrinsics for_image(int width, int height);
  void validate() const;
};

/// 3D reference points paired with the face-mesh landmark each one tracks.
/// Points are stored camera-aligned (x right, y down, z away from the
/// camera), so an identity rotation is a frontal, upright face.
struct CanonicalFaceModel {
  std::vector<std::string> names;
  std::vector<int> landmark_indices;
  ModelPoints points;

  /// Builds a model from coordinates in the usual face frame (y up, z
  /// toward the viewer) by flipping y and z.
  static CanonicalFaceModel from_face_frame(std::vector<std::string> names, std::vector<int> indices,
                                            const ModelPoints& face_frame_points);

  /// Nose tip, chin, outer eye corners and mouth corners of the common
  /// six-point head model.
  static CanonicalFaceModel six_point();

  /// Throws DegenerateInput when fewer than 4 points, mismatched sizes or
  /// coplanar points are configured.
  void validate() const;
};

struct PnPSettings {
  int max_iterations = 100;
  double step_tolerance = 1e-8;
  double initial_damping = 1e-3;
  Eigen::Vector3d initial_translation{0.0, 0.0, 1000.0};
};

struct PoseSolution {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double reproj_rmse = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Pinhole projection of model points under (rotation, translation).
Points2 project_points(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                       const ModelPoints& model, const CameraIntrinsics& k);

/// Levenberg-Marquardt over an axis-angle rotation increment and the
/// translation, minimizing squared pixel reprojection error. Returns the
/// best iterate even when it did not converge.
PoseSolution solve_head_pose(const Points2& image_points, const ModelPoints& model,
                             const CameraIntrinsics& k, const PnPSettings& settings = {});

struct EulerAngles {
  double pitch = 0.0;
  double yaw = 0.0;
  double roll = 0.0;
};

/// Tait-Bryan decomposition R = Rz(roll) * Ry(yaw) * Rx(pitch), degrees in
/// (-180, 180]. At |yaw| = 90 the roll is pinned to 0.
EulerAngles euler_angles(const Eigen::Matrix3d& rotation);

Eigen::Matrix3d rotation_from_euler(const EulerAngles& angles);

}  // namespace proctor
