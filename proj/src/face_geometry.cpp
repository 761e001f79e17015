#include "proctor/face_geometry.hpp"

#include <string>

namespace proctor {

namespace {

Eigen::Vector2d pixel(const LandmarkSet& face, int index, const CameraIntrinsics& k) {
  return {face.points(index, 0) * k.image_w, face.points(index, 1) * k.image_h};
}

}  // namespace

IdentityReading verify_identity(const Eigen::VectorXd& live, const Eigen::VectorXd& reference, double threshold) {
  if (live.size() != reference.size())
    throw Error(Errc::DimensionMismatch, "embeddings have sizes " + std::to_string(live.size()) + " and " +
                                             std::to_string(reference.size()));
  if (std::abs(live.norm() - 1.0) > 1e-6 || std::abs(reference.norm() - 1.0) > 1e-6)
    throw Error(Errc::NotNormalized, "embeddings must be L2-normalized");
  IdentityReading r;
  r.similarity = std::clamp(live.dot(reference), -1.0, 1.0);
  r.threshold_used = threshold;
  r.match = r.similarity >= threshold;
  return r;
}

HeadPose estimate_head_pose(const LandmarkSet& face, const FaceConfig& cfg) {
  const auto& model = cfg.model;
  Points2 image(model.points.rows(), 2);
  for (Eigen::Index i = 0; i < model.points.rows(); ++i)
    image.row(i) = pixel(face, model.landmark_indices[static_cast<std::size_t>(i)], cfg.intrinsics).transpose();

  const PoseSolution sol = solve_head_pose(image, model.points, cfg.intrinsics, cfg.solver);
  const EulerAngles e = euler_angles(sol.rotation);
  HeadPose pose;
  pose.pitch = e.pitch;
  pose.yaw = e.yaw;
  pose.roll = e.roll;
  pose.radial = radial_deviation(e.pitch, e.yaw, e.roll);
  pose.zone = classify_pose_zone(pose.radial, cfg.zones);
  pose.reproj_rmse = sol.reproj_rmse;
  pose.converged = sol.converged;
  return pose;
}

GazeReading estimate_gaze(const LandmarkSet& face, const FaceConfig& cfg) {
  if (!face.has_iris()) throw Error(Errc::SchemaViolation, "gaze needs the refined iris landmarks");
  const auto& k = cfg.intrinsics;
  GazeReading g;
  // p_left / p_right are the image-left / image-right corners of each eye.
  g.ratio_right = iris_ratio(pixel(face, mesh::kRightIrisCenter, k), pixel(face, mesh::kRightEyeOuter, k),
                             pixel(face, mesh::kRightEyeInner, k));
  g.ratio_left = iris_ratio(pixel(face, mesh::kLeftIrisCenter, k), pixel(face, mesh::kLeftEyeInner, k),
                            pixel(face, mesh::kLeftEyeOuter, k));
  g.gaze_class = classify_gaze(g.ratio_left, g.ratio_right, cfg.gaze);
  return g;
}

MouthReading estimate_mouth(const LandmarkSet& face, const FaceConfig& cfg) {
  const auto& k = cfg.intrinsics;
  Eigen::Matrix<double, Eigen::Dynamic, 2> lip(static_cast<Eigen::Index>(mesh::kInnerLip.size()), 2);
  for (std::size_t i = 0; i < mesh::kInnerLip.size(); ++i)
    lip.row(static_cast<Eigen::Index>(i)) = pixel(face, mesh::kInnerLip[i], k).transpose();
  const double interocular =
      (pixel(face, mesh::kLeftEyeOuter, k) - pixel(face, mesh::kRightEyeOuter, k)).norm();
  if (!(interocular > 1e-9)) throw Error(Errc::DegenerateEye, "outer eye corners coincide");
  MouthReading m;
  m.area_norm = shoelace_area(lip) / (interocular * interocular);
  m.state = classify_mouth(m.area_norm, cfg.mouth);
  return m;
}

FaceGeometryReport analyze_face_frame(const FrameRecord& record, const FaceConfig& cfg,
                                      const Eigen::VectorXd* reference_embedding) {
  FaceGeometryReport report;
  report.face_count = record.face_count;
  report.single_face_ok = record.face_count == 1;
  if (record.face_count == 0) return report;

  const auto context = [&](const Error& e) {
    return Error(e.code(), "session " + record.session_id + " frame " + std::to_string(record.frame_index) +
                               ": " + e.what());
  };
  try {
    if (record.face_landmarks) {
      const auto& face = *record.face_landmarks;
      report.pose = estimate_head_pose(face, cfg);
      if (face.has_iris()) report.gaze = estimate_gaze(face, cfg);
      report.mouth = estimate_mouth(face, cfg);
      if (record.live_embedding && reference_embedding)
        report.identity = verify_identity(*record.live_embedding, *reference_embedding, cfg.identity_threshold);
    }
  } catch (const Error& e) {
    throw context(e);
  }
  return report;
}

std::size_t largest_face(const std::vector<LandmarkSet>& faces) {
  if (faces.empty()) throw Error(Errc::EmptyInput, "no faces to choose from");
  std::size_t best = 0;
  double best_area = -1.0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const auto xy = faces[i].points.leftCols<2>();
    const Eigen::RowVector2d extent = xy.colwise().maxCoeff() - xy.colwise().minCoeff();
    const double area = extent.x() * extent.y();
    if (area > best_area) {
      best_area = area;
      best = i;
    }
  }
  return best;
}

}  // namespace proctor
