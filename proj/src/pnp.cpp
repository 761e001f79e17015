#include "proctor/pnp.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "proctor/error.hpp"

namespace proctor {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

double wrap_degrees(double a) { return a <= -180.0 ? a + 360.0 : a; }

struct Residuals {
  Eigen::VectorXd r;
  bool in_front = true;
};

Residuals residuals(const Eigen::Matrix3d& R, const Eigen::Vector3d& t, const ModelPoints& model,
                    const Points2& obs, const CameraIntrinsics& k) {
  Residuals out;
  out.r.resize(2 * model.rows());
  for (Eigen::Index i = 0; i < model.rows(); ++i) {
    const Eigen::Vector3d p = R * model.row(i).transpose() + t;
    if (p.z() <= 0.0) out.in_front = false;
    out.r(2 * i) = k.fx * p.x() / p.z() + k.cx - obs(i, 0);
    out.r(2 * i + 1) = k.fy * p.y() / p.z() + k.cy - obs(i, 1);
  }
  return out;
}

double cost_of(const Residuals& res) {
  return res.in_front && res.r.allFinite() ? res.r.squaredNorm() : std::numeric_limits<double>::infinity();
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace

CameraIntrinsics CameraIntrinsics::for_image(int width, int height) {
  CameraIntrinsics k;
  k.fx = k.fy = static_cast<double>(width);
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.image_w = width;
  k.image_h = height;
  k.validate();
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw Error(Errc::ConfigError, "focal lengths must be positive");
  if (!(cx > 0.0 && cx < image_w && cy > 0.0 && cy < image_h))
    throw Error(Errc::ConfigError, "principal point must lie inside the image");
}

CanonicalFaceModel CanonicalFaceModel::from_face_frame(std::vector<std::string> names, std::vector<int> indices,
                                                       const ModelPoints& face_frame_points) {
  CanonicalFaceModel m{std::move(names), std::move(indices), face_frame_points};
  m.points.col(1) *= -1.0;
  m.points.col(2) *= -1.0;
  m.validate();
  return m;
}

CanonicalFaceModel CanonicalFaceModel::six_point() {
  ModelPoints pts(6, 3);
  // image-left features carry negative x
  pts << 0.0, 0.0, 0.0,          // nose tip
      0.0, -330.0, -65.0,        // chin
      -225.0, 170.0, -135.0,     // outer corner of the image-left eye
      225.0, 170.0, -135.0,      // outer corner of the image-right eye
      -150.0, -150.0, -125.0,    // image-left mouth corner
      150.0, -150.0, -125.0;     // image-right mouth corner
  return from_face_frame({"nose_tip", "chin", "right_eye_outer", "left_eye_outer", "mouth_right", "mouth_left"},
                         {1, 152, 33, 263, 61, 291}, pts);
}

void CanonicalFaceModel::validate() const {
  if (points.rows() < 4) throw Error(Errc::DegenerateInput, "face model needs at least 4 points");
  if (static_cast<std::size_t>(points.rows()) != landmark_indices.size() ||
      landmark_indices.size() != names.size())
    throw Error(Errc::DegenerateInput, "face model names, indices and points differ in length");
  if (!points.allFinite()) throw Error(Errc::NonFiniteInput, "face model has non-finite coordinates");
  const ModelPoints centered = points.rowwise() - points.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& s = svd.singularValues();
  if (s(2) <= 1e-9 * s(0)) throw Error(Errc::DegenerateInput, "face model points are coplanar");
}

Points2 project_points(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                       const ModelPoints& model, const CameraIntrinsics& k) {
  Points2 out(model.rows(), 2);
  for (Eigen::Index i = 0; i < model.rows(); ++i) {
    const Eigen::Vector3d p = rotation * model.row(i).transpose() + translation;
    out(i, 0) = k.fx * p.x() / p.z() + k.cx;
    out(i, 1) = k.fy * p.y() / p.z() + k.cy;
  }
  return out;
}

PoseSolution solve_head_pose(const Points2& image_points, const ModelPoints& model, const CameraIntrinsics& k,
                             const PnPSettings& settings) {
  if (image_points.rows() != model.rows())
    throw Error(Errc::DegenerateInput, "image and model point counts differ");
  if (model.rows() < 4) throw Error(Errc::DegenerateInput, "PnP needs at least 4 correspondences");
  if (!image_points.allFinite() || !model.allFinite())
    throw Error(Errc::NonFiniteInput, "PnP input contains non-finite values");
  k.validate();

  const Eigen::Index n = model.rows();
  PoseSolution sol;
  sol.translation = settings.initial_translation;
  auto res = residuals(sol.rotation, sol.translation, model, image_points, k);
  double cost = cost_of(res);
  double lambda = settings.initial_damping;

  Eigen::MatrixXd J(2 * n, 6);
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    sol.iterations = iter + 1;
    // Jacobian of the residuals w.r.t. a left rotation increment and t.
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d rx = sol.rotation * model.row(i).transpose();
      const Eigen::Vector3d p = rx + sol.translation;
      const double iz = 1.0 / p.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz, 0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
      J.block<2, 3>(2 * i, 0) = dproj * (-skew(rx));
      J.block<2, 3>(2 * i, 3) = dproj;
    }
    const Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
    const Eigen::Matrix<double, 6, 1> g = J.transpose() * res.r;

    Eigen::Matrix<double, 6, 6> A = H;
    A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
    const Eigen::Matrix<double, 6, 1> delta = A.ldlt().solve(-g);
    if (!delta.allFinite()) {
      lambda *= 10.0;
      continue;
    }

    const Eigen::Vector3d w = delta.head<3>();
    const double angle = w.norm();
    const Eigen::Matrix3d dR =
        angle > 0.0 ? Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() : Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d R_new = dR * sol.rotation;
    const Eigen::Vector3d t_new = sol.translation + delta.tail<3>();
    auto res_new = residuals(R_new, t_new, model, image_points, k);
    const double cost_new = cost_of(res_new);

    if (cost_new < cost) {
      sol.rotation = R_new;
      sol.translation = t_new;
      res = std::move(res_new);
      cost = cost_new;
      lambda = std::max(lambda / 10.0, 1e-15);
    } else {
      lambda *= 10.0;
    }
    if (delta.norm() < settings.step_tolerance) {
      sol.converged = true;
      break;
    }
  }
  // Re-orthonormalize accumulated rotation products.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sol.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  sol.rotation = svd.matrixU() * svd.matrixV().transpose();
  sol.reproj_rmse = std::sqrt(cost / static_cast<double>(n));
  return sol;
}

EulerAngles euler_angles(const Eigen::Matrix3d& R) {
  if (!R.allFinite()) throw Error(Errc::NotARotation, "matrix has non-finite entries");
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 || R.determinant() <= 0.0)
    throw Error(Errc::NotARotation, "matrix is not orthonormal with determinant +1");

  EulerAngles a;
  const double cos_yaw = std::hypot(R(0, 0), R(1, 0));
  if (cos_yaw > 1e-9) {
    a.pitch = std::atan2(R(2, 1), R(2, 2));
    a.yaw = std::atan2(-R(2, 0), cos_yaw);
    a.roll = std::atan2(R(1, 0), R(0, 0));
  } else {
    a.pitch = std::atan2(-R(1, 2), R(1, 1));
    a.yaw = R(2, 0) < 0.0 ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
    a.roll = 0.0;
  }
  return {wrap_degrees(a.pitch * kDeg), wrap_degrees(a.yaw * kDeg), wrap_degrees(a.roll * kDeg)};
}

Eigen::Matrix3d rotation_from_euler(const EulerAngles& a) {
  using Eigen::AngleAxisd;
  using Eigen::Vector3d;
  return (AngleAxisd(a.roll / kDeg, Vector3d::UnitZ()) * AngleAxisd(a.yaw / kDeg, Vector3d::UnitY()) *
          AngleAxisd(a.pitch / kDeg, Vector3d::UnitX()))
      .toRotationMatrix();
}

}  // namespace proctor
