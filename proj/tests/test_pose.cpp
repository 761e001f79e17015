#include <doctest.h>

#include "oracles.hpp"
#include "proctor/error.hpp"
#include "proctor/pnp.hpp"
#include "proctor/rng.hpp"

using namespace proctor;

namespace {

std::vector<Eigen::Vector3d> rows(const ModelPoints& m) {
  std::vector<Eigen::Vector3d> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

Points2 oracle_image(const CanonicalFaceModel& model, const CameraIntrinsics& k, double pitch, double yaw,
                     double roll, const Eigen::Vector3d& t) {
  const auto px = oracle::project(oracle::compose(pitch, yaw, roll), t, rows(model.points), k.fx, k.fy, k.cx, k.cy);
  Points2 out(static_cast<Eigen::Index>(px.size()), 2);
  for (std::size_t i = 0; i < px.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = px[i].transpose();
  return out;
}

}  // namespace

TEST_CASE("Euler decomposition") {
  auto e = euler_angles(Eigen::Matrix3d::Identity());
  CHECK(e.pitch == doctest::Approx(0.0));
  CHECK(e.yaw == doctest::Approx(0.0));
  CHECK(e.roll == doctest::Approx(0.0));

  e = euler_angles(oracle::rot_y(30.0));
  CHECK(e.pitch == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(e.yaw == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(e.roll == doctest::Approx(0.0).epsilon(1e-12));

  e = euler_angles(oracle::rot_z(10.0) * oracle::rot_y(20.0) * oracle::rot_x(5.0));
  CHECK(std::abs(e.pitch - 5.0) < 1e-9);
  CHECK(std::abs(e.yaw - 20.0) < 1e-9);
  CHECK(std::abs(e.roll - 10.0) < 1e-9);

  e = euler_angles(oracle::compose(25.0, 90.0, 0.0));
  CHECK(std::abs(e.yaw - 90.0) < 1e-6);
  CHECK(e.roll == 0.0);

  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = 1.01;
  CHECK_THROWS_AS(euler_angles(bad), Error);
}

TEST_CASE("rotation_from_euler matches the composed oracle") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double p = rng.uniform(-80, 80), y = rng.uniform(-80, 80), r = rng.uniform(-80, 80);
    CHECK((rotation_from_euler({p, y, r}) - oracle::compose(p, y, r)).cwiseAbs().maxCoeff() < 1e-12);
    const auto e = euler_angles(oracle::compose(p, y, r));
    CHECK(std::abs(e.pitch - p) < 1e-9);
    CHECK(std::abs(e.yaw - y) < 1e-9);
    CHECK(std::abs(e.roll - r) < 1e-9);
  }
}

TEST_CASE("project_points agrees with the oracle projector") {
  const auto model = CanonicalFaceModel::six_point();
  const auto k = CameraIntrinsics::for_image(640, 480);
  const Eigen::Vector3d t(30, -20, 1200);
  const Points2 ours = project_points(oracle::compose(10, -20, 5), t, model.points, k);
  const Points2 ref = oracle_image(model, k, 10, -20, 5, t);
  CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("identity pose is recovered exactly") {
  const auto model = CanonicalFaceModel::six_point();
  const auto k = CameraIntrinsics::for_image(640, 480);
  const auto sol = solve_head_pose(oracle_image(model, k, 0, 0, 0, {0, 0, 1000}), model.points, k);
  const auto e = euler_angles(sol.rotation);
  CHECK(std::abs(e.pitch) < 1e-3);
  CHECK(std::abs(e.yaw) < 1e-3);
  CHECK(std::abs(e.roll) < 1e-3);
  CHECK(sol.reproj_rmse < 1e-6);
  CHECK(sol.converged);
}

TEST_CASE("yaw 20, pitch -10 is recovered") {
  const auto model = CanonicalFaceModel::six_point();
  const auto k = CameraIntrinsics::for_image(640, 480);
  const auto sol = solve_head_pose(oracle_image(model, k, -10, 20, 0, {20, 10, 1100}), model.points, k);
  const auto e = euler_angles(sol.rotation);
  CHECK(std::abs(e.yaw - 20.0) < 0.5);
  CHECK(std::abs(e.pitch + 10.0) < 0.5);
}

TEST_CASE("pixel noise sigma 1 over 100 seeds") {
  const auto model = CanonicalFaceModel::six_point();
  const auto k = CameraIntrinsics::for_image(640, 480);
  const Points2 clean = oracle_image(model, k, -10, 20, 0, {20, 10, 1100});
  double err = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Points2 noisy = clean;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += rng.normal();
    const auto e = euler_angles(solve_head_pose(noisy, model.points, k).rotation);
    err += (std::abs(e.yaw - 20.0) + std::abs(e.pitch + 10.0) + std::abs(e.roll)) / 3.0;
  }
  CHECK(err / 100.0 <= 2.0);
}

TEST_CASE("solver input checks") {
  const auto model = CanonicalFaceModel::six_point();
  const auto k = CameraIntrinsics::for_image(640, 480);
  Points2 three = oracle_image(model, k, 0, 0, 0, {0, 0, 1000}).topRows(3);
  CHECK_THROWS_AS(solve_head_pose(three, model.points.topRows(3), k), Error);
  Points2 nan = oracle_image(model, k, 0, 0, 0, {0, 0, 1000});
  nan(2, 1) = std::nan("");
  try {
    solve_head_pose(nan, model.points, k);
    FAIL("expected NonFiniteInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonFiniteInput);
  }
}

TEST_CASE("canonical model validation") {
  CHECK_NOTHROW(CanonicalFaceModel::six_point().validate());
  ModelPoints flat(6, 3);
  flat << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0, 2, 1, 0, 1, 2, 0;
  CHECK_THROWS_AS(CanonicalFaceModel::from_face_frame({"a", "b", "c", "d", "e", "f"}, {1, 2, 3, 4, 5, 6}, flat), Error);
  const auto m = CanonicalFaceModel::six_point();
  CHECK(m.points.rows() == 6);
  // camera-aligned storage: chin below the nose in the image, eyes above
  CHECK(m.points(1, 1) > 0.0);
  CHECK(m.points(2, 1) < 0.0);
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(CameraIntrinsics::for_image(640, 480).validate());
  CameraIntrinsics k = CameraIntrinsics::for_image(640, 480);
  k.cx = 700;
  CHECK_THROWS_AS(k.validate(), Error);
  k = CameraIntrinsics::for_image(640, 480);
  k.fx = 0;
  CHECK_THROWS_AS(k.validate(), Error);
}
