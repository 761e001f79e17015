#include <doctest.h>

#include "proctor/error.hpp"
#include "proctor/face_geometry.hpp"
#include "proctor/rng.hpp"
#include "proctor/synth.hpp"

using namespace proctor;
using Eigen::Vector2d;

TEST_CASE("radial deviation and zones") {
  CHECK(radial_deviation(0.0, 0.0, 0.0) == 0.0);
  CHECK(classify_pose_zone(0.0) == PoseZone::White);
  CHECK(std::abs(radial_deviation(3.0, 4.0, 0.0) - 5.0) < 1e-12);
  const double r = radial_deviation(10.0, 10.0, 10.0);
  CHECK(r == doctest::Approx(17.3205).epsilon(1e-5));
  CHECK(classify_pose_zone(r) == PoseZone::Yellow);
  CHECK(classify_pose_zone(15.0) == PoseZone::White);
  CHECK(classify_pose_zone(30.0) == PoseZone::Yellow);
  CHECK(classify_pose_zone(30.0001) == PoseZone::Red);

  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(-90, 90), b = rng.uniform(-90, 90), c = rng.uniform(-90, 90);
    const double base = radial_deviation(a, b, c);
    CHECK(radial_deviation(-a, b, -c) == base);
    CHECK(std::abs(radial_deviation(c, a, b) - base) < 1e-12);
    CHECK(std::abs(radial_deviation(b, c, a) - base) < 1e-12);
  }
}

TEST_CASE("iris ratio") {
  const Vector2d pl(10, 4), pr(2, 1);
  CHECK(std::abs(iris_ratio(Vector2d(0.5 * (pl + pr)), pl, pr) - 0.5) < 1e-12);
  CHECK(iris_ratio(pr, pl, pr) == 0.0);
  CHECK(iris_ratio(pl, pl, pr) == 1.0);
  CHECK(iris_ratio(Vector2d(pl + (pl - pr)), pl, pr) == 1.0);
  CHECK_THROWS_AS(iris_ratio(pl, pl, pl), Error);

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vector2d a(rng.uniform(), rng.uniform()), b(rng.uniform(), rng.uniform());
    const Vector2d c = a + rng.uniform() * (b - a);
    CHECK(std::abs(iris_ratio(c, a, b) + iris_ratio(c, b, a) - 1.0) < 1e-12);
  }
}

TEST_CASE("gaze classes") {
  CHECK(classify_gaze(0.5, 0.5) == GazeClass::Center);
  CHECK(classify_gaze(0.2, 0.25) == GazeClass::Right);
  CHECK(classify_gaze(0.8, 0.75) == GazeClass::Left);
}

TEST_CASE("shoelace area") {
  Eigen::Matrix<double, 4, 2> sq;
  sq << 0, 0, 1, 0, 1, 1, 0, 1;
  CHECK(std::abs(shoelace_area(sq) - 1.0) < 1e-12);
  Eigen::Matrix<double, 3, 2> tri;
  tri << 0, 0, 1, 0, 0, 1;
  CHECK(std::abs(shoelace_area(tri) - 0.5) < 1e-12);
  CHECK(shoelace_area(Eigen::Matrix<double, 4, 2>(sq.colwise().reverse())) == shoelace_area(sq));
  CHECK_THROWS_AS(shoelace_area(Eigen::Matrix<double, 2, 2>::Identity()), Error);

  Rng rng(3);
  Eigen::Matrix<double, 20, 2> poly;
  for (int k = 0; k < 20; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / 20.0, rad = rng.uniform(1.0, 2.0);
    poly.row(k) << rad * std::cos(phi), rad * std::sin(phi);
  }
  const double a = shoelace_area(poly);
  const double th = 0.7;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Eigen::Matrix<double, 20, 2> moved = (poly * R.transpose()).rowwise() + Eigen::RowVector2d(5, -3);
  CHECK(std::abs(shoelace_area(moved) - a) < 1e-12);
  CHECK(std::abs(shoelace_area(Eigen::Matrix<double, 20, 2>(3.0 * poly)) - 9.0 * a) < 1e-11);
}

TEST_CASE("mouth states") {
  CHECK(classify_mouth(0.0) == MouthState::Closed);
  CHECK(classify_mouth(0.02) == MouthState::Partial);
  CHECK(classify_mouth(0.059) == MouthState::Partial);
  CHECK(classify_mouth(0.06) == MouthState::Open);
}

TEST_CASE("identity verification") {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(kEmbeddingDim), b = Eigen::VectorXd::Zero(kEmbeddingDim);
  a(0) = 1.0;
  b(1) = 1.0;
  auto r = verify_identity(a, a);
  CHECK(r.similarity == doctest::Approx(1.0));
  CHECK(r.match);
  r = verify_identity(a, b);
  CHECK(r.similarity == 0.0);
  CHECK_FALSE(r.match);
  CHECK(r.threshold_used == 0.55);
  r = verify_identity(a, Eigen::VectorXd(-a));
  CHECK(r.similarity == doctest::Approx(-1.0));
  CHECK_FALSE(r.match);

  Rng rng(4);
  Eigen::VectorXd u(kEmbeddingDim), v(kEmbeddingDim);
  for (int i = 0; i < kEmbeddingDim; ++i) {
    u(i) = rng.normal();
    v(i) = rng.normal() + u(i);
  }
  u.normalize();
  v.normalize();
  CHECK(verify_identity(u, v).similarity == verify_identity(v, u).similarity);
  CHECK(verify_identity(u, v, 0.6).match == (verify_identity(u, v).similarity >= 0.6));

  CHECK_THROWS_AS(verify_identity(Eigen::VectorXd(2.0 * u), v), Error);
  CHECK_THROWS_AS(verify_identity(Eigen::VectorXd::Unit(10, 0), v), Error);
}

TEST_CASE("frame analysis respects face presence") {
  FrameRecord r;
  r.session_id = "s";
  r.face_count = 0;
  auto rep = analyze_face_frame(r, FaceConfig{}, nullptr);
  CHECK_FALSE(rep.single_face_ok);
  CHECK_FALSE(rep.pose.has_value());
  CHECK_FALSE(rep.gaze.has_value());
  CHECK_FALSE(rep.mouth.has_value());
  CHECK_FALSE(rep.identity.has_value());
}

TEST_CASE("generator frontal frames read as white, center, closed") {
  ScenarioScript sc{"calm", "", {{Behavior::Normal, 200}}, 10.0, {0.002, 0.05}, 9};
  const auto gen = generate_session(sc);
  int checked = 0, ok = 0;
  for (const auto& f : gen.stream.frames) {
    if (!f.face_landmarks) continue;
    const auto rep = analyze_face_frame(f, FaceConfig{}, &gen.reference_embedding);
    REQUIRE(rep.pose);
    REQUIRE(rep.gaze);
    REQUIRE(rep.mouth);
    REQUIRE(rep.identity);
    ++checked;
    ok += rep.pose->zone == PoseZone::White && rep.gaze->gaze_class == GazeClass::Center &&
          rep.mouth->state == MouthState::Closed && rep.identity->match;
  }
  CHECK(checked > 150);
  // brief glances, yawns and glitches are scripted into normal behavior
  CHECK(ok >= 0.8 * checked);
}

TEST_CASE("two faces: analyses still run, single-face flag drops") {
  ScenarioScript sc{"two", "", {{Behavior::Normal, 20}}, 10.0, {0.002, 0.05}, 3};
  auto gen = generate_session(sc);
  FrameRecord f = gen.stream.frames.front();
  f.face_count = 2;
  REQUIRE(f.face_landmarks);
  const auto rep = analyze_face_frame(f, FaceConfig{}, &gen.reference_embedding);
  CHECK_FALSE(rep.single_face_ok);
  CHECK(rep.pose.has_value());
}

TEST_CASE("468-point faces have no gaze reading") {
  ScenarioScript sc{"mesh", "", {{Behavior::Normal, 20}}, 10.0, {0.002, 0.05}, 3};
  auto gen = generate_session(sc);
  FrameRecord f = gen.stream.frames.front();
  REQUIRE(f.face_landmarks);
  f.face_landmarks->points.conservativeResize(kFaceMeshPoints, 3);
  const auto rep = analyze_face_frame(f, FaceConfig{}, nullptr);
  CHECK(rep.pose.has_value());
  CHECK(rep.mouth.has_value());
  CHECK_FALSE(rep.gaze.has_value());
  CHECK_FALSE(rep.identity.has_value());
}

TEST_CASE("largest face") {
  LandmarkSet small{LandmarkKind::Face, Points3::Constant(kFaceMeshPoints, 3, 0.5)};
  small.points.row(0) << 0.4, 0.4, 0;
  LandmarkSet big = small;
  big.points.row(1) << 0.9, 0.95, 0;
  CHECK(largest_face({small, big}) == 1);
  CHECK(largest_face({big, small}) == 0);
  CHECK_THROWS_AS(largest_face({}), Error);
}
