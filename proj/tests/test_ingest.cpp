#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "proctor/error.hpp"
#include "proctor/ingest.hpp"
#include "proctor/rng.hpp"

using namespace proctor;
namespace fs = std::filesystem;

namespace {

LandmarkSet grid(LandmarkKind kind, int n) {
  LandmarkSet s{kind, Points3(n, 3)};
  for (int i = 0; i < n; ++i) s.points.row(i) << (i % 20) / 20.0, (i / 20) / 30.0, -0.01 * (i % 7);
  return s;
}

FrameRecord sample_record(std::uint64_t index = 0) {
  FrameRecord r;
  r.session_id = "s1";
  r.frame_index = index;
  r.timestamp_ms = index * 100;
  r.face_landmarks = grid(LandmarkKind::Face, kFaceMeshPoints);
  r.face_count = 1;
  Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(kEmbeddingDim, -1.0, 2.0);
  r.live_embedding = e.normalized();
  r.hands.push_back(grid(LandmarkKind::Hand, kHandPoints));
  r.label = false;
  return r;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::IoError;
}

fs::path temp_file(const std::string& name, const std::string& body) {
  const auto p = fs::temp_directory_path() / ("proctor_ingest_" + name);
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

}  // namespace

TEST_CASE("hand-written record round-trips") {
  const FrameRecord r = sample_record(3);
  const std::string line = serialize_frame_record(r);
  const FrameRecord back = parse_frame_record(line);
  CHECK(back == r);
  CHECK(back.face_count == 1);
  CHECK(back.hands.size() == 1);
  CHECK(back.detections.empty());
  CHECK(serialize_frame_record(back) == line);
}

TEST_CASE("round-trip keeps detections, iris landmarks and missing fields") {
  FrameRecord r = sample_record(1);
  r.face_landmarks = grid(LandmarkKind::Face, kFaceMeshWithIrisPoints);
  r.detections.push_back({ItemClass::Sheet, 0.73, BBox(0.1, 0.2, 0.3, 0.45), Camera::FaceCam});
  r.detections.push_back({ItemClass::Watch, 0.1 + 1e-17, BBox(0.5, 0.5, 0.51, 0.52), Camera::HandCam});
  CHECK(parse_frame_record(serialize_frame_record(r)) == r);

  FrameRecord empty;
  empty.session_id = "x";
  const auto back = parse_frame_record(serialize_frame_record(empty));
  CHECK_FALSE(back.face_landmarks.has_value());
  CHECK_FALSE(back.live_embedding.has_value());
  CHECK_FALSE(back.label.has_value());
  CHECK(back == empty);
}

TEST_CASE("invariant breaches are schema violations") {
  FrameRecord r = sample_record();
  r.face_landmarks = grid(LandmarkKind::Face, 467);
  CHECK(code_of([&] { parse_frame_record(serialize_frame_record(r)); }) == Errc::SchemaViolation);

  r = sample_record();
  *r.live_embedding *= 0.5;
  CHECK(code_of([&] { parse_frame_record(serialize_frame_record(r)); }) == Errc::SchemaViolation);

  r = sample_record();
  r.hands[0].points(0, 0) = 1.5;
  CHECK(code_of([&] { validate(r); }) == Errc::SchemaViolation);

  CHECK(code_of([] { BBox(0.5, 0.5, 0.5, 0.6); }) == Errc::SchemaViolation);
  CHECK(code_of([] { BBox(0.6, 0.1, 0.5, 0.6); }) == Errc::SchemaViolation);

  auto line = serialize_frame_record(sample_record());
  r = sample_record();
  r.detections.push_back({ItemClass::Chits, 0.5, BBox(0.1, 0.1, 0.2, 0.2), Camera::HandCam});
  line = serialize_frame_record(r);
  line.replace(line.find("\"chits\""), 7, "\"laptop\"");
  CHECK(code_of([&] { parse_frame_record(line); }) == Errc::SchemaViolation);
}

TEST_CASE("malformed lines") {
  CHECK(code_of([] { parse_frame_record("{not json"); }) == Errc::MalformedRecord);
  CHECK(code_of([] { parse_frame_record("[]"); }) == Errc::MalformedRecord);
  auto line = serialize_frame_record(sample_record());
  line.insert(1, "\"extra\":1,");
  CHECK(code_of([&] { parse_frame_record(line); }) == Errc::MalformedRecord);
  line = serialize_frame_record(sample_record());
  line.replace(line.find("\"face_count\":1"), 14, "\"face_count\":\"1\"");
  CHECK(code_of([&] { parse_frame_record(line); }) == Errc::MalformedRecord);
}

TEST_CASE("read_session order handling") {
  std::string body;
  for (int i : {0, 1, 2}) body += serialize_frame_record(sample_record(static_cast<std::uint64_t>(i))) + "\n";
  const auto ok = read_session(temp_file("ok.ndjson", body));
  CHECK(ok.frames.size() == 3);
  CHECK(ok.session_id == "s1");
  CHECK(ok.frame_rate_hz == doctest::Approx(10.0));

  std::string bad;
  for (int i : {0, 2, 1}) bad += serialize_frame_record(sample_record(static_cast<std::uint64_t>(i))) + "\n";
  const auto p = temp_file("bad.ndjson", bad);
  SessionReader reader(p);
  CHECK(reader.next().has_value());
  CHECK(reader.next().has_value());
  CHECK(code_of([&] { reader.next(); }) == Errc::OrderViolation);
  CHECK(reader.line_number() == 3);

  const auto empty = read_session(temp_file("empty.ndjson", ""));
  CHECK(empty.frames.empty());

  CHECK(code_of([] { read_session("/nonexistent/proctor/x.ndjson"); }) == Errc::IoError);
}

TEST_CASE("write then read is identity") {
  SessionStream s;
  s.session_id = "s1";
  s.frame_rate_hz = 5.0;
  for (std::uint64_t i = 0; i < 4; ++i) {
    auto r = sample_record(i);
    r.timestamp_ms = i * 200;
    s.frames.push_back(r);
  }
  const auto p = fs::temp_directory_path() / "proctor_ingest_rt.ndjson";
  write_session(p, s);
  const auto back = read_session(p);
  CHECK(back.frame_rate_hz == doctest::Approx(5.0));
  REQUIRE(back.frames.size() == s.frames.size());
  for (std::size_t i = 0; i < s.frames.size(); ++i) CHECK(back.frames[i] == s.frames[i]);
}

TEST_CASE("random records survive serialization") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    FrameRecord r = sample_record(rng.below(1000));
    for (Eigen::Index i = 0; i < r.face_landmarks->points.rows(); ++i)
      r.face_landmarks->points.row(i) << rng.uniform(), rng.uniform(), rng.normal();
    const int ndet = static_cast<int>(rng.below(4));
    for (int d = 0; d < ndet; ++d) {
      const double x = rng.uniform(0.0, 0.8), y = rng.uniform(0.0, 0.8);
      r.detections.push_back({kAllItemClasses[rng.below(6)], rng.uniform(), BBox(x, y, x + 0.1, y + 0.15),
                              rng.bernoulli(0.5) ? Camera::HandCam : Camera::FaceCam});
    }
    CHECK(parse_frame_record(serialize_frame_record(r)) == r);
  }
}
