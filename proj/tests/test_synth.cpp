#include <doctest.h>

#include <functional>
#include <map>

#include "proctor/error.hpp"
#include "proctor/face_geometry.hpp"
#include "proctor/hand_interaction.hpp"
#include "proctor/hash.hpp"
#include "proctor/synth.hpp"

using namespace proctor;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::IoError;
}

std::string serialize(const GeneratedSession& s) {
  std::string out;
  for (const auto& f : s.stream.frames) out += serialize_frame_record(f) + "\n";
  return out;
}

std::string benchmark_hash(const Benchmark& b) {
  std::string all;
  for (const auto* split : {&b.train, &b.test})
    for (const auto& s : *split) all += serialize(s);
  return content_hash(all);
}

bool has_item(const InteractionReport& r, ItemClass c) {
  return r.per_class_confidence[static_cast<std::size_t>(c)] > 0.0;
}

// Whether the frame shows the feature signature its behavior is scripted
// to produce.
bool characteristic(Behavior b, const FaceGeometryReport& face, const InteractionReport& hand) {
  switch (b) {
    case Behavior::Normal:
      return face.pose && face.pose->zone == PoseZone::White && face.gaze &&
             face.gaze->gaze_class == GazeClass::Center && hand.num_items == 0;
    case Behavior::LookAway:
      return face.pose && face.pose->zone == PoseZone::Red;
    case Behavior::PhoneUse:
      return has_item(hand, ItemClass::CellPhone) && hand.per_class_min_distance[0].has_value();
    case Behavior::Talking:
      return face.mouth && face.mouth->state == MouthState::Open;
    case Behavior::Impostor:
      return face.identity && !face.identity->match;
    case Behavior::NotesPeek:
      return (has_item(hand, ItemClass::Chits) || has_item(hand, ItemClass::Sheet)) && face.pose &&
             face.pose->pitch < -15.0;
  }
  return false;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  ScenarioScript sc{"d", "", {{Behavior::Normal, 40}, {Behavior::Talking, 40}}, 10.0, {}, 77};
  const auto a = generate_session(sc);
  const auto b = generate_session(sc);
  CHECK(serialize(a) == serialize(b));
  CHECK(a.reference_embedding == b.reference_embedding);
  sc.seed = 78;
  CHECK(serialize(generate_session(sc)) != serialize(a));
}

TEST_CASE("labels follow the segments") {
  ScenarioScript sc{"l", "", {{Behavior::Normal, 300}, {Behavior::PhoneUse, 300}}, 10.0, {}, 5};
  const auto s = generate_session(sc);
  REQUIRE(s.stream.frames.size() == 600);
  int positives = 0;
  for (std::size_t i = 0; i < 600; ++i) {
    const auto& f = s.stream.frames[i];
    validate(f);
    CHECK(f.frame_index == i);
    CHECK(*f.label == (i >= 300));
    positives += *f.label;
  }
  CHECK(positives == 300);
  CHECK(s.stream.frames[10].timestamp_ms == 1000);
}

TEST_CASE("phone moves closer to the hand than anything in normal frames") {
  ScenarioScript sc{"p", "", {{Behavior::Normal, 300}, {Behavior::PhoneUse, 300}}, 10.0, {}, 6};
  const auto s = generate_session(sc);
  double sum[2] = {0, 0};
  int n[2] = {0, 0};
  for (const auto& f : s.stream.frames) {
    const auto r = analyze_hand_frame(f);
    if (!r.global_min_distance) continue;
    sum[*f.label] += *r.global_min_distance;
    ++n[*f.label];
  }
  REQUIRE(n[0] > 0);
  REQUIRE(n[1] > 0);
  CHECK(sum[1] / n[1] < sum[0] / n[0]);
}

TEST_CASE("script validation") {
  ScenarioScript sc{"s", "", {{Behavior::Normal, 10}}, 10.0, {}, 1};
  CHECK(code_of([&] { generate_session(sc); }) == Errc::ScriptTooShort);
  sc.segments[0].duration_frames = 0;
  CHECK(code_of([&] { generate_session(sc); }) == Errc::ConfigError);
  sc.segments[0].duration_frames = 20;
  sc.frame_rate_hz = 0;
  CHECK(code_of([&] { generate_session(sc); }) == Errc::ConfigError);
  CHECK(code_of([] { scripts_from_json("{\"sessions\": 3}"); }) == Errc::ConfigError);
}

TEST_CASE("script files round-trip") {
  const auto scripts = default_benchmark_scripts();
  const auto back = scripts_from_json(scripts_to_json(scripts));
  REQUIRE(back.size() == scripts.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].session_id == scripts[i].session_id);
    CHECK(back[i].seed == scripts[i].seed);
    CHECK(back[i].total_frames() == scripts[i].total_frames());
    CHECK(serialize(generate_session(back[i])) == serialize(generate_session(scripts[i])));
    if (i == 0) break;
  }
  Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(8, 1, 8).normalized();
  CHECK(embedding_from_json(embedding_to_json(e)) == e);
}

TEST_CASE("default benchmark") {
  const auto bench = default_benchmark();
  REQUIRE(bench.train.size() + bench.test.size() == 10);
  double train_frames = 0, total = 0;
  for (const auto* split : {&bench.train, &bench.test}) {
    int pos = 0, neg = 0;
    for (const auto& s : *split) {
      total += static_cast<double>(s.stream.frames.size());
      if (split == &bench.train) train_frames += static_cast<double>(s.stream.frames.size());
      for (const auto& f : s.stream.frames) *f.label ? ++pos : ++neg;
    }
    CHECK(pos > 0);
    CHECK(neg > 0);
  }
  CHECK(total > 5500);
  CHECK(total < 6500);
  CHECK(std::abs(train_frames / total - 0.8) <= 0.02);
  CHECK(benchmark_hash(bench) == benchmark_hash(default_benchmark()));

  const FaceConfig cfg;
  std::map<Behavior, std::pair<int, int>> tally;  // (characteristic, total)
  for (const auto* split : {&bench.train, &bench.test})
    for (const auto& s : *split)
      for (std::size_t i = 0; i < s.stream.frames.size(); ++i) {
        const auto& f = s.stream.frames[i];
        const bool ok = characteristic(s.behaviors[i], analyze_face_frame(f, cfg, &s.reference_embedding),
                                       analyze_hand_frame(f));
        auto& t = tally[s.behaviors[i]];
        t.first += ok;
        ++t.second;
      }
  CHECK(tally.size() == 6);
  for (const auto& [b, t] : tally) {
    const double rate = static_cast<double>(t.first) / t.second;
    INFO(to_string(b), " ", rate);
    MESSAGE(to_string(b), " characteristic in ", t.first, " of ", t.second, " frames");
    CHECK(rate >= 0.9);
  }
}
