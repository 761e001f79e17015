#include <doctest.h>

#include <set>

#include "proctor/error.hpp"
#include "proctor/features.hpp"
#include "proctor/rng.hpp"
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

FeatureMatrix random_rows(Rng& rng, int n, double missing_rate) {
  FeatureMatrix m(n, kNumFeatures);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < kNumFeatures; ++j)
      m(i, j) = (i > 0 && rng.bernoulli(missing_rate)) ? kMissing : rng.normal(j, 1.0 + j);
  return m;
}

std::vector<FeatureVector> labeled(int n) {
  std::vector<FeatureVector> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    v[static_cast<std::size_t>(i)].values.setConstant(i);
    v[static_cast<std::size_t>(i)].frame_index = static_cast<std::uint64_t>(i);
    v[static_cast<std::size_t>(i)].label = i % 3 == 0;
  }
  return v;
}

}  // namespace

TEST_CASE("schema") {
  const auto& s = FeatureSchema::current();
  CHECK(s.names.size() == 27);
  std::set<std::string_view> unique(s.names.begin(), s.names.end());
  CHECK(unique.size() == 27);
  CHECK(s.index_of("face_count") == 0);
  CHECK(s.index_of("global_min_distance") == feature::GlobalMinDistance);
  CHECK(s.index_of("dist_watch") == feature::DistFirst + 5);
  CHECK(s.names.back() == "num_items");
  CHECK(code_of([&] { s.index_of("nope"); }) == Errc::SchemaMismatch);
}

TEST_CASE("assemble with no face and no hands") {
  FaceGeometryReport face;
  face.face_count = 0;
  const auto v = assemble(face, InteractionReport{});
  CHECK(v.values(feature::FaceCount) == 0.0);
  for (int j = feature::IdentitySimilarity; j <= feature::MouthState; ++j) CHECK(is_missing(v.values(j)));
  for (int c = 0; c < kNumItemClasses; ++c) CHECK(is_missing(v.values(feature::DistFirst + c)));
  CHECK(is_missing(v.values(feature::GlobalMinDistance)));

  FeatureSchema other = FeatureSchema::current();
  other.version = 99;
  CHECK(code_of([&] { assemble(face, InteractionReport{}, other); }) == Errc::SchemaMismatch);
}

TEST_CASE("assemble a frontal, item-free generator frame") {
  ScenarioScript sc{"f", "", {{Behavior::Normal, 30}}, 10.0, {0.002, 0.0}, 21};
  const auto gen = generate_session(sc);
  const FaceConfig cfg;
  int checked = 0;
  for (const auto& f : gen.stream.frames) {
    if (!f.face_landmarks || !f.detections.empty()) continue;
    const auto v = assemble(analyze_face_frame(f, cfg, &gen.reference_embedding), analyze_hand_frame(f));
    for (int j = 0; j < kNumFeatures; ++j) {
      const bool distance = (j >= feature::DistFirst && j <= feature::GlobalMinDistance);
      CHECK(is_missing(v.values(j)) == distance);
    }
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("assemble a phone_use generator frame") {
  ScenarioScript sc{"p", "", {{Behavior::PhoneUse, 30}}, 10.0, {0.002, 0.0}, 22};
  const auto gen = generate_session(sc);
  for (const auto& f : gen.stream.frames) {
    const auto v = assemble(analyze_face_frame(f, FaceConfig{}, &gen.reference_embedding), analyze_hand_frame(f));
    CHECK(v.values(feature::ConfFirst) > 0.0);
    CHECK_FALSE(is_missing(v.values(feature::DistFirst)));
  }
}

TEST_CASE("imputer") {
  FeatureMatrix m = FeatureMatrix::Constant(3, kNumFeatures, 1.0);
  m(0, 4) = 1.0;
  m(1, 4) = kMissing;
  m(2, 4) = 3.0;
  const auto st = fit_imputer(m);
  CHECK(st.means(4) == 2.0);
  CHECK(st.counts[4] == 2);
  const auto out = apply_imputer(st, m);
  CHECK(out(1, 4) == 2.0);
  CHECK(out(0, 4) == 1.0);
  CHECK(out(2, 4) == 3.0);
  const FeatureRow full = FeatureRow::LinSpaced(kNumFeatures, -3, 3);
  CHECK(apply_imputer(st, full) == full);

  m.col(7).setConstant(kMissing);
  CHECK(code_of([&] { fit_imputer(m); }) == Errc::AllMissingFeature);
}

TEST_CASE("scaler") {
  FeatureMatrix m = FeatureMatrix::Zero(3, kNumFeatures);
  m.col(0) << 1, 2, 3;
  m.col(1) << 5, 5, 5;
  const auto st = fit_scaler(m);
  CHECK(st.means(0) == 2.0);
  CHECK(st.stds(0) == doctest::Approx(0.8165).epsilon(1e-4));
  CHECK(st.stds(1) == 1.0);
  const auto out = apply_scaler(st, m);
  CHECK(out(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(out(1, 0) == 0.0);
  CHECK(out(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
  CHECK(out.col(1).isZero());
  CHECK(code_of([] { fit_scaler(FeatureMatrix(0, kNumFeatures)); }) == Errc::EmptyInput);
  m(0, 3) = kMissing;
  CHECK(code_of([&] { fit_scaler(m); }) == Errc::NonFiniteFeature);
}

TEST_CASE("preprocessed training columns are standardized") {
  Rng rng(31);
  const FeatureMatrix raw = random_rows(rng, 400, 0.2);
  const auto pre = Preprocessor::fit(raw);
  const FeatureMatrix z = pre.transform(raw);
  for (int j = 0; j < kNumFeatures; ++j) {
    const double mean = z.col(j).mean();
    const double var = (z.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-9);
  }
  // missing cells become the exact training mean before scaling
  for (int j = 0; j < kNumFeatures; ++j) {
    double s = 0;
    int n = 0;
    for (int i = 0; i < raw.rows(); ++i)
      if (!is_missing(raw(i, j))) {
        s += raw(i, j);
        ++n;
      }
    CHECK(pre.imputer.means(j) == s / n);
  }
  FeatureRow row = raw.row(0).transpose();
  row(5) = kMissing;
  CHECK(pre.transform(row)(5) == (pre.imputer.means(5) - pre.scaler.means(5)) / pre.scaler.stds(5));
}

TEST_CASE("preprocessor persistence") {
  Rng rng(32);
  const auto pre = Preprocessor::fit(random_rows(rng, 50, 0.1));
  const auto back = Preprocessor::from_json(pre.to_json());
  CHECK(back.imputer.means == pre.imputer.means);
  CHECK(back.scaler.stds == pre.scaler.stds);
  CHECK(back.imputer.counts == pre.imputer.counts);
  CHECK(back.fingerprint() == pre.fingerprint());
  CHECK(back.fingerprint().size() == 16);

  std::string text = pre.to_json();
  text.replace(text.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  CHECK(code_of([&] { Preprocessor::from_json(text); }) == Errc::VersionMismatch);

  const auto path = std::filesystem::temp_directory_path() / "proctor_pre.json";
  pre.save(path);
  CHECK(Preprocessor::load(path).fingerprint() == pre.fingerprint());
}

TEST_CASE("window buffer evicts oldest first") {
  WindowBuffer b(3);
  for (int i = 0; i < 5; ++i) {
    FeatureVector v;
    v.values.setConstant(i);
    v.frame_index = static_cast<std::uint64_t>(i);
    b.push(v);
    CHECK(b.size() == std::min<std::size_t>(static_cast<std::size_t>(i) + 1, 3));
  }
  CHECK(b.full());
  CHECK(b.front().frame_index == 2);
  CHECK(b.back().frame_index == 4);
  const auto m = b.matrix();
  CHECK(m.rows() == 3);
  CHECK(m(0, 0) == 2.0);
  CHECK(m(2, 0) == 4.0);
  CHECK(code_of([] { WindowBuffer(0); }) == Errc::ConfigError);
}

TEST_CASE("sequence construction") {
  CHECK(build_sequences(labeled(17), 15).size() == 2);
  CHECK(build_sequences(labeled(15), 15).empty());
  const auto one = build_sequences(labeled(16), 15);
  REQUIRE(one.size() == 1);
  CHECK(one[0].target_frame_index == 15);
  CHECK(one[0].target == (15 % 3 == 0));
  CHECK(one[0].window.rows() == 15);
  CHECK(one[0].window(14, 0) == 14.0);

  Rng rng(33);
  for (int t = 0; t < 100; ++t) {
    const int w = 1 + static_cast<int>(rng.below(20));
    const int n = static_cast<int>(rng.below(60));
    const auto seqs = build_sequences(labeled(n), static_cast<std::size_t>(w));
    CHECK(seqs.size() == static_cast<std::size_t>(std::max(0, n - w)));
    for (std::size_t i = 0; i < seqs.size(); ++i) CHECK(seqs[i].window(0, 0) == static_cast<double>(i));
  }

  auto v = labeled(20);
  v[17].label.reset();
  CHECK(code_of([&] { build_sequences(v, 5); }) == Errc::MissingLabel);
}
