#include "proctor/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "proctor/error.hpp"
#include "proctor/rng.hpp"

namespace proctor {

using ojson = nlohmann::ordered_json;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

constexpr std::array<std::string_view, 6> kBehaviorNames = {"normal",   "look_away", "phone_use",
                                                            "talking",  "impostor",  "notes_peek"};

// Camera-aligned face geometry in model units (x right, y down, z away).
const Vector3d kRightEyeOuter{-225.0, -170.0, 135.0};
const Vector3d kRightEyeInner{-75.0, -170.0, 135.0};
const Vector3d kLeftEyeInner{75.0, -170.0, 135.0};
const Vector3d kLeftEyeOuter{225.0, -170.0, 135.0};
const Vector3d kMouthCenter{0.0, 150.0, 125.0};
constexpr double kInnerLipHalfWidth = 110.0;
constexpr double kIrisRadius = 18.0;
constexpr double kClosedMouth = 2.0;

struct ItemSpec {
  ItemClass item;
  Vector2d center;
  double confidence;
  Camera camera = Camera::HandCam;
};

/// Latent per-frame state the renderer turns into landmarks and boxes.
struct FrameTruth {
  double pitch = 0.0, yaw = 0.0, roll = 0.0;
  double gaze = 0.5;
  double mouth_half_height = kClosedMouth;
  double similarity = 0.82;
  bool face_visible = true;
  int face_count = 1;
  std::vector<Vector2d> hands;
  std::vector<ItemSpec> items;
};

Vector2d item_size(ItemClass c) {
  switch (c) {
    case ItemClass::CellPhone: return {0.07, 0.12};
    case ItemClass::Chits: return {0.06, 0.05};
    case ItemClass::ClosedBook: return {0.20, 0.15};
    case ItemClass::Headphone: return {0.10, 0.10};
    case ItemClass::Sheet: return {0.18, 0.22};
    case ItemClass::Watch: return {0.05, 0.05};
  }
  return {0.1, 0.1};
}

/// Filler points for mesh indices the analyses never read, fixed for every
/// session.
ModelPoints filler_mesh() {
  Rng rng(0x5eed'face'0000ULL);
  ModelPoints pts(kFaceMeshWithIrisPoints, 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    double x, y;
    do {
      x = rng.uniform(-1.0, 1.0);
      y = rng.uniform(-1.0, 1.0);
    } while (x * x + y * y > 1.0);
    pts(i, 0) = 250.0 * x;
    pts(i, 1) = 20.0 + 320.0 * y;
    pts(i, 2) = 40.0 + 110.0 * (x * x + y * y);
  }
  return pts;
}

/// Hand template with its landmark hull centered on the origin.
Eigen::Matrix<double, kHandPoints, 2> hand_template() {
  Eigen::Matrix<double, kHandPoints, 2> h;
  h.row(0) << 0.0, 0.055;  // wrist
  const std::array<double, 5> angle = {-1.0, -0.45, -0.1, 0.25, 0.6};
  const std::array<double, 5> reach = {0.035, 0.055, 0.06, 0.055, 0.045};
  for (int f = 0; f < 5; ++f) {
    for (int j = 0; j < 4; ++j) {
      const double r = 0.02 + reach[static_cast<std::size_t>(f)] * (j + 1) / 4.0;
      h.row(1 + 4 * f + j) << r * std::sin(angle[static_cast<std::size_t>(f)]),
          0.03 - r * std::cos(angle[static_cast<std::size_t>(f)]);
    }
  }
  const Eigen::RowVector2d lo = h.colwise().minCoeff(), hi = h.colwise().maxCoeff();
  h.rowwise() -= 0.5 * (lo + hi);
  return h;
}

Eigen::VectorXd random_unit(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v.normalized();
}

/// Unit vector with the given cosine similarity to the unit vector `ref`.
Eigen::VectorXd with_similarity(const Eigen::VectorXd& ref, double similarity, Rng& rng) {
  Eigen::VectorXd u = random_unit(rng, ref.size());
  u -= u.dot(ref) * ref;
  u.normalize();
  const double s = std::clamp(similarity, -1.0, 1.0);
  return (s * ref + std::sqrt(1.0 - s * s) * u).normalized();
}

class SessionRenderer {
 public:
  SessionRenderer(const ScenarioScript& script, const SynthOptions& opt)
      : script_(script), opt_(opt), rng_(script.seed), filler_(filler_mesh()), hand_(hand_template()) {
    reference_ = random_unit(rng_, kEmbeddingDim);
    face_center_ = {0.5 + rng_.uniform(-0.05, 0.05), 0.45 + rng_.uniform(-0.04, 0.04)};
    depth_ = rng_.uniform(1350.0, 1650.0);
    spurious_count_ = rng_.below(kNumItemClasses);
    writing_hand_ = {0.55 + rng_.uniform(-0.05, 0.05), 0.66 + rng_.uniform(-0.03, 0.03)};
    if (rng_.bernoulli(0.5)) resting_hand_ = Vector2d{0.32 + rng_.uniform(-0.04, 0.04), 0.76};
  }

  GeneratedSession run() {
    GeneratedSession out;
    out.reference_embedding = reference_;
    out.split = script_.split;
    out.stream.session_id = script_.session_id;
    out.stream.frame_rate_hz = script_.frame_rate_hz;
    std::uint64_t index = 0;
    const double ms_per_frame = 1000.0 / script_.frame_rate_hz;
    for (const auto& seg : script_.segments) {
      begin_segment(seg);
      for (int t = 0; t < seg.duration_frames; ++t, ++index) {
        const FrameTruth truth = step(seg.behavior, t);
        FrameRecord rec = render(truth);
        rec.session_id = script_.session_id;
        rec.frame_index = index;
        rec.timestamp_ms = static_cast<std::uint64_t>(std::llround(static_cast<double>(index) * ms_per_frame));
        rec.label = seg.behavior != Behavior::Normal;
        out.stream.frames.push_back(std::move(rec));
        out.behaviors.push_back(seg.behavior);
      }
    }
    return out;
  }

 private:
  void begin_segment(const BehaviorSegment& seg) {
    const Behavior b = seg.behavior;
    const bool coin = rng_.bernoulli(0.5);
    const bool pick = seg.variant < 0 ? coin : seg.variant == 1;
    side_ = pick ? 1.0 : -1.0;
    target_ = 0.0;
    phase_ = rng_.uniform(0.0, 2.0 * std::numbers::pi);
    transient_left_ = 0;
    switch (b) {
      case Behavior::LookAway: target_ = rng_.uniform(38.0, 55.0); break;
      case Behavior::PhoneUse: {
        const double a = rng_.uniform(0.0, 2.0 * std::numbers::pi);
        phone_offset_ = 0.35 * Vector2d(std::cos(a), -std::abs(std::sin(a)));
        break;
      }
      case Behavior::NotesPeek:
        note_class_ = pick ? ItemClass::Sheet : ItemClass::Chits;
        note_center_ = {rng_.uniform(0.18, 0.32), rng_.uniform(0.72, 0.82)};
        target_ = rng_.uniform(22.0, 28.0);
        break;
      default: break;
    }
  }

  double ou(double& state, double decay, double sigma) {
    state = decay * state + rng_.normal(0.0, sigma);
    return state;
  }

  FrameTruth step(Behavior b, int t) {
    FrameTruth f;
    f.pitch = -3.0 + ou(pose_noise_[0], 0.85, 1.2);
    f.yaw = ou(pose_noise_[1], 0.85, 1.2);
    f.roll = 0.5 * ou(pose_noise_[2], 0.85, 1.2);
    f.gaze = 0.5 + rng_.normal(0.0, 0.025);
    f.mouth_half_height = kClosedMouth + std::abs(rng_.normal(0.0, 0.8));
    f.similarity = 0.82 + rng_.normal(0.0, 0.03);
    ou(hand_drift_[0], 0.9, 0.004);
    ou(hand_drift_[1], 0.9, 0.004);
    f.hands.push_back(writing_hand_ + Vector2d(hand_drift_[0], hand_drift_[1]));
    if (resting_hand_) f.hands.push_back(*resting_hand_ + Vector2d(hand_drift_[1], hand_drift_[0]));

    switch (b) {
      case Behavior::Normal: normal_transients(f); break;
      case Behavior::LookAway: {
        const double ramp = std::min(1.0, (t + 1) / 4.0);
        f.yaw += side_ * target_ * ramp;
        f.gaze += side_ * 0.2 * ramp;
        break;
      }
      case Behavior::PhoneUse: {
        const Vector2d settle = 0.03 * phone_offset_.normalized();
        const Vector2d off = phone_offset_ * std::exp(-t / 3.0) + settle +
                             Vector2d(rng_.normal(0.0, 0.008), rng_.normal(0.0, 0.008));
        f.pitch -= 9.0;
        f.items.push_back({ItemClass::CellPhone, f.hands.front() + off, rng_.uniform(0.55, 0.9)});
        break;
      }
      case Behavior::Talking:
        f.mouth_half_height = 50.0 + 10.0 * std::sin(2.0 * std::numbers::pi * t / 5.0 + phase_);
        f.yaw += side_ * 6.0;
        if (rng_.bernoulli(0.3)) f.face_count = 2;
        break;
      case Behavior::Impostor: f.similarity = 0.25 + rng_.normal(0.0, 0.06); break;
      case Behavior::NotesPeek: {
        f.pitch -= target_ * std::min(1.0, (t + 1) / 2.0);
        if ((t / 4) % 2 == 0)
          f.hands.front() = note_center_ + Vector2d(0.03, -0.02) + Vector2d(rng_.normal(0.0, 0.005), rng_.normal(0.0, 0.005));
        f.items.push_back({note_class_, note_center_, rng_.uniform(0.5, 0.85)});
        break;
      }
    }

    if (rng_.bernoulli(0.01)) {
      f.face_visible = false;
      f.face_count = 0;
    }
    std::erase_if(f.items, [&](const ItemSpec&) { return rng_.bernoulli(script_.noise.detection_dropout); });
    return f;
  }

  /// Brief innocuous events inside normal segments. Each one reproduces a
  /// single frame of some cheating behavior (a glance, an open mouth, a look
  /// at the desk, a phone picked up, a passer-by, an embedding glitch) or
  /// adds a low-confidence stray detection, and lasts one or two frames.
  void normal_transients(FrameTruth& f) {
    if (transient_left_ == 0 && rng_.bernoulli(0.1)) {
      transient_kind_ = static_cast<int>(rng_.below(7));
      transient_left_ = 1 + static_cast<int>(rng_.below(2));
      transient_sign_ = rng_.bernoulli(0.5) ? 1.0 : -1.0;
      transient_value_ = rng_.uniform(0.0, 1.0);
      if (transient_kind_ == 6) transient_item_ = static_cast<ItemClass>(spurious_count_++ % kNumItemClasses);
      transient_pos_ = {rng_.uniform(0.15, 0.85), rng_.uniform(0.45, 0.9)};
    }
    if (transient_left_ == 0) return;
    --transient_left_;
    switch (transient_kind_) {
      case 0:
        f.yaw += transient_sign_ * (38.0 + 17.0 * transient_value_);
        f.gaze += transient_sign_ * 0.2;
        break;
      case 1: f.mouth_half_height = 40.0 + 20.0 * transient_value_; break;
      case 2: f.pitch -= 22.0 + 6.0 * transient_value_; break;
      case 3: {
        const Vector2d off = (0.03 + 0.03 * transient_value_) * Vector2d(transient_sign_, -1.0).normalized();
        f.items.push_back({ItemClass::CellPhone, f.hands.front() + off, 0.55 + 0.35 * transient_value_});
        break;
      }
      case 4: f.face_count = 2; break;
      case 5: f.similarity = 0.25 + 0.1 * transient_value_; break;
      default: f.items.push_back({transient_item_, transient_pos_, 0.3 + 0.35 * transient_value_}); break;
    }
  }

  FrameRecord render(const FrameTruth& f) {
    FrameRecord rec;
    rec.face_count = f.face_count;
    const double sigma = script_.noise.landmark_jitter;
    if (f.face_visible) {
      rec.face_landmarks = render_face(f, sigma);
      rec.live_embedding = with_similarity(reference_, f.similarity, rng_);
    }
    for (const auto& h : f.hands) {
      LandmarkSet set{LandmarkKind::Hand, Points3(kHandPoints, 3)};
      for (int i = 0; i < kHandPoints; ++i) {
        set.points(i, 0) = std::clamp(h.x() + hand_(i, 0) + rng_.normal(0.0, sigma), 0.0, 1.0);
        set.points(i, 1) = std::clamp(h.y() + hand_(i, 1) + rng_.normal(0.0, sigma), 0.0, 1.0);
        set.points(i, 2) = -0.01 * i / kHandPoints;
      }
      rec.hands.push_back(std::move(set));
    }
    for (const auto& it : f.items) {
      const Vector2d half = 0.5 * item_size(it.item);
      const double cx = std::clamp(it.center.x(), half.x(), 1.0 - half.x());
      const double cy = std::clamp(it.center.y(), half.y(), 1.0 - half.y());
      rec.detections.push_back(
          {it.item, it.confidence, BBox(cx - half.x(), cy - half.y(), cx + half.x(), cy + half.y()), it.camera});
    }
    return rec;
  }

  LandmarkSet render_face(const FrameTruth& f, double sigma) {
    ModelPoints mesh = filler_;
    const auto& model = opt_.face.model;
    for (Eigen::Index i = 0; i < model.points.rows(); ++i)
      mesh.row(model.landmark_indices[static_cast<std::size_t>(i)]) = model.points.row(i);
    mesh.row(mesh::kRightEyeOuter) = kRightEyeOuter.transpose();
    mesh.row(mesh::kRightEyeInner) = kRightEyeInner.transpose();
    mesh.row(mesh::kLeftEyeInner) = kLeftEyeInner.transpose();
    mesh.row(mesh::kLeftEyeOuter) = kLeftEyeOuter.transpose();

    // Iris ratio is measured from each eye's image-right corner.
    const double g = std::clamp(f.gaze, 0.0, 1.0);
    const Vector3d right_iris = kRightEyeInner + g * (kRightEyeOuter - kRightEyeInner) - Vector3d(0, 0, 10);
    const Vector3d left_iris = kLeftEyeOuter + g * (kLeftEyeInner - kLeftEyeOuter) - Vector3d(0, 0, 10);
    for (int k = 0; k < 5; ++k) {
      const double a = k == 0 ? 0.0 : std::numbers::pi / 2.0 * (k - 1);
      const Vector3d ring = k == 0 ? Vector3d::Zero() : Vector3d(kIrisRadius * std::cos(a), kIrisRadius * std::sin(a), 0);
      mesh.row(mesh::kRightIrisCenter + k) = (right_iris + ring).transpose();
      mesh.row(mesh::kLeftIrisCenter + k) = (left_iris + ring).transpose();
    }

    const double bh = std::max(0.0, f.mouth_half_height);
    for (std::size_t k = 0; k < mesh::kInnerLip.size(); ++k) {
      const double phi = std::numbers::pi * static_cast<double>(k) / 10.0;
      mesh.row(mesh::kInnerLip[k]) =
          (kMouthCenter + Vector3d(-kInnerLipHalfWidth * std::cos(phi), -bh * std::sin(phi), 0.0)).transpose();
    }

    const auto& k = opt_.face.intrinsics;
    ou(face_drift_[0], 0.95, 0.002);
    ou(face_drift_[1], 0.95, 0.002);
    const Vector2d c = face_center_ + Vector2d(face_drift_[0], face_drift_[1]);
    const Vector3d t((c.x() * k.image_w - k.cx) * depth_ / k.fx, (c.y() * k.image_h - k.cy) * depth_ / k.fy, depth_);
    const Eigen::Matrix3d R = rotation_from_euler({f.pitch, f.yaw, f.roll});
    const Points2 px = project_points(R, t, mesh, k);

    LandmarkSet face{LandmarkKind::Face, Points3(mesh.rows(), 3)};
    for (Eigen::Index i = 0; i < mesh.rows(); ++i) {
      const double depth = (R.row(2).dot(mesh.row(i)) + t.z() - depth_) / k.image_w;
      face.points(i, 0) = std::clamp(px(i, 0) / k.image_w + rng_.normal(0.0, sigma), 0.0, 1.0);
      face.points(i, 1) = std::clamp(px(i, 1) / k.image_h + rng_.normal(0.0, sigma), 0.0, 1.0);
      face.points(i, 2) = depth + rng_.normal(0.0, sigma);
    }
    return face;
  }

  const ScenarioScript& script_;
  const SynthOptions& opt_;
  Rng rng_;
  ModelPoints filler_;
  Eigen::Matrix<double, kHandPoints, 2> hand_;
  Eigen::VectorXd reference_;
  Vector2d face_center_;
  double depth_ = 1500.0;
  Vector2d writing_hand_;
  std::optional<Vector2d> resting_hand_;

  std::array<double, 3> pose_noise_{};
  std::array<double, 2> hand_drift_{};
  std::array<double, 2> face_drift_{};
  double side_ = 1.0, target_ = 0.0, phase_ = 0.0;
  Vector2d phone_offset_{0.3, 0.0};
  ItemClass note_class_ = ItemClass::Chits;
  Vector2d note_center_{0.25, 0.75};

  int transient_left_ = 0, transient_kind_ = 0;
  double transient_sign_ = 1.0, transient_value_ = 0.0;
  ItemClass transient_item_ = ItemClass::Watch;
  std::uint64_t spurious_count_ = 0;
  Vector2d transient_pos_{0.5, 0.5};
};

}  // namespace

std::string_view to_string(Behavior b) noexcept { return kBehaviorNames[static_cast<std::size_t>(b)]; }

Behavior behavior_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kBehaviorNames.size(); ++i)
    if (kBehaviorNames[i] == name) return static_cast<Behavior>(i);
  throw Error(Errc::ConfigError, "unknown behavior '" + std::string(name) + "'");
}

int ScenarioScript::total_frames() const {
  int n = 0;
  for (const auto& s : segments) n += s.duration_frames;
  return n;
}

GeneratedSession generate_session(const ScenarioScript& script, const SynthOptions& options) {
  for (const auto& s : script.segments)
    if (s.duration_frames < 1) throw Error(Errc::ConfigError, "segment durations must be positive");
  if (!(script.frame_rate_hz > 0.0)) throw Error(Errc::ConfigError, "frame rate must be positive");
  if (script.total_frames() < options.min_frames)
    throw Error(Errc::ScriptTooShort, "script '" + script.session_id + "' has " +
                                          std::to_string(script.total_frames()) + " frames, needs at least " +
                                          std::to_string(options.min_frames));
  return SessionRenderer(script, options).run();
}

std::vector<ScenarioScript> default_benchmark_scripts() {
  constexpr std::array<int, 10> lengths = {620, 580, 600, 640, 560, 610, 590, 600, 590, 610};
  constexpr std::array<double, 3> jitter = {0.0015, 0.002, 0.0025};
  constexpr std::array<double, 3> dropout = {0.03, 0.05, 0.07};
  constexpr std::array<Behavior, 5> cheats = {Behavior::LookAway, Behavior::PhoneUse, Behavior::Talking,
                                              Behavior::Impostor, Behavior::NotesPeek};
  std::vector<ScenarioScript> out;
  // The behavior cycle and each behavior's variant alternate across the
  // whole suite so that every sub-type reaches the training split.
  std::size_t next = 0;
  std::array<int, 6> variant{};
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    ScenarioScript sc;
    char id[16];
    std::snprintf(id, sizeof id, "session_%02zu", s + 1);
    sc.session_id = id;
    sc.split = s < 8 ? "train" : "test";
    sc.seed = 1000 + 17 * s;
    sc.noise = {jitter[s % 3], dropout[(s / 3) % 3]};
    Rng rng(sc.seed ^ 0xabcdefULL);
    const int total = lengths[s];
    int used = 0;
    const auto add = [&](Behavior b, int len) {
      len = std::min(len, total - used);
      if (len <= 0) return;
      const int v = b == Behavior::Normal ? -1 : variant[static_cast<std::size_t>(b)]++ % 2;
      sc.segments.push_back({b, len, v});
      used += len;
    };
    add(Behavior::Normal, 40 + static_cast<int>(rng.below(41)));
    while (used < total) {
      add(cheats[next++ % cheats.size()], 60 + static_cast<int>(rng.below(51)));
      add(Behavior::Normal, 80 + static_cast<int>(rng.below(51)));
    }
    // fold a short tail into its predecessor
    if (sc.segments.size() > 2 && sc.segments.back().duration_frames < 20) {
      const int tail = sc.segments.back().duration_frames;
      sc.segments.pop_back();
      sc.segments.back().duration_frames += tail;
    }
    out.push_back(std::move(sc));
  }
  return out;
}

Benchmark default_benchmark(const SynthOptions& options) {
  Benchmark b;
  for (const auto& sc : default_benchmark_scripts()) {
    auto session = generate_session(sc, options);
    (sc.split == "test" ? b.test : b.train).push_back(std::move(session));
  }
  return b;
}

std::vector<ScenarioScript> scripts_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    std::vector<ScenarioScript> out;
    for (const auto& sj : j.at("sessions")) {
      ScenarioScript sc;
      sc.session_id = sj.at("session_id").get<std::string>();
      sc.split = sj.value("split", std::string{});
      sc.seed = sj.value("seed", std::uint64_t{0});
      sc.frame_rate_hz = sj.value("frame_rate_hz", kDefaultFrameRateHz);
      if (sj.contains("noise")) {
        const auto& n = sj["noise"];
        sc.noise.landmark_jitter = n.value("landmark_jitter", sc.noise.landmark_jitter);
        sc.noise.detection_dropout = n.value("detection_dropout", sc.noise.detection_dropout);
      }
      for (const auto& seg : sj.at("segments"))
        sc.segments.push_back({behavior_from_string(seg.at("behavior").get<std::string>()), seg.at("frames").get<int>(),
                               seg.value("variant", -1)});
      out.push_back(std::move(sc));
    }
    return out;
  } catch (const ojson::exception& e) {
    throw Error(Errc::ConfigError, std::string("scenario script: ") + e.what());
  }
}

std::string scripts_to_json(const std::vector<ScenarioScript>& scripts) {
  ojson j;
  j["sessions"] = ojson::array();
  for (const auto& sc : scripts) {
    ojson sj;
    sj["session_id"] = sc.session_id;
    sj["split"] = sc.split;
    sj["seed"] = sc.seed;
    sj["frame_rate_hz"] = sc.frame_rate_hz;
    sj["noise"] = {{"landmark_jitter", sc.noise.landmark_jitter}, {"detection_dropout", sc.noise.detection_dropout}};
    sj["segments"] = ojson::array();
    for (const auto& seg : sc.segments) {
      ojson g{{"behavior", to_string(seg.behavior)}, {"frames", seg.duration_frames}};
      if (seg.variant >= 0) g["variant"] = seg.variant;
      sj["segments"].push_back(std::move(g));
    }
    j["sessions"].push_back(std::move(sj));
  }
  return j.dump(2);
}

std::vector<ScenarioScript> load_scripts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scripts_from_json(ss.str());
}

std::string embedding_to_json(const Eigen::VectorXd& e) {
  ojson j;
  j["embedding"] = std::vector<double>(e.data(), e.data() + e.size());
  return j.dump();
}

Eigen::VectorXd embedding_from_json(std::string_view text) {
  try {
    const auto v = ojson::parse(text).at("embedding").get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } catch (const ojson::exception& e) {
    throw Error(Errc::ConfigError, std::string("reference embedding: ") + e.what());
  }
}

}  // namespace proctor
