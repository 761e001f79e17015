#include "proctor/ingest.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "proctor/error.hpp"

namespace proctor {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kNumItemClasses> kItemNames = {
    "cell_phone", "chits", "closed_book", "headphone", "sheet", "watch"};

constexpr std::array<std::string_view, 9> kRecordFields = {
    "session_id", "frame_index", "timestamp_ms", "face_landmarks", "face_count",
    "live_embedding", "hands", "detections", "label"};

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::MalformedRecord, what); }
[[noreturn]] void violation(const std::string& what) { throw Error(Errc::SchemaViolation, what); }

Points3 points_from_json(const ojson& flat, const char* field) {
  if (!flat.is_array()) malformed(std::string(field) + " must be an array");
  if (flat.size() % 3 != 0) violation(std::string(field) + " length is not a multiple of 3");
  Points3 pts(static_cast<Eigen::Index>(flat.size() / 3), 3);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!flat[i].is_number()) malformed(std::string(field) + " contains a non-number");
    pts(static_cast<Eigen::Index>(i / 3), static_cast<Eigen::Index>(i % 3)) = flat[i].get<double>();
  }
  return pts;
}

ojson points_to_json(const Points3& pts) {
  ojson flat = ojson::array();
  for (Eigen::Index r = 0; r < pts.rows(); ++r)
    for (Eigen::Index c = 0; c < 3; ++c) flat.push_back(pts(r, c));
  return flat;
}

std::uint64_t unsigned_field(const ojson& j, const char* name) {
  const auto& v = j.at(name);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    malformed(std::string(name) + " must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

Camera camera_from_string(std::string_view s) {
  if (s == "face_cam") return Camera::FaceCam;
  if (s == "hand_cam") return Camera::HandCam;
  violation("unknown camera '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(ItemClass c) noexcept { return kItemNames[static_cast<int>(c)]; }

ItemClass item_class_from_string(std::string_view name) {
  for (int i = 0; i < kNumItemClasses; ++i)
    if (kItemNames[i] == name) return static_cast<ItemClass>(i);
  violation("unknown item class '" + std::string(name) + "'");
}

std::string_view to_string(Camera c) noexcept { return c == Camera::FaceCam ? "face_cam" : "hand_cam"; }

BBox::BBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!(std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max)))
    violation("bbox has non-finite coordinates");
  if (!(x_min < x_max) || !(y_min < y_max)) violation("bbox is empty or inverted");
}

bool BBox::normalized() const {
  return x_min_ >= 0.0 && y_min_ >= 0.0 && x_max_ <= 1.0 && y_max_ <= 1.0;
}

void validate(const LandmarkSet& set) {
  const auto n = set.points.rows();
  if (set.kind == LandmarkKind::Face) {
    if (n != kFaceMeshPoints && n != kFaceMeshWithIrisPoints)
      violation("face landmarks need 468 (or 478 with iris) points, got " + std::to_string(n));
  } else if (n != kHandPoints) {
    violation("hand landmarks need 21 points, got " + std::to_string(n));
  }
  if (!set.points.allFinite()) violation("landmarks contain non-finite values");
  const auto xy = set.points.leftCols<2>();
  if ((xy.array() < 0.0).any() || (xy.array() > 1.0).any())
    violation("landmark x/y outside [0, 1]");
}

bool operator==(const LandmarkSet& a, const LandmarkSet& b) {
  return a.kind == b.kind && a.points.rows() == b.points.rows() && a.points == b.points;
}

bool operator==(const FrameRecord& a, const FrameRecord& b) {
  const bool emb_equal =
      a.live_embedding.has_value() == b.live_embedding.has_value() &&
      (!a.live_embedding || (a.live_embedding->size() == b.live_embedding->size() &&
                             *a.live_embedding == *b.live_embedding));
  return a.session_id == b.session_id && a.frame_index == b.frame_index &&
         a.timestamp_ms == b.timestamp_ms && a.face_landmarks == b.face_landmarks &&
         a.face_count == b.face_count && emb_equal && a.hands == b.hands &&
         a.detections == b.detections && a.label == b.label;
}

void validate(const FrameRecord& r) {
  if (r.face_count < 0) violation("face_count is negative");
  if (r.face_landmarks) {
    if (r.face_landmarks->kind != LandmarkKind::Face) violation("face_landmarks is not a face set");
    if (r.face_count == 0) violation("face_landmarks present but face_count is 0");
    validate(*r.face_landmarks);
  }
  if (r.live_embedding) {
    if (r.live_embedding->size() != kEmbeddingDim)
      violation("live_embedding must have 512 entries, got " + std::to_string(r.live_embedding->size()));
    if (!r.live_embedding->allFinite()) violation("live_embedding has non-finite values");
    const double norm = r.live_embedding->norm();
    if (std::abs(norm - 1.0) > 1e-6) violation("live_embedding is not L2-normalized (norm " + std::to_string(norm) + ")");
  }
  for (const auto& h : r.hands) {
    if (h.kind != LandmarkKind::Hand) violation("hands entry is not a hand set");
    validate(h);
  }
  for (const auto& d : r.detections) {
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) violation("detection confidence outside [0, 1]");
    if (!d.bbox.normalized()) violation("detection bbox outside normalized coordinates");
  }
}

FrameRecord parse_frame_record(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    malformed(e.what());
  }
  if (!j.is_object()) malformed("record is not an object");
  if (j.size() != kRecordFields.size()) malformed("record must have exactly the 9 schema fields");
  for (auto name : kRecordFields)
    if (!j.contains(name)) malformed("missing field '" + std::string(name) + "'");

  FrameRecord r;
  try {
    if (!j["session_id"].is_string()) malformed("session_id must be a string");
    r.session_id = j["session_id"].get<std::string>();
    r.frame_index = unsigned_field(j, "frame_index");
    r.timestamp_ms = unsigned_field(j, "timestamp_ms");
    const auto fc = unsigned_field(j, "face_count");
    r.face_count = static_cast<int>(fc);

    if (!j["face_landmarks"].is_null())
      r.face_landmarks = LandmarkSet{LandmarkKind::Face, points_from_json(j["face_landmarks"], "face_landmarks")};

    if (const auto& e = j["live_embedding"]; !e.is_null()) {
      if (!e.is_array()) malformed("live_embedding must be an array or null");
      Eigen::VectorXd v(static_cast<Eigen::Index>(e.size()));
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (!e[i].is_number()) malformed("live_embedding contains a non-number");
        v(static_cast<Eigen::Index>(i)) = e[i].get<double>();
      }
      r.live_embedding = std::move(v);
    }

    if (!j["hands"].is_array()) malformed("hands must be an array");
    for (const auto& h : j["hands"]) r.hands.push_back({LandmarkKind::Hand, points_from_json(h, "hands[]")});

    if (!j["detections"].is_array()) malformed("detections must be an array");
    for (const auto& d : j["detections"]) {
      if (!d.is_object()) malformed("detection must be an object");
      const auto& box = d.at("bbox");
      if (!box.is_array() || box.size() != 4) malformed("bbox must be [x_min, y_min, x_max, y_max]");
      if (!d.at("class").is_string() || !d.at("camera").is_string() || !d.at("confidence").is_number())
        malformed("detection fields have wrong types");
      r.detections.push_back(DetectionRecord{
          item_class_from_string(d["class"].get<std::string>()), d["confidence"].get<double>(),
          BBox(box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()),
          camera_from_string(d["camera"].get<std::string>())});
    }

    if (const auto& l = j["label"]; !l.is_null()) {
      if (!l.is_boolean()) malformed("label must be a boolean or null");
      r.label = l.get<bool>();
    }
  } catch (const ojson::exception& e) {
    malformed(e.what());
  }
  validate(r);
  return r;
}

std::string serialize_frame_record(const FrameRecord& r) {
  ojson j;
  j["session_id"] = r.session_id;
  j["frame_index"] = r.frame_index;
  j["timestamp_ms"] = r.timestamp_ms;
  j["face_landmarks"] = r.face_landmarks ? points_to_json(r.face_landmarks->points) : ojson(nullptr);
  j["face_count"] = r.face_count;
  if (r.live_embedding) {
    ojson e = ojson::array();
    for (double v : *r.live_embedding) e.push_back(v);
    j["live_embedding"] = std::move(e);
  } else {
    j["live_embedding"] = nullptr;
  }
  j["hands"] = ojson::array();
  for (const auto& h : r.hands) j["hands"].push_back(points_to_json(h.points));
  j["detections"] = ojson::array();
  for (const auto& d : r.detections) {
    ojson dj;
    dj["class"] = to_string(d.item);
    dj["confidence"] = d.confidence;
    dj["bbox"] = {d.bbox.x_min(), d.bbox.y_min(), d.bbox.x_max(), d.bbox.y_max()};
    dj["camera"] = to_string(d.camera);
    j["detections"].push_back(std::move(dj));
  }
  j["label"] = r.label ? ojson(*r.label) : ojson(nullptr);
  return j.dump();
}

SessionReader::SessionReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw Error(Errc::IoError, "cannot open " + path.string());
}

std::optional<FrameRecord> SessionReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FrameRecord rec;
    try {
      rec = parse_frame_record(line);
    } catch (const Error& e) {
      throw Error(e.code(), path_.string() + ":" + std::to_string(line_no_) + ": " + e.what());
    }
    if (session_id_ && *session_id_ != rec.session_id)
      throw Error(Errc::SchemaViolation, path_.string() + ":" + std::to_string(line_no_) +
                                             ": record belongs to session '" + rec.session_id + "'");
    if (last_index_ && rec.frame_index <= *last_index_)
      throw Error(Errc::OrderViolation, path_.string() + ":" + std::to_string(line_no_) + ": frame_index " +
                                            std::to_string(rec.frame_index) + " after " +
                                            std::to_string(*last_index_));
    session_id_ = rec.session_id;
    last_index_ = rec.frame_index;
    return rec;
  }
  if (in_.bad()) throw Error(Errc::IoError, "read failed on " + path_.string());
  return std::nullopt;
}

SessionStream read_session(const std::filesystem::path& path) {
  SessionReader reader(path);
  SessionStream s;
  while (auto rec = reader.next()) s.frames.push_back(std::move(*rec));
  if (!s.frames.empty()) {
    s.session_id = s.frames.front().session_id;
    const auto span_ms = static_cast<double>(s.frames.back().timestamp_ms) -
                         static_cast<double>(s.frames.front().timestamp_ms);
    if (s.frames.size() >= 2 && span_ms > 0.0)
      s.frame_rate_hz = 1000.0 * static_cast<double>(s.frames.size() - 1) / span_ms;
  }
  return s;
}

void write_session(const std::filesystem::path& path, const SessionStream& session) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& f : session.frames) out << serialize_frame_record(f) << '\n';
  if (!out) throw Error(Errc::IoError, "write failed on " + path.string());
}

}  // namespace proctor
