#include "proctor/features.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "proctor/error.hpp"
#include "proctor/hash.hpp"

namespace proctor {

using ojson = nlohmann::ordered_json;

const FeatureSchema& FeatureSchema::current() {
  static const FeatureSchema schema{
      kSchemaVersion,
      {"face_count",       "identity_similarity", "pitch",           "yaw",
       "roll",             "radial",              "pose_zone",       "iris_ratio_left",
       "iris_ratio_right", "gaze_code",           "mouth_area_norm", "mouth_state",
       "conf_cell_phone",  "conf_chits",          "conf_closed_book", "conf_headphone",
       "conf_sheet",       "conf_watch",          "dist_cell_phone", "dist_chits",
       "dist_closed_book", "dist_headphone",      "dist_sheet",      "dist_watch",
       "global_min_distance", "num_hands",        "num_items"}};
  return schema;
}

int FeatureSchema::index_of(std::string_view name) const {
  for (int i = 0; i < kNumFeatures; ++i)
    if (names[static_cast<std::size_t>(i)] == name) return i;
  throw Error(Errc::SchemaMismatch, "unknown feature '" + std::string(name) + "'");
}

FeatureVector assemble(const FaceGeometryReport& face, const InteractionReport& hand, const FeatureSchema& schema) {
  if (schema.version != kSchemaVersion || schema.names != FeatureSchema::current().names)
    throw Error(Errc::SchemaMismatch, "feature schema version " + std::to_string(schema.version) +
                                          " does not match " + std::to_string(kSchemaVersion));
  using namespace feature;
  FeatureVector v;
  auto& x = v.values;
  x(FaceCount) = face.face_count;
  if (face.identity) x(IdentitySimilarity) = face.identity->similarity;
  if (face.pose) {
    x(Pitch) = face.pose->pitch;
    x(Yaw) = face.pose->yaw;
    x(Roll) = face.pose->roll;
    x(Radial) = face.pose->radial;
    x(feature::PoseZone) = static_cast<int>(face.pose->zone);
  }
  if (face.gaze) {
    x(IrisRatioLeft) = face.gaze->ratio_left;
    x(IrisRatioRight) = face.gaze->ratio_right;
    x(GazeCode) = static_cast<int>(face.gaze->gaze_class);
  }
  if (face.mouth) {
    x(MouthAreaNorm) = face.mouth->area_norm;
    x(feature::MouthState) = static_cast<int>(face.mouth->state);
  }
  for (int c = 0; c < kNumItemClasses; ++c) {
    const auto k = static_cast<std::size_t>(c);
    x(ConfFirst + c) = hand.per_class_confidence[k];
    if (hand.per_class_min_distance[k]) x(DistFirst + c) = *hand.per_class_min_distance[k];
  }
  if (hand.global_min_distance) x(GlobalMinDistance) = *hand.global_min_distance;
  x(NumHands) = hand.num_hands;
  x(NumItems) = hand.num_items;
  return v;
}

ImputerState fit_imputer(const FeatureMatrix& rows) {
  ImputerState s;
  for (int j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      if (const double v = rows(i, j); !is_missing(v)) {
        sum += v;
        ++n;
      }
    }
    if (n == 0)
      throw Error(Errc::AllMissingFeature,
                  "feature '" + std::string(FeatureSchema::current().names[static_cast<std::size_t>(j)]) +
                      "' is missing in every training row");
    s.means(j) = sum / static_cast<double>(n);
    s.counts[static_cast<std::size_t>(j)] = n;
  }
  return s;
}

FeatureRow apply_imputer(const ImputerState& state, const FeatureRow& row) {
  return row.array().isNaN().select(state.means, row);
}

FeatureMatrix apply_imputer(const ImputerState& state, const FeatureMatrix& rows) {
  FeatureMatrix out = rows;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (int j = 0; j < kNumFeatures; ++j)
      if (is_missing(out(i, j))) out(i, j) = state.means(j);
  return out;
}

ScalerState fit_scaler(const FeatureMatrix& rows) {
  if (rows.rows() == 0) throw Error(Errc::EmptyInput, "cannot fit a scaler on zero rows");
  if (!rows.allFinite()) throw Error(Errc::NonFiniteFeature, "scaler input must be imputed and finite");
  ScalerState s;
  const double n = static_cast<double>(rows.rows());
  s.means = rows.colwise().mean().transpose();
  for (int j = 0; j < kNumFeatures; ++j) {
    const auto col = rows.col(j);
    if (col.maxCoeff() == col.minCoeff()) {
      s.stds(j) = 1.0;
      continue;
    }
    const double var = (col.array() - s.means(j)).square().sum() / n;
    s.stds(j) = std::sqrt(var);
  }
  return s;
}

FeatureRow apply_scaler(const ScalerState& state, const FeatureRow& row) {
  return (row - state.means).cwiseQuotient(state.stds);
}

FeatureMatrix apply_scaler(const ScalerState& state, const FeatureMatrix& rows) {
  FeatureMatrix out = rows.rowwise() - state.means.transpose();
  out.array().rowwise() /= state.stds.transpose().array();
  return out;
}

Preprocessor Preprocessor::fit(const FeatureMatrix& training_rows) {
  Preprocessor p;
  p.imputer = fit_imputer(training_rows);
  p.scaler = fit_scaler(apply_imputer(p.imputer, training_rows));
  return p;
}

namespace {

ojson row_json(const FeatureRow& r) {
  ojson a = ojson::array();
  for (double v : r) a.push_back(v);
  return a;
}

FeatureRow row_from_json(const ojson& a, const char* field) {
  if (!a.is_array() || a.size() != kNumFeatures)
    throw Error(Errc::SchemaMismatch, std::string(field) + " must hold " + std::to_string(kNumFeatures) + " values");
  FeatureRow r;
  for (int i = 0; i < kNumFeatures; ++i) r(i) = a[static_cast<std::size_t>(i)].get<double>();
  return r;
}

}  // namespace

std::string Preprocessor::to_json() const {
  ojson j;
  j["format"] = "proctor.preprocess";
  j["schema_version"] = schema_version;
  j["features"] = ojson::array();
  for (auto n : FeatureSchema::current().names) j["features"].push_back(n);
  j["imputer_means"] = row_json(imputer.means);
  j["imputer_counts"] = imputer.counts;
  j["scaler_means"] = row_json(scaler.means);
  j["scaler_stds"] = row_json(scaler.stds);
  return j.dump(2);
}

Preprocessor Preprocessor::from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw Error(Errc::ConfigError, std::string("preprocessing state: ") + e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
      throw Error(Errc::VersionMismatch, "preprocessing state has schema_version " + std::to_string(version) +
                                             ", expected " + std::to_string(kSchemaVersion));
    Preprocessor p;
    p.schema_version = version;
    p.imputer.means = row_from_json(j.at("imputer_means"), "imputer_means");
    const auto counts = j.at("imputer_counts").get<std::vector<std::size_t>>();
    if (counts.size() != kNumFeatures) throw Error(Errc::SchemaMismatch, "imputer_counts has the wrong length");
    std::copy(counts.begin(), counts.end(), p.imputer.counts.begin());
    p.scaler.means = row_from_json(j.at("scaler_means"), "scaler_means");
    p.scaler.stds = row_from_json(j.at("scaler_stds"), "scaler_stds");
    if ((p.scaler.stds.array() <= 0.0).any()) throw Error(Errc::SchemaMismatch, "scaler_stds must be positive");
    return p;
  } catch (const ojson::exception& e) {
    throw Error(Errc::ConfigError, std::string("preprocessing state: ") + e.what());
  }
}

std::string Preprocessor::fingerprint() const { return content_hash(to_json()); }

void Preprocessor::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << to_json() << '\n';
}

Preprocessor Preprocessor::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

WindowBuffer::WindowBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(Errc::ConfigError, "window capacity must be positive");
}

void WindowBuffer::push(FeatureVector v) {
  items_.push_back(std::move(v));
  if (items_.size() > capacity_) items_.pop_front();
}

FeatureMatrix WindowBuffer::matrix() const {
  FeatureMatrix m(static_cast<Eigen::Index>(items_.size()), kNumFeatures);
  for (std::size_t i = 0; i < items_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = items_[i].values.transpose();
  return m;
}

std::vector<LabeledSequence> build_sequences(std::span<const FeatureVector> vectors, std::size_t w) {
  if (w == 0) throw Error(Errc::ConfigError, "window length must be positive");
  std::vector<LabeledSequence> out;
  if (vectors.size() <= w) return out;
  for (std::size_t i = w; i < vectors.size(); ++i)
    if (!vectors[i].label) throw Error(Errc::MissingLabel, "frame " + std::to_string(vectors[i].frame_index) + " has no label");
  out.reserve(vectors.size() - w);
  for (std::size_t i = 0; i + w < vectors.size(); ++i) {
    LabeledSequence s;
    s.window = stack_rows(vectors.subspan(i, w));
    s.target = *vectors[i + w].label;
    s.target_frame_index = vectors[i + w].frame_index;
    out.push_back(std::move(s));
  }
  return out;
}

FeatureMatrix stack_rows(std::span<const FeatureVector> vectors) {
  FeatureMatrix m(static_cast<Eigen::Index>(vectors.size()), kNumFeatures);
  for (std::size_t i = 0; i < vectors.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = vectors[i].values.transpose();
  return m;
}

}  // namespace proctor
