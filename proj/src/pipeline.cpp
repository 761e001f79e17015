#include "proctor/pipeline.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "proctor/error.hpp"
#include "proctor/face_geometry.hpp"
#include "proctor/hand_interaction.hpp"
#include "proctor/smote.hpp"
#include "proctor/threshold.hpp"

namespace proctor {

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

double parse_field(std::string_view s, const std::filesystem::path& path, std::size_t line_no) {
  if (s.empty()) return kMissing;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(Errc::MalformedRecord,
                path.string() + ":" + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  return v;
}

void check_fingerprint(const std::string& expected, const Preprocessor& pre) {
  if (!expected.empty() && expected != pre.fingerprint())
    throw Error(Errc::HashMismatch, "model was trained with a different preprocessing state");
}

std::vector<int> labels_of(std::span<const LabeledSequence> seqs) {
  std::vector<int> y;
  y.reserve(seqs.size());
  for (const auto& s : seqs) y.push_back(s.target ? 1 : 0);
  return y;
}

}  // namespace

FeatureVector extract_frame(const FrameRecord& record, const FaceConfig& cfg, const Eigen::VectorXd* reference) {
  FeatureVector v = assemble(analyze_face_frame(record, cfg, reference), analyze_hand_frame(record));
  v.frame_index = record.frame_index;
  v.label = record.label;
  return v;
}

SessionFeatures extract_session(const SessionStream& session, const FaceConfig& cfg,
                                const Eigen::VectorXd* reference) {
  SessionFeatures out{session.session_id, {}};
  out.vectors.reserve(session.frames.size());
  for (const auto& f : session.frames) out.vectors.push_back(extract_frame(f, cfg, reference));
  return out;
}

void write_features_csv(const std::filesystem::path& path, const SessionFeatures& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  const auto& schema = FeatureSchema::current();
  out << "# session_id=" << features.session_id << '\n';
  for (const auto name : schema.names) out << name << ',';
  out << "label\n";
  for (const auto& v : features.vectors) {
    for (int j = 0; j < kNumFeatures; ++j) {
      if (!is_missing(v.values(j))) out << format_double(v.values(j));
      out << ',';
    }
    if (v.label) out << (*v.label ? '1' : '0');
    out << '\n';
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

SessionFeatures read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  SessionFeatures out;
  out.session_id = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  const auto& schema = FeatureSchema::current();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.starts_with("# session_id=")) {
      out.session_id = line.substr(13);
      continue;
    }
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields.size() != kNumFeatures + 1 || fields.back() != "label")
        throw Error(Errc::SchemaMismatch, path.string() + ": unexpected header");
      for (int j = 0; j < kNumFeatures; ++j)
        if (fields[static_cast<std::size_t>(j)] != schema.names[static_cast<std::size_t>(j)])
          throw Error(Errc::SchemaMismatch, path.string() + ": column " + std::to_string(j) + " is '" +
                                                std::string(fields[static_cast<std::size_t>(j)]) + "'");
      header_seen = true;
      continue;
    }
    if (fields.size() != kNumFeatures + 1)
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                             std::to_string(kNumFeatures + 1) + " fields");
    FeatureVector v;
    for (int j = 0; j < kNumFeatures; ++j) v.values(j) = parse_field(fields[static_cast<std::size_t>(j)], path, line_no);
    v.frame_index = out.vectors.size();
    const auto lab = fields.back();
    if (lab == "1") v.label = true;
    else if (lab == "0") v.label = false;
    else if (!lab.empty())
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(line_no) + ": bad label");
    out.vectors.push_back(std::move(v));
  }
  if (!header_seen) throw Error(Errc::SchemaMismatch, path.string() + ": missing header");
  return out;
}

Preprocessor fit_preprocessor(std::span<const SessionFeatures> train) {
  std::vector<FeatureVector> rows;
  for (const auto& s : train)
    for (const auto& v : s.vectors)
      if (!is_validation_frame(v.frame_index)) rows.push_back(v);
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no training frames");
  return Preprocessor::fit(stack_rows(rows));
}

GBDTModel train_static(std::span<const SessionFeatures> train, const Preprocessor& pre, const RunConfig& cfg,
                       StaticTrainReport* report) {
  std::vector<FeatureVector> fit_rows, val_rows;
  for (const auto& s : train)
    for (const auto& v : s.vectors) {
      if (!v.label) continue;
      (is_validation_frame(v.frame_index) ? val_rows : fit_rows).push_back(v);
    }
  if (fit_rows.empty()) throw Error(Errc::EmptyDataset, "no labeled training frames");

  const Eigen::MatrixXd X = pre.transform(stack_rows(fit_rows));
  std::vector<int> y;
  for (const auto& v : fit_rows) y.push_back(*v.label ? 1 : 0);
  const SmoteResult balanced = borderline_smote(X, y, cfg.smote_k, cfg.seed);

  std::vector<double> curve;
  GBDTModel model = train_gbdt(balanced.X, balanced.y, cfg.gbdt, cfg.seed, report ? &curve : nullptr);
  model.preprocess_fingerprint = pre.fingerprint();

  if (!val_rows.empty()) {
    const Eigen::VectorXd scores = predict_proba_batch(model, pre.transform(stack_rows(val_rows)));
    std::vector<int> yv;
    for (const auto& v : val_rows) yv.push_back(*v.label ? 1 : 0);
    const bool both = std::find(yv.begin(), yv.end(), 0) != yv.end() && std::find(yv.begin(), yv.end(), 1) != yv.end();
    if (both) model.threshold = select_threshold({scores.data(), static_cast<std::size_t>(scores.size())}, yv).threshold;
  }
  if (report) {
    report->rows_before_smote = fit_rows.size();
    report->rows_after_smote = static_cast<std::size_t>(balanced.X.rows());
    report->danger_count = balanced.danger_count;
    report->loss_curve = std::move(curve);
  }
  return model;
}

std::vector<LabeledSequence> sequences_for(std::span<const SessionFeatures> sessions, const Preprocessor& pre,
                                           std::size_t w) {
  std::vector<LabeledSequence> out;
  for (const auto& s : sessions) {
    auto seqs = build_sequences(s.vectors, w);
    for (auto& q : seqs) {
      q.window = pre.transform(q.window);
      out.push_back(std::move(q));
    }
  }
  return out;
}

TemporalSplit temporal_sequences(std::span<const SessionFeatures> train, const Preprocessor& pre, std::size_t w) {
  TemporalSplit split;
  for (const auto& s : train) {
    auto seqs = build_sequences(s.vectors, w);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      auto& q = seqs[i];
      q.window = pre.transform(q.window);
      if (is_validation_frame(q.target_frame_index)) {
        split.validation.push_back(std::move(q));
        continue;
      }
      bool touches = false;
      for (std::size_t k = i; k < i + w && !touches; ++k) touches = is_validation_frame(s.vectors[k].frame_index);
      if (!touches) split.fit.push_back(std::move(q));
    }
  }
  return split;
}

LSTMTrainResult train_temporal(std::span<const SessionFeatures> train, const Preprocessor& pre,
                               const RunConfig& cfg) {
  const auto split = temporal_sequences(train, pre, static_cast<std::size_t>(cfg.lstm.window));
  LSTMTrainResult result = train_lstm(split.fit, split.validation, cfg.lstm);
  result.model.preprocess_fingerprint = pre.fingerprint();
  if (!split.validation.empty()) {
    const auto yv = labels_of(split.validation);
    const bool both = std::find(yv.begin(), yv.end(), 0) != yv.end() && std::find(yv.begin(), yv.end(), 1) != yv.end();
    if (both) {
      const Eigen::VectorXd scores = lstm_predict(result.model, split.validation);
      result.model.threshold =
          select_threshold({scores.data(), static_cast<std::size_t>(scores.size())}, yv).threshold;
    }
  }
  return result;
}

EvalReport evaluate_static(const GBDTModel& model, const Preprocessor& pre, std::span<const SessionFeatures> test) {
  check_fingerprint(model.preprocess_fingerprint, pre);
  std::vector<FeatureVector> rows;
  for (const auto& s : test)
    for (const auto& v : s.vectors)
      if (v.label) rows.push_back(v);
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no labeled test frames");
  const Eigen::VectorXd scores = predict_proba_batch(model, pre.transform(stack_rows(rows)));
  std::vector<int> y;
  for (const auto& v : rows) y.push_back(*v.label ? 1 : 0);
  return evaluate_scores("static", "frame", {scores.data(), static_cast<std::size_t>(scores.size())}, y,
                         model.threshold);
}

EvalReport evaluate_temporal(const LSTMModel& model, const Preprocessor& pre, std::span<const SessionFeatures> test) {
  check_fingerprint(model.preprocess_fingerprint, pre);
  const auto seqs = sequences_for(test, pre, static_cast<std::size_t>(model.params().window));
  if (seqs.empty()) throw Error(Errc::EmptyDataset, "no test sequences");
  const Eigen::VectorXd scores = lstm_predict(model, seqs);
  const auto y = labels_of(seqs);
  return evaluate_scores("temporal", "sequence", {scores.data(), static_cast<std::size_t>(scores.size())}, y,
                         model.threshold);
}

}  // namespace proctor
