#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "proctor/config.hpp"
#include "proctor/features.hpp"
#include "proctor/gbdt.hpp"
#include "proctor/ingest.hpp"
#include "proctor/lstm.hpp"
#include "proctor/metrics.hpp"

namespace proctor {

/// Per-frame feature vectors of one session, in frame order.
struct SessionFeatures {
  std::string session_id;
  std::vector<FeatureVector> vectors;
};

FeatureVector extract_frame(const FrameRecord& record, const FaceConfig& cfg, const Eigen::VectorXd* reference);
SessionFeatures extract_session(const SessionStream& session, const FaceConfig& cfg,
                                const Eigen::VectorXd* reference);

/// Features CSV: a header of the schema names plus "label", one row per
/// frame. Missing values and absent labels are empty fields.
void write_features_csv(const std::filesystem::path& path, const SessionFeatures& features);
SessionFeatures read_features_csv(const std::filesystem::path& path);

/// Training sessions hold out every fifth block of 50 frames for threshold
/// selection and model snapshot choice.
inline constexpr std::uint64_t kValidationBlock = 50;
inline bool is_validation_frame(std::uint64_t frame_index) { return (frame_index / kValidationBlock) % 5 == 4; }

/// Fit on the non-validation frames of the training sessions.
Preprocessor fit_preprocessor(std::span<const SessionFeatures> train);

struct StaticTrainReport {
  std::size_t rows_before_smote = 0;
  std::size_t rows_after_smote = 0;
  std::size_t danger_count = 0;
  std::vector<double> loss_curve;
};

/// Borderline-SMOTE then boosting on the fit frames; the decision threshold
/// is the F1-optimal one on the validation frames.
GBDTModel train_static(std::span<const SessionFeatures> train, const Preprocessor& pre, const RunConfig& cfg,
                       StaticTrainReport* report = nullptr);

struct TemporalSplit {
  std::vector<LabeledSequence> fit;
  std::vector<LabeledSequence> validation;
};

/// Preprocessed windows per session. A sequence goes to validation when its
/// target frame is a validation frame, to fit when neither its window nor
/// its target touches one, and is dropped otherwise.
TemporalSplit temporal_sequences(std::span<const SessionFeatures> train, const Preprocessor& pre, std::size_t w);
std::vector<LabeledSequence> sequences_for(std::span<const SessionFeatures> sessions, const Preprocessor& pre,
                                           std::size_t w);

/// The best-validation snapshot, with its F1-optimal validation threshold.
LSTMTrainResult train_temporal(std::span<const SessionFeatures> train, const Preprocessor& pre,
                               const RunConfig& cfg);

/// Frame granularity: every labeled frame.
EvalReport evaluate_static(const GBDTModel& model, const Preprocessor& pre, std::span<const SessionFeatures> test);
/// Sequence granularity: every window with a following labeled frame.
EvalReport evaluate_temporal(const LSTMModel& model, const Preprocessor& pre, std::span<const SessionFeatures> test);

}  // namespace proctor
