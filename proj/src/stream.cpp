#include "proctor/stream.hpp"

#include "proctor/error.hpp"

namespace proctor {

StreamScorer::StreamScorer(const LSTMModel& model, const Preprocessor& preprocessor)
    : model_(&model), preprocessor_(&preprocessor), buffer_(static_cast<std::size_t>(model.params().window)) {
  if (model.params().input_dim != kNumFeatures || model.schema_version != preprocessor.schema_version)
    throw Error(Errc::SchemaMismatch, "model and feature schema disagree");
  if (model.preprocess_fingerprint != preprocessor.fingerprint())
    throw Error(Errc::HashMismatch, "model was trained with preprocessing state " + model.preprocess_fingerprint +
                                        ", got " + preprocessor.fingerprint());
}

std::optional<double> StreamScorer::push(const FeatureVector& v) {
  buffer_.push(v);
  if (!buffer_.full()) return std::nullopt;
  const FeatureMatrix normalized = preprocessor_->transform(buffer_.matrix());
  return lstm_forward(*model_, normalized, false).p;
}

}  // namespace proctor
