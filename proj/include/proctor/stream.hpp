#pragma once

#include <optional>

#include "proctor/features.hpp"
#include "proctor/lstm.hpp"

namespace proctor {

/// Real-time scorer for one session: buffers the latest w raw feature
/// vectors and, once full, scores the preprocessed window.
class StreamScorer {
 public:
  /// Throws HashMismatch when the model was trained against another
  /// preprocessing state, SchemaMismatch when the input widths differ.
  StreamScorer(const LSTMModel& model, const Preprocessor& preprocessor);

  /// Empty until w vectors have been pushed, then one probability per push.
  std::optional<double> push(const FeatureVector& v);

  const WindowBuffer& buffer() const { return buffer_; }

 private:
  const LSTMModel* model_;
  const Preprocessor* preprocessor_;
  WindowBuffer buffer_;
};

inline std::optional<double> stream_predict(StreamScorer& scorer, const FeatureVector& v) { return scorer.push(v); }

}  // namespace proctor
