#pragma once

#include <span>

namespace proctor {

struct ThresholdChoice {
  double threshold = 0.5;
  double f1 = 0.0;
  double precision = 0.0;
};

/// Exhaustive F1 scan. Candidates are the lowest score (everything
/// positive) and the midpoints between consecutive distinct scores. Ties
/// go to higher precision, then the lower threshold.
ThresholdChoice select_threshold(std::span<const double> scores, std::span<const int> labels);

}  // namespace proctor
