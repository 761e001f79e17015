#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

namespace proctor {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Positive prediction iff score >= threshold.
ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold);

/// Precision / recall are empty when their denominator is zero; f1 is empty
/// whenever either of them is.
struct ClassificationRates {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

ClassificationRates prf_accuracy(const ConfusionMatrix& cm);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. O(n log n) via tie-averaged ranks.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  std::string model_id;
  std::string granularity;  // "frame" or "sequence"
  double threshold = 0.5;
  ConfusionMatrix confusion;
  ClassificationRates rates;
  double roc_auc = 0.5;

  std::string to_json() const;
};

EvalReport evaluate_scores(std::string model_id, std::string granularity, std::span<const double> scores,
                           std::span<const int> labels, double threshold);

/// Side-by-side text table of two reports: accuracy, precision, recall,
/// F1, ROC AUC and false positives.
std::string format_comparison(const EvalReport& left, const EvalReport& right);

}  // namespace proctor
