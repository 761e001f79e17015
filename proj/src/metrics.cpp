#include "proctor/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "proctor/error.hpp"

namespace proctor {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(Errc::LengthMismatch, "scores and labels differ in length (" + std::to_string(scores.size()) +
                                          " vs " + std::to_string(labels.size()) + ")");
  for (int y : labels)
    if (y != 0 && y != 1) throw Error(Errc::SchemaViolation, "labels must be 0 or 1");
}

}  // namespace

ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1)
      pred ? ++cm.tp : ++cm.fn;
    else
      pred ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

ClassificationRates prf_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(Errc::EmptyMatrix, "confusion matrix is empty");
  ClassificationRates r;
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0) r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  if (r.precision && r.recall) {
    const double s = *r.precision + *r.recall;
    r.f1 = s > 0.0 ? 2.0 * *r.precision * *r.recall / s : 0.0;
  }
  return r;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::SingleClass, "ROC AUC needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based, tie-averaged ranks of the positives (Mann-Whitney U).
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

EvalReport evaluate_scores(std::string model_id, std::string granularity, std::span<const double> scores,
                           std::span<const int> labels, double threshold) {
  EvalReport r;
  r.model_id = std::move(model_id);
  r.granularity = std::move(granularity);
  r.threshold = threshold;
  r.confusion = confusion_at(scores, labels, threshold);
  r.rates = prf_accuracy(r.confusion);
  r.roc_auc = roc_auc(scores, labels);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  j["model_id"] = model_id;
  j["granularity"] = granularity;
  j["threshold"] = threshold;
  j["accuracy"] = rates.accuracy;
  j["precision"] = opt(rates.precision);
  j["recall"] = opt(rates.recall);
  j["f1"] = opt(rates.f1);
  j["roc_auc"] = roc_auc;
  j["false_positives"] = confusion.fp;
  j["confusion"] = {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}};
  return j.dump(2);
}

std::string format_comparison(const EvalReport& left, const EvalReport& right) {
  const auto pct = [](const std::optional<double>& v) {
    char buf[32];
    if (v)
      std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * *v);
    else
      std::snprintf(buf, sizeof buf, "undefined");
    return std::string(buf);
  };
  char line[160];
  std::string out;
  std::snprintf(line, sizeof line, "%-16s %22s %22s\n", "Metric", (left.model_id + " (" + left.granularity + ")").c_str(),
                (right.model_id + " (" + right.granularity + ")").c_str());
  out += line;
  const auto row = [&](const char* name, const std::string& a, const std::string& b) {
    std::snprintf(line, sizeof line, "%-16s %22s %22s\n", name, a.c_str(), b.c_str());
    out += line;
  };
  row("Accuracy", pct(left.rates.accuracy), pct(right.rates.accuracy));
  row("Precision", pct(left.rates.precision), pct(right.rates.precision));
  row("Recall", pct(left.rates.recall), pct(right.rates.recall));
  row("F1-Score", pct(left.rates.f1), pct(right.rates.f1));
  char a[32], b[32];
  std::snprintf(a, sizeof a, "%.3f", left.roc_auc);
  std::snprintf(b, sizeof b, "%.3f", right.roc_auc);
  row("ROC AUC", a, b);
  row("False Positives", std::to_string(left.confusion.fp), std::to_string(right.confusion.fp));
  std::snprintf(a, sizeof a, "%.3f", left.threshold);
  std::snprintf(b, sizeof b, "%.3f", right.threshold);
  row("Threshold", a, b);
  return out;
}

}  // namespace proctor
