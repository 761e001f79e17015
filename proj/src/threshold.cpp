#include "proctor/threshold.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "proctor/error.hpp"

namespace proctor {

ThresholdChoice select_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0 || n_pos == labels.size()) throw Error(Errc::SingleClass, "threshold selection needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk distinct scores from the top; after consuming a group, everything
  // with score >= that group's value is predicted positive.
  ThresholdChoice best;
  bool have = false;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double v = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == v) {
      labels[order[j]] == 1 ? ++tp : ++fp;
      ++j;
    }
    double threshold = v;
    if (j < order.size()) {
      const double mid = 0.5 * (v + scores[order[j]]);
      if (mid > scores[order[j]]) threshold = mid;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double f1 = tp == 0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    const bool better = !have || f1 > best.f1 || (f1 == best.f1 && precision > best.precision) ||
                        (f1 == best.f1 && precision == best.precision && threshold < best.threshold);
    if (better) {
      best = {threshold, f1, precision};
      have = true;
    }
    i = j;
  }
  return best;
}

}  // namespace proctor
