#include "proctor/smote.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "proctor/error.hpp"
#include "proctor/rng.hpp"

namespace proctor {

namespace {

/// Indices of the k nearest rows to `query` among `candidates`, ties broken
/// by index.
std::vector<Eigen::Index> nearest(const Eigen::MatrixXd& X, Eigen::Index query,
                                  const std::vector<Eigen::Index>& candidates, int k) {
  std::vector<std::pair<double, Eigen::Index>> d;
  d.reserve(candidates.size());
  for (Eigen::Index c : candidates) {
    if (c == query) continue;
    d.emplace_back((X.row(c) - X.row(query)).squaredNorm(), c);
  }
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  std::vector<Eigen::Index> out;
  out.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) out.push_back(d[i].second);
  return out;
}

}  // namespace

SmoteResult borderline_smote(const Eigen::MatrixXd& X, std::span<const int> y, int k, std::uint64_t seed) {
  if (static_cast<std::size_t>(X.rows()) != y.size())
    throw Error(Errc::LengthMismatch, "X and y differ in length");
  if (k < 1) throw Error(Errc::ConfigError, "k must be at least 1");
  const auto n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  const std::size_t n_neg = y.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::SingleClass, "borderline-SMOTE needs both classes");

  SmoteResult out;
  out.X = X;
  out.y.assign(y.begin(), y.end());
  if (n_pos == n_neg) {
    out.outcome = SmoteOutcome::AlreadyBalanced;
    return out;
  }
  const int minority = n_pos < n_neg ? 1 : 0;
  const std::size_t n_min = std::min(n_pos, n_neg);
  if (n_min <= static_cast<std::size_t>(k))
    throw Error(Errc::TooFewMinority,
                "minority class has " + std::to_string(n_min) + " samples, needs more than k = " + std::to_string(k));

  std::vector<Eigen::Index> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  std::vector<Eigen::Index> minority_rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (y[static_cast<std::size_t>(i)] == minority) minority_rows.push_back(i);

  std::vector<Eigen::Index> danger;
  for (Eigen::Index i : minority_rows) {
    const auto nn = nearest(X, i, all, k);
    const auto majority_nn =
        std::count_if(nn.begin(), nn.end(), [&](Eigen::Index j) { return y[static_cast<std::size_t>(j)] != minority; });
    if (2 * majority_nn >= k && majority_nn < k) danger.push_back(i);
  }
  out.danger_count = danger.size();
  if (danger.empty()) {
    out.outcome = SmoteOutcome::NoDangerSamples;
    return out;
  }

  const std::size_t need = std::max(n_pos, n_neg) - n_min;
  std::vector<std::vector<Eigen::Index>> minority_nn(danger.size());
  for (std::size_t d = 0; d < danger.size(); ++d) minority_nn[d] = nearest(X, danger[d], minority_rows, k);

  Rng rng(seed);
  out.X.conservativeResize(X.rows() + static_cast<Eigen::Index>(need), Eigen::NoChange);
  out.y.resize(y.size() + need, minority);
  for (std::size_t s = 0; s < need; ++s) {
    const std::size_t d = s % danger.size();
    const auto& nn = minority_nn[d];
    const Eigen::Index partner = nn[rng.below(nn.size())];
    const double u = rng.uniform();
    const Eigen::Index row = X.rows() + static_cast<Eigen::Index>(s);
    out.X.row(row) = X.row(danger[d]) + u * (X.row(partner) - X.row(danger[d]));
  }
  out.synthesized = need;
  out.outcome = SmoteOutcome::Oversampled;
  return out;
}

}  // namespace proctor
