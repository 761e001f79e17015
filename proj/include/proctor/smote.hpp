#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace proctor {

enum class SmoteOutcome {
  Oversampled,
  AlreadyBalanced,  // no-op
  NoDangerSamples,  // no-op: every minority sample is safe or noise
};

struct SmoteResult {
  Eigen::MatrixXd X;
  std::vector<int> y;
  SmoteOutcome outcome = SmoteOutcome::AlreadyBalanced;
  std::size_t danger_count = 0;
  std::size_t synthesized = 0;
};

/// Borderline-SMOTE. A minority sample is in DANGER when m of its k nearest
/// neighbours (all classes) are majority with k/2 <= m < k. Synthetic rows
/// x + u * (x_nn - x) are drawn from DANGER samples, cycling through them in
/// order, with x_nn one of the sample's k nearest minority neighbours,
/// until both classes have equal counts. Original rows come first and are
/// left untouched.
SmoteResult borderline_smote(const Eigen::MatrixXd& X, std::span<const int> y, int k, std::uint64_t seed);

}  // namespace proctor
