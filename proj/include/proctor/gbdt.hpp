#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace proctor {

struct GBDTParams {
  int n_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double l2_lambda = 1.0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf log-odds increment
  double gain = 0.0;   // split gain, 0 for leaves

  bool is_leaf() const { return feature < 0; }
};

/// Binary tree over a flat node array; node 0 is the root. Rows with
/// x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  template <typename Row>
  double predict(const Row& x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  int depth() const;
};

struct GBDTModel {
  double base_score = 0.0;  // logit of the training prior
  std::vector<RegressionTree> trees;
  GBDTParams params;
  int num_features = 0;
  int schema_version = 0;
  std::uint64_t seed = 0;
  /// Decision threshold chosen on validation data; 0.5 until set.
  double threshold = 0.5;
  std::string preprocess_fingerprint;

  std::string to_json() const;
  static GBDTModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static GBDTModel load(const std::filesystem::path& path);
};

/// Stagewise Newton boosting on the logistic loss with exact greedy splits.
/// `loss_curve`, when given, receives the mean training log-loss before
/// the first tree and after every round.
GBDTModel train_gbdt(const Eigen::MatrixXd& X, std::span<const int> y, const GBDTParams& params,
                     std::uint64_t seed, std::vector<double>* loss_curve = nullptr);

/// sigmoid(base + lr * sum of tree outputs); the margin is clipped to
/// +-30 so the result stays strictly inside (0, 1).
double predict_proba(const GBDTModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);
Eigen::VectorXd predict_proba_batch(const GBDTModel& model, const Eigen::MatrixXd& X);

/// Summed split gain per feature.
Eigen::VectorXd split_gain_importance(const GBDTModel& model);

}  // namespace proctor
