#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "proctor/features.hpp"

namespace proctor {

struct LSTMParams {
  int input_dim = kNumFeatures;
  int hidden = 64;
  double dropout_rate = 0.35;
  int fc1_dim = 32;
  int window = 15;
  double learning_rate = 0.001;
  int batch_size = 64;
  int max_epochs = 30;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Single-layer LSTM over a window, then dropout on the last hidden state,
/// a ReLU dense layer and a sigmoid output unit.
///
/// All trainable values live in one flat vector; the accessors return
/// column-major views into it:
///   gate_weights  4H x (D + H), row blocks input, forget, output, candidate,
///                 columns [x_t ; h_{t-1}]
///   gate_bias     4H
///   fc1_weight    F x H,  fc1_bias F
///   fc2_weight    1 x F,  fc2_bias 1
class LSTMModel {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  LSTMModel() : LSTMModel(LSTMParams{}) {}
  /// Zero-initialized parameters.
  explicit LSTMModel(const LSTMParams& params);

  /// Uniform(+-1/sqrt(hidden)) recurrent and fc1 weights, +-1/sqrt(fc1_dim)
  /// for the output unit, forget-gate bias 1.
  static LSTMModel initialize(const LSTMParams& params);

  static std::size_t parameter_count(const LSTMParams& p);

  const LSTMParams& params() const { return params_; }
  Eigen::VectorXd& theta() { return theta_; }
  const Eigen::VectorXd& theta() const { return theta_; }

  MatrixMap gate_weights() { return {theta_.data() + off_gate_w_, 4 * H(), D() + H()}; }
  ConstMatrixMap gate_weights() const { return {theta_.data() + off_gate_w_, 4 * H(), D() + H()}; }
  VectorMap gate_bias() { return {theta_.data() + off_gate_b_, 4 * H()}; }
  ConstVectorMap gate_bias() const { return {theta_.data() + off_gate_b_, 4 * H()}; }
  MatrixMap fc1_weight() { return {theta_.data() + off_fc1_w_, F(), H()}; }
  ConstMatrixMap fc1_weight() const { return {theta_.data() + off_fc1_w_, F(), H()}; }
  VectorMap fc1_bias() { return {theta_.data() + off_fc1_b_, F()}; }
  ConstVectorMap fc1_bias() const { return {theta_.data() + off_fc1_b_, F()}; }
  MatrixMap fc2_weight() { return {theta_.data() + off_fc2_w_, 1, F()}; }
  ConstMatrixMap fc2_weight() const { return {theta_.data() + off_fc2_w_, 1, F()}; }
  double& fc2_bias() { return theta_(static_cast<Eigen::Index>(off_fc2_b_)); }
  double fc2_bias() const { return theta_(static_cast<Eigen::Index>(off_fc2_b_)); }

  // Metadata persisted with the weights.
  int schema_version = kSchemaVersion;
  std::string preprocess_fingerprint;
  double threshold = 0.5;

  std::string to_json() const;
  /// Validates the embedded weights hash and tensor shapes.
  static LSTMModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static LSTMModel load(const std::filesystem::path& path);

 private:
  Eigen::Index D() const { return params_.input_dim; }
  Eigen::Index H() const { return params_.hidden; }
  Eigen::Index F() const { return params_.fc1_dim; }

  LSTMParams params_;
  Eigen::VectorXd theta_;
  std::size_t off_gate_w_ = 0, off_gate_b_ = 0, off_fc1_w_ = 0, off_fc1_b_ = 0, off_fc2_w_ = 0, off_fc2_b_ = 0;
};

/// Activations of one (batched) forward pass, kept for backpropagation.
/// Column b of every matrix belongs to sequence b of the batch.
struct LSTMCache {
  std::vector<Eigen::MatrixXd> z;  // [x_t ; h_{t-1}], (D + H) x B
  std::vector<Eigen::MatrixXd> gates;  // activated gates, 4H x B
  std::vector<Eigen::MatrixXd> c;  // cell states c_0 .. c_T, H x B
  Eigen::MatrixXd mask;            // inverted-dropout multipliers, H x B
  Eigen::MatrixXd dropped;         // masked h_T
  Eigen::MatrixXd fc1_pre;         // F x B
  Eigen::MatrixXd fc1_act;
  Eigen::RowVectorXd p;            // output probabilities
};

/// Forward pass over a batch of windows (each w x D). With training = true
/// dropout masks are drawn from `seed`; inference applies no dropout.
LSTMCache lstm_forward_batch(const LSTMModel& model, std::span<const FeatureMatrix* const> windows, bool training,
                             std::uint64_t seed);

struct LSTMForward {
  double p = 0.5;
  LSTMCache cache;
};

LSTMForward lstm_forward(const LSTMModel& model, const FeatureMatrix& window, bool training = false,
                         std::uint64_t seed = 0);

/// Gradient of the mean BCE over the batch w.r.t. the flat parameter vector.
Eigen::VectorXd lstm_backward(const LSTMModel& model, const LSTMCache& cache, std::span<const int> targets);

/// -[y ln p + (1 - y) ln(1 - p)] with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, int y);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
  void apply(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
};

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  std::optional<double> val_auc;
};

struct LSTMTrainResult {
  LSTMModel model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Mini-batch BPTT with Adam. The returned model is the snapshot with the
/// best validation AUC (the last epoch when no usable validation set is
/// given). train_loss is the inference-mode mean BCE over the training set.
LSTMTrainResult train_lstm(std::span<const LabeledSequence> train, std::span<const LabeledSequence> validation,
                           const LSTMParams& params);

/// Inference-mode probabilities for a list of windows.
Eigen::VectorXd lstm_predict(const LSTMModel& model, std::span<const LabeledSequence> sequences);

}  // namespace proctor
