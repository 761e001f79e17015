#include "proctor/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "proctor/error.hpp"
#include "proctor/hash.hpp"
#include "proctor/metrics.hpp"
#include "proctor/rng.hpp"

namespace proctor {

using ojson = nlohmann::ordered_json;
using Eigen::Index;
using Eigen::MatrixXd;

namespace {

MatrixXd sigmoid(const MatrixXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

ojson row_major(const Eigen::Ref<const MatrixXd>& m) {
  ojson a = ojson::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

void read_row_major(const ojson& a, Eigen::Ref<MatrixXd> m, const char* name) {
  if (!a.is_array() || a.size() != static_cast<std::size_t>(m.size()))
    throw Error(Errc::ShapeMismatch, std::string(name) + " has the wrong number of values");
  std::size_t k = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = a[k++].get<double>();
}

void check_sequences(std::span<const LabeledSequence> seqs, const LSTMParams& p) {
  for (const auto& s : seqs)
    if (s.window.rows() != p.window || s.window.cols() != p.input_dim)
      throw Error(Errc::ShapeMismatch, "sequence is " + std::to_string(s.window.rows()) + "x" +
                                           std::to_string(s.window.cols()) + ", expected " +
                                           std::to_string(p.window) + "x" + std::to_string(p.input_dim));
}

double mean_bce(const Eigen::VectorXd& p, std::span<const LabeledSequence> seqs) {
  double s = 0.0;
  for (std::size_t i = 0; i < seqs.size(); ++i) s += bce_loss(p(static_cast<Index>(i)), seqs[i].target ? 1 : 0);
  return s / static_cast<double>(seqs.size());
}

}  // namespace

void LSTMParams::validate() const {
  if (input_dim <= 0 || hidden <= 0 || fc1_dim <= 0 || window <= 0 || batch_size <= 0 || max_epochs < 0 ||
      !(learning_rate > 0.0) || !(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(Errc::ConfigError, "invalid LSTM parameters");
}

std::size_t LSTMModel::parameter_count(const LSTMParams& p) {
  const auto D = static_cast<std::size_t>(p.input_dim), H = static_cast<std::size_t>(p.hidden),
             F = static_cast<std::size_t>(p.fc1_dim);
  return 4 * H * (D + H) + 4 * H + F * H + F + F + 1;
}

LSTMModel::LSTMModel(const LSTMParams& params) : params_(params) {
  params_.validate();
  const auto D = static_cast<std::size_t>(params.input_dim), H = static_cast<std::size_t>(params.hidden),
             F = static_cast<std::size_t>(params.fc1_dim);
  off_gate_w_ = 0;
  off_gate_b_ = off_gate_w_ + 4 * H * (D + H);
  off_fc1_w_ = off_gate_b_ + 4 * H;
  off_fc1_b_ = off_fc1_w_ + F * H;
  off_fc2_w_ = off_fc1_b_ + F;
  off_fc2_b_ = off_fc2_w_ + F;
  theta_ = Eigen::VectorXd::Zero(static_cast<Index>(parameter_count(params)));
}

LSTMModel LSTMModel::initialize(const LSTMParams& params) {
  LSTMModel m(params);
  Rng rng(params.seed);
  const double a = 1.0 / std::sqrt(static_cast<double>(params.hidden));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(params.fc1_dim));
  const auto fill = [&](auto&& block, double bound) {
    for (Index c = 0; c < block.cols(); ++c)
      for (Index r = 0; r < block.rows(); ++r) block(r, c) = rng.uniform(-bound, bound);
  };
  fill(m.gate_weights(), a);
  fill(m.gate_bias(), a);
  m.gate_bias().segment(params.hidden, params.hidden).setOnes();
  fill(m.fc1_weight(), a);
  fill(m.fc1_bias(), a);
  fill(m.fc2_weight(), a2);
  m.fc2_bias() = rng.uniform(-a2, a2);
  return m;
}

LSTMCache lstm_forward_batch(const LSTMModel& model, std::span<const FeatureMatrix* const> windows, bool training,
                             std::uint64_t seed) {
  const auto& p = model.params();
  const Index D = p.input_dim, H = p.hidden, B = static_cast<Index>(windows.size());
  if (B == 0) throw Error(Errc::EmptyInput, "empty batch");
  const Index T = windows.front()->rows();
  for (const auto* w : windows) {
    if (w->rows() != T || w->cols() != D)
      throw Error(Errc::ShapeMismatch, "window shape does not match the model input");
    if (!w->allFinite()) throw Error(Errc::NonFiniteInput, "window contains non-finite values");
  }
  if (T == 0) throw Error(Errc::ShapeMismatch, "window has no frames");

  const auto W = model.gate_weights();
  const auto bias = model.gate_bias();
  LSTMCache cache;
  cache.z.reserve(static_cast<std::size_t>(T));
  cache.gates.reserve(static_cast<std::size_t>(T));
  cache.c.reserve(static_cast<std::size_t>(T + 1));
  cache.c.push_back(MatrixXd::Zero(H, B));
  MatrixXd h = MatrixXd::Zero(H, B);

  for (Index t = 0; t < T; ++t) {
    MatrixXd z(D + H, B);
    for (Index b = 0; b < B; ++b) z.col(b).head(D) = windows[static_cast<std::size_t>(b)]->row(t).transpose();
    z.bottomRows(H) = h;
    MatrixXd a = W * z;
    a.colwise() += bias;
    MatrixXd gates(4 * H, B);
    gates.topRows(3 * H) = sigmoid(a.topRows(3 * H));
    gates.bottomRows(H) = a.bottomRows(H).array().tanh().matrix();
    const auto i = gates.middleRows(0, H);
    const auto f = gates.middleRows(H, H);
    const auto o = gates.middleRows(2 * H, H);
    const auto g = gates.middleRows(3 * H, H);
    MatrixXd c = f.cwiseProduct(cache.c.back()) + i.cwiseProduct(g);
    h = o.cwiseProduct(c.array().tanh().matrix());
    cache.z.push_back(std::move(z));
    cache.gates.push_back(std::move(gates));
    cache.c.push_back(std::move(c));
  }

  cache.mask = MatrixXd::Ones(H, B);
  if (training && p.dropout_rate > 0.0) {
    Rng rng(seed);
    const double keep = 1.0 - p.dropout_rate;
    for (Index b = 0; b < B; ++b)
      for (Index r = 0; r < H; ++r) cache.mask(r, b) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  }
  cache.dropped = h.cwiseProduct(cache.mask);
  cache.fc1_pre = model.fc1_weight() * cache.dropped;
  cache.fc1_pre.colwise() += model.fc1_bias();
  cache.fc1_act = cache.fc1_pre.cwiseMax(0.0);
  const Eigen::RowVectorXd logits = (model.fc2_weight() * cache.fc1_act).array() + model.fc2_bias();
  cache.p = (1.0 + (-logits.array()).exp()).inverse().matrix();
  return cache;
}

LSTMForward lstm_forward(const LSTMModel& model, const FeatureMatrix& window, bool training, std::uint64_t seed) {
  const FeatureMatrix* ptr = &window;
  if (window.rows() != model.params().window)
    throw Error(Errc::ShapeMismatch, "window has " + std::to_string(window.rows()) + " frames, model expects " +
                                         std::to_string(model.params().window));
  LSTMForward out;
  out.cache = lstm_forward_batch(model, std::span<const FeatureMatrix* const>(&ptr, 1), training, seed);
  out.p = out.cache.p(0);
  return out;
}

Eigen::VectorXd lstm_backward(const LSTMModel& model, const LSTMCache& cache, std::span<const int> targets) {
  const auto& p = model.params();
  const Index H = p.hidden, B = cache.p.size();
  if (static_cast<Index>(targets.size()) != B) throw Error(Errc::LengthMismatch, "targets do not match the batch");

  LSTMModel grad(p);
  Eigen::RowVectorXd dlogit(B);
  for (Index b = 0; b < B; ++b) dlogit(b) = (cache.p(b) - targets[static_cast<std::size_t>(b)]) / static_cast<double>(B);

  grad.fc2_weight() = dlogit * cache.fc1_act.transpose();
  grad.fc2_bias() = dlogit.sum();
  const MatrixXd dfc1 =
      (model.fc2_weight().transpose() * dlogit).cwiseProduct((cache.fc1_pre.array() > 0.0).cast<double>().matrix());
  grad.fc1_weight() = dfc1 * cache.dropped.transpose();
  grad.fc1_bias() = dfc1.rowwise().sum();
  MatrixXd dh = (model.fc1_weight().transpose() * dfc1).cwiseProduct(cache.mask);
  MatrixXd dc = MatrixXd::Zero(H, B);

  const auto W = model.gate_weights();
  auto dW = grad.gate_weights();
  auto db = grad.gate_bias();
  MatrixXd da(4 * H, B);
  for (Index t = static_cast<Index>(cache.z.size()) - 1; t >= 0; --t) {
    const auto& gates = cache.gates[static_cast<std::size_t>(t)];
    const auto i = gates.middleRows(0, H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto o = gates.middleRows(2 * H, H).array();
    const auto g = gates.middleRows(3 * H, H).array();
    const auto& c_prev = cache.c[static_cast<std::size_t>(t)].array();
    const Eigen::ArrayXXd tc = cache.c[static_cast<std::size_t>(t) + 1].array().tanh();

    dc.array() += dh.array() * o * (1.0 - tc.square());
    da.middleRows(0, H) = (dc.array() * g * i * (1.0 - i)).matrix();
    da.middleRows(H, H) = (dc.array() * c_prev * f * (1.0 - f)).matrix();
    da.middleRows(2 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
    da.middleRows(3 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
    dc.array() *= f;

    dW.noalias() += da * cache.z[static_cast<std::size_t>(t)].transpose();
    db += da.rowwise().sum();
    dh = (W.rightCols(H).transpose() * da);
  }
  return std::move(grad.theta());
}

double bce_loss(double p, int y) {
  const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

void AdamState::apply(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
}

Eigen::VectorXd lstm_predict(const LSTMModel& model, std::span<const LabeledSequence> sequences) {
  constexpr std::size_t kChunk = 256;
  Eigen::VectorXd out(static_cast<Index>(sequences.size()));
  std::vector<const FeatureMatrix*> ptrs;
  for (std::size_t start = 0; start < sequences.size(); start += kChunk) {
    const std::size_t end = std::min(sequences.size(), start + kChunk);
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&sequences[i].window);
    const auto cache = lstm_forward_batch(model, ptrs, false, 0);
    out.segment(static_cast<Index>(start), static_cast<Index>(end - start)) = cache.p.transpose();
  }
  return out;
}

LSTMTrainResult train_lstm(std::span<const LabeledSequence> train, std::span<const LabeledSequence> validation,
                           const LSTMParams& params) {
  params.validate();
  if (train.empty()) throw Error(Errc::EmptyDataset, "no training sequences");
  check_sequences(train, params);
  check_sequences(validation, params);
  const auto n_pos = std::count_if(train.begin(), train.end(), [](const auto& s) { return s.target; });
  if (n_pos == 0 || n_pos == static_cast<std::ptrdiff_t>(train.size()))
    throw Error(Errc::SingleClass, "LSTM training needs both classes");

  std::vector<int> val_labels;
  for (const auto& s : validation) val_labels.push_back(s.target ? 1 : 0);
  const bool use_val = !validation.empty() && std::count(val_labels.begin(), val_labels.end(), 1) > 0 &&
                       std::count(val_labels.begin(), val_labels.end(), 0) > 0;

  LSTMTrainResult result{LSTMModel::initialize(params), {}, 0};
  LSTMModel model = result.model;
  AdamState adam(model.theta().size());
  Rng rng(params.seed ^ 0x9e3779b97f4a7c15ULL);

  std::optional<double> best_auc;
  const auto record = [&](int epoch) {
    EpochRecord rec{epoch, mean_bce(lstm_predict(model, train), train), std::nullopt};
    if (use_val) {
      const Eigen::VectorXd pv = lstm_predict(model, validation);
      rec.val_auc = roc_auc(std::span<const double>(pv.data(), static_cast<std::size_t>(pv.size())), val_labels);
    }
    result.history.push_back(rec);
    const bool better = use_val ? (!best_auc || *rec.val_auc > *best_auc) : true;
    if (better) {
      best_auc = rec.val_auc;
      result.model = model;
      result.best_epoch = epoch;
    }
  };
  record(0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const FeatureMatrix*> batch;
  std::vector<int> targets;
  for (int epoch = 1; epoch <= params.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(params.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(params.batch_size));
      batch.clear();
      targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&train[order[k]].window);
        targets.push_back(train[order[k]].target ? 1 : 0);
      }
      const auto cache = lstm_forward_batch(model, batch, true, rng.next());
      adam.apply(model.theta(), lstm_backward(model, cache, targets), params.learning_rate);
    }
    if (!model.theta().allFinite()) throw Error(Errc::NonFiniteInput, "LSTM weights diverged");
    record(epoch);
  }
  return result;
}

std::string LSTMModel::to_json() const {
  ojson tensors;
  tensors["gate_order"] = "input,forget,output,candidate";
  tensors["gate_weights"] = row_major(gate_weights());
  tensors["gate_bias"] = row_major(gate_bias());
  tensors["fc1_weight"] = row_major(fc1_weight());
  tensors["fc1_bias"] = row_major(fc1_bias());
  tensors["fc2_weight"] = row_major(fc2_weight());
  tensors["fc2_bias"] = fc2_bias();

  ojson j;
  j["format"] = "proctor.lstm";
  j["schema_version"] = schema_version;
  j["params"] = {{"input_dim", params_.input_dim},     {"hidden", params_.hidden},
                 {"dropout_rate", params_.dropout_rate}, {"fc1_dim", params_.fc1_dim},
                 {"window", params_.window},           {"learning_rate", params_.learning_rate},
                 {"batch_size", params_.batch_size},   {"max_epochs", params_.max_epochs},
                 {"seed", params_.seed}};
  j["threshold"] = threshold;
  j["preprocess_fingerprint"] = preprocess_fingerprint;
  j["weights_hash"] = content_hash(tensors.dump());
  j["tensors"] = std::move(tensors);
  return j.dump();
}

LSTMModel LSTMModel::from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    if (j.at("format") != "proctor.lstm") throw Error(Errc::ConfigError, "not an LSTM model file");
    const auto& pj = j.at("params");
    LSTMParams p;
    p.input_dim = pj.at("input_dim").get<int>();
    p.hidden = pj.at("hidden").get<int>();
    p.dropout_rate = pj.at("dropout_rate").get<double>();
    p.fc1_dim = pj.at("fc1_dim").get<int>();
    p.window = pj.at("window").get<int>();
    p.learning_rate = pj.at("learning_rate").get<double>();
    p.batch_size = pj.at("batch_size").get<int>();
    p.max_epochs = pj.at("max_epochs").get<int>();
    p.seed = pj.at("seed").get<std::uint64_t>();
    const auto& tensors = j.at("tensors");
    if (content_hash(tensors.dump()) != j.at("weights_hash").get<std::string>())
      throw Error(Errc::HashMismatch, "LSTM weights do not match their recorded hash");

    LSTMModel m(p);
    m.schema_version = j.at("schema_version").get<int>();
    m.threshold = j.at("threshold").get<double>();
    m.preprocess_fingerprint = j.at("preprocess_fingerprint").get<std::string>();
    MatrixXd tmp;
    tmp.resize(4 * p.hidden, p.input_dim + p.hidden);
    read_row_major(tensors.at("gate_weights"), tmp, "gate_weights");
    m.gate_weights() = tmp;
    tmp.resize(4 * p.hidden, 1);
    read_row_major(tensors.at("gate_bias"), tmp, "gate_bias");
    m.gate_bias() = tmp;
    tmp.resize(p.fc1_dim, p.hidden);
    read_row_major(tensors.at("fc1_weight"), tmp, "fc1_weight");
    m.fc1_weight() = tmp;
    tmp.resize(p.fc1_dim, 1);
    read_row_major(tensors.at("fc1_bias"), tmp, "fc1_bias");
    m.fc1_bias() = tmp;
    tmp.resize(1, p.fc1_dim);
    read_row_major(tensors.at("fc2_weight"), tmp, "fc2_weight");
    m.fc2_weight() = tmp;
    m.fc2_bias() = tensors.at("fc2_bias").get<double>();
    if (!m.theta().allFinite()) throw Error(Errc::NonFiniteInput, "LSTM weights are not finite");
    return m;
  } catch (const ojson::exception& e) {
    throw Error(Errc::ConfigError, std::string("LSTM model: ") + e.what());
  }
}

void LSTMModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << to_json() << '\n';
}

LSTMModel LSTMModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace proctor
