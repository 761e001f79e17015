#include "proctor/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "proctor/error.hpp"

namespace proctor {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kMarginClip = 30.0;
constexpr double kMinGain = 1e-12;

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

// log(1 + exp(x)) without overflow
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double mean_log_loss(const Eigen::VectorXd& margin, std::span<const int> y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < margin.size(); ++i)
    s += y[static_cast<std::size_t>(i)] == 1 ? softplus(-margin(i)) : softplus(margin(i));
  return s / static_cast<double>(margin.size());
}

struct NodeStats {
  double G = 0.0;
  double H = 0.0;
  std::size_t n = 0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct Scan {
  double GL = 0.0, HL = 0.0;
  std::size_t nL = 0;
  double last = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const std::vector<std::vector<Eigen::Index>>& order, const GBDTParams& p)
      : X_(X), order_(order), p_(p) {}

  /// Grows one tree level by level; leaves node_of pointing at each row's leaf.
  RegressionTree build(const Eigen::VectorXd& g, const Eigen::VectorXd& h, std::vector<int>& node_of) const {
    const auto n = static_cast<std::size_t>(X_.rows());
    RegressionTree tree;
    std::vector<NodeStats> stats(1);
    for (std::size_t r = 0; r < n; ++r) {
      stats[0].G += g(static_cast<Eigen::Index>(r));
      stats[0].H += h(static_cast<Eigen::Index>(r));
    }
    stats[0].n = n;
    tree.nodes.resize(1);
    std::fill(node_of.begin(), node_of.end(), 0);

    std::vector<int> active{0};
    for (int depth = 0; depth < p_.max_depth && !active.empty(); ++depth) {
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t a = 0; a < active.size(); ++a) slot[static_cast<std::size_t>(active[a])] = static_cast<int>(a);
      std::vector<SplitCandidate> best(active.size());

      for (int j = 0; j < X_.cols(); ++j) {
        std::vector<Scan> scan(active.size());
        for (Eigen::Index r : order_[static_cast<std::size_t>(j)]) {
          const int s = slot[static_cast<std::size_t>(node_of[static_cast<std::size_t>(r)])];
          if (s < 0) continue;
          auto& sc = scan[static_cast<std::size_t>(s)];
          const double v = X_(r, j);
          if (sc.nL > 0 && v > sc.last) {
            const auto& st = stats[static_cast<std::size_t>(active[static_cast<std::size_t>(s)])];
            const std::size_t nR = st.n - sc.nL;
            if (sc.nL >= static_cast<std::size_t>(p_.min_samples_leaf) &&
                nR >= static_cast<std::size_t>(p_.min_samples_leaf)) {
              const double GR = st.G - sc.GL, HR = st.H - sc.HL;
              const double lam = p_.l2_lambda;
              const double gain = sc.GL * sc.GL / (sc.HL + lam) + GR * GR / (HR + lam) - st.G * st.G / (st.H + lam);
              auto& b = best[static_cast<std::size_t>(s)];
              if (gain > b.gain) {
                double thr = 0.5 * (sc.last + v);
                if (!(thr < v)) thr = sc.last;
                b = {gain, j, thr};
              }
            }
          }
          sc.GL += g(r);
          sc.HL += h(r);
          ++sc.nL;
          sc.last = v;
        }
      }

      std::vector<int> next;
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (best[a].feature < 0 || best[a].gain <= kMinGain) continue;
        const int id = active[a];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.resize(tree.nodes.size() + 2);
        stats.resize(tree.nodes.size());
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best[a].feature;
        node.threshold = best[a].threshold;
        node.gain = best[a].gain;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;
      for (std::size_t r = 0; r < n; ++r) {
        const auto& node = tree.nodes[static_cast<std::size_t>(node_of[r])];
        if (node.is_leaf()) continue;
        const auto ri = static_cast<Eigen::Index>(r);
        const int child = X_(ri, node.feature) <= node.threshold ? node.left : node.right;
        node_of[r] = child;
        auto& st = stats[static_cast<std::size_t>(child)];
        st.G += g(ri);
        st.H += h(ri);
        ++st.n;
      }
      active = std::move(next);
    }

    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
      if (tree.nodes[i].is_leaf()) tree.nodes[i].value = -stats[i].G / (stats[i].H + p_.l2_lambda);
    return tree;
  }

 private:
  const Eigen::MatrixXd& X_;
  const std::vector<std::vector<Eigen::Index>>& order_;
  const GBDTParams& p_;
};

ojson params_json(const GBDTParams& p) {
  ojson j;
  j["n_trees"] = p.n_trees;
  j["max_depth"] = p.max_depth;
  j["learning_rate"] = p.learning_rate;
  j["min_samples_leaf"] = p.min_samples_leaf;
  j["l2_lambda"] = p.l2_lambda;
  return j;
}

}  // namespace

void GBDTParams::validate() const {
  if (n_trees < 0 || max_depth < 1 || min_samples_leaf < 1 || !(learning_rate > 0.0 && learning_rate <= 1.0) ||
      !(l2_lambda >= 0.0))
    throw Error(Errc::ConfigError, "invalid GBDT parameters");
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

GBDTModel train_gbdt(const Eigen::MatrixXd& X, std::span<const int> y, const GBDTParams& params, std::uint64_t seed,
                     std::vector<double>* loss_curve) {
  params.validate();
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error(Errc::LengthMismatch, "X and y differ in length");
  if (!X.allFinite()) throw Error(Errc::NonFiniteFeature, "training features must be finite (impute first)");
  const auto n_pos = std::count(y.begin(), y.end(), 1);
  const auto n = static_cast<Eigen::Index>(y.size());
  if (n_pos == 0 || n_pos == n) throw Error(Errc::SingleClass, "GBDT training needs both classes");

  GBDTModel model;
  model.params = params;
  model.seed = seed;
  model.num_features = static_cast<int>(X.cols());
  const double prior = static_cast<double>(n_pos) / static_cast<double>(n);
  model.base_score = std::log(prior / (1.0 - prior));

  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Eigen::Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return X(a, j) < X(b, j); });
  }

  Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, model.base_score);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  if (loss_curve) loss_curve->assign(1, mean_log_loss(margin, y));

  TreeBuilder builder(X, order, params);
  std::vector<int> node_of(static_cast<std::size_t>(n));
  for (int t = 0; t < params.n_trees; ++t) {
    const Eigen::VectorXd p = margin.unaryExpr([](double m) { return sigmoid(m); });
    const Eigen::VectorXd g = p - yv;
    const Eigen::VectorXd h = p.array() * (1.0 - p.array());
    RegressionTree tree = builder.build(g, h, node_of);
    for (Eigen::Index i = 0; i < n; ++i)
      margin(i) += params.learning_rate * tree.nodes[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].value;
    model.trees.push_back(std::move(tree));
    if (loss_curve) loss_curve->push_back(mean_log_loss(margin, y));
  }
  return model;
}

double predict_proba(const GBDTModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() != model.num_features)
    throw Error(Errc::SchemaMismatch, "row has " + std::to_string(x.size()) + " features, model expects " +
                                          std::to_string(model.num_features));
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.predict(x);
  const double m = std::clamp(model.base_score + model.params.learning_rate * sum, -kMarginClip, kMarginClip);
  return sigmoid(m);
}

Eigen::VectorXd predict_proba_batch(const GBDTModel& model, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_proba(model, X.row(i));
  return out;
}

Eigen::VectorXd split_gain_importance(const GBDTModel& model) {
  Eigen::VectorXd imp = Eigen::VectorXd::Zero(model.num_features);
  for (const auto& t : model.trees)
    for (const auto& nd : t.nodes)
      if (!nd.is_leaf()) imp(nd.feature) += nd.gain;
  return imp;
}

std::string GBDTModel::to_json() const {
  ojson j;
  j["format"] = "proctor.gbdt";
  j["schema_version"] = schema_version;
  j["num_features"] = num_features;
  j["seed"] = seed;
  j["params"] = params_json(params);
  j["base_score"] = base_score;
  j["threshold"] = threshold;
  j["preprocess_fingerprint"] = preprocess_fingerprint;
  j["trees"] = ojson::array();
  for (const auto& t : trees) {
    ojson tj;
    ojson feat = ojson::array(), thr = ojson::array(), left = ojson::array(), right = ojson::array(),
          val = ojson::array(), gain = ojson::array();
    for (const auto& nd : t.nodes) {
      feat.push_back(nd.feature);
      thr.push_back(nd.threshold);
      left.push_back(nd.left);
      right.push_back(nd.right);
      val.push_back(nd.value);
      gain.push_back(nd.gain);
    }
    tj["feature"] = std::move(feat);
    tj["threshold"] = std::move(thr);
    tj["left"] = std::move(left);
    tj["right"] = std::move(right);
    tj["value"] = std::move(val);
    tj["gain"] = std::move(gain);
    j["trees"].push_back(std::move(tj));
  }
  return j.dump();
}

GBDTModel GBDTModel::from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    if (j.at("format") != "proctor.gbdt") throw Error(Errc::ConfigError, "not a GBDT model file");
    GBDTModel m;
    m.schema_version = j.at("schema_version").get<int>();
    m.num_features = j.at("num_features").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("params");
    m.params = {p.at("n_trees").get<int>(), p.at("max_depth").get<int>(), p.at("learning_rate").get<double>(),
                p.at("min_samples_leaf").get<int>(), p.at("l2_lambda").get<double>()};
    m.base_score = j.at("base_score").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.preprocess_fingerprint = j.at("preprocess_fingerprint").get<std::string>();
    for (const auto& tj : j.at("trees")) {
      RegressionTree t;
      const auto feat = tj.at("feature").get<std::vector<int>>();
      const auto thr = tj.at("threshold").get<std::vector<double>>();
      const auto left = tj.at("left").get<std::vector<int>>();
      const auto right = tj.at("right").get<std::vector<int>>();
      const auto val = tj.at("value").get<std::vector<double>>();
      const auto gain = tj.at("gain").get<std::vector<double>>();
      const std::size_t k = feat.size();
      if (k == 0 || thr.size() != k || left.size() != k || right.size() != k || val.size() != k || gain.size() != k)
        throw Error(Errc::ConfigError, "tree arrays differ in length");
      for (std::size_t i = 0; i < k; ++i) {
        if (feat[i] >= m.num_features ||
            (feat[i] >= 0 && (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                              left[i] >= static_cast<int>(k) || right[i] >= static_cast<int>(k))))
          throw Error(Errc::ConfigError, "tree node " + std::to_string(i) + " is malformed");
        t.nodes.push_back({feat[i], thr[i], left[i], right[i], val[i], gain[i]});
      }
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const ojson::exception& e) {
    throw Error(Errc::ConfigError, std::string("GBDT model: ") + e.what());
  }
}

void GBDTModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << to_json() << '\n';
}

GBDTModel GBDTModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace proctor
