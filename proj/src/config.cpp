#include "proctor/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "proctor/error.hpp"

namespace proctor {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::string_view where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw Error(Errc::ConfigError, std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw Error(Errc::ConfigError, "unknown key '" + key + "' in " + std::string(where));
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  face.intrinsics.validate();
  gbdt.validate();
  lstm.validate();
  if (lstm.input_dim != kNumFeatures) throw Error(Errc::ConfigError, "lstm input_dim must equal the feature count");
  if (smote_k < 1) throw Error(Errc::ConfigError, "smote_k must be at least 1");
  if (!(face.zones.yellow_above > 0.0 && face.zones.red_above > face.zones.yellow_above))
    throw Error(Errc::ConfigError, "pose zone thresholds must satisfy 0 < yellow < red");
  if (!(face.gaze.lower > 0.0 && face.gaze.lower < face.gaze.upper && face.gaze.upper < 1.0))
    throw Error(Errc::ConfigError, "gaze bounds must satisfy 0 < lower < upper < 1");
  if (!(face.mouth.partial > 0.0 && face.mouth.open > face.mouth.partial))
    throw Error(Errc::ConfigError, "mouth thresholds must satisfy 0 < partial < open");
  if (!(face.identity_threshold > -1.0 && face.identity_threshold < 1.0))
    throw Error(Errc::ConfigError, "identity threshold must lie in (-1, 1)");
}

RunConfig config_from_json(std::string_view text, RunConfig cfg) {
  try {
    const json j = json::parse(text);
    reject_unknown(j, "config", {"paths", "seed", "smote_k", "thresholds", "gbdt", "lstm"});
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown(p, "paths", {"data", "models", "reports"});
      if (p.contains("data")) cfg.data_dir = p["data"].get<std::string>();
      if (p.contains("models")) cfg.models_dir = p["models"].get<std::string>();
      if (p.contains("reports")) cfg.reports_dir = p["reports"].get<std::string>();
    }
    read(j, "seed", cfg.seed);
    read(j, "smote_k", cfg.smote_k);
    if (j.contains("thresholds")) {
      const auto& t = j["thresholds"];
      reject_unknown(t, "thresholds",
                     {"pose_yellow", "pose_red", "gaze_lower", "gaze_upper", "mouth_partial", "mouth_open", "identity"});
      read(t, "pose_yellow", cfg.face.zones.yellow_above);
      read(t, "pose_red", cfg.face.zones.red_above);
      read(t, "gaze_lower", cfg.face.gaze.lower);
      read(t, "gaze_upper", cfg.face.gaze.upper);
      read(t, "mouth_partial", cfg.face.mouth.partial);
      read(t, "mouth_open", cfg.face.mouth.open);
      read(t, "identity", cfg.face.identity_threshold);
    }
    if (j.contains("gbdt")) {
      const auto& g = j["gbdt"];
      reject_unknown(g, "gbdt", {"n_trees", "max_depth", "learning_rate", "min_samples_leaf", "l2_lambda"});
      read(g, "n_trees", cfg.gbdt.n_trees);
      read(g, "max_depth", cfg.gbdt.max_depth);
      read(g, "learning_rate", cfg.gbdt.learning_rate);
      read(g, "min_samples_leaf", cfg.gbdt.min_samples_leaf);
      read(g, "l2_lambda", cfg.gbdt.l2_lambda);
    }
    if (j.contains("lstm")) {
      const auto& l = j["lstm"];
      reject_unknown(l, "lstm",
                     {"hidden", "dropout_rate", "fc1_dim", "window", "learning_rate", "batch_size", "max_epochs", "seed"});
      read(l, "hidden", cfg.lstm.hidden);
      read(l, "dropout_rate", cfg.lstm.dropout_rate);
      read(l, "fc1_dim", cfg.lstm.fc1_dim);
      read(l, "window", cfg.lstm.window);
      read(l, "learning_rate", cfg.lstm.learning_rate);
      read(l, "batch_size", cfg.lstm.batch_size);
      read(l, "max_epochs", cfg.lstm.max_epochs);
      read(l, "seed", cfg.lstm.seed);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), std::move(base));
}

}  // namespace proctor
