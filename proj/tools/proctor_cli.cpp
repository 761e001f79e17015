// proctor: simulate, extract, train, evaluate and stream exam sessions.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "proctor/config.hpp"
#include "proctor/error.hpp"
#include "proctor/gbdt.hpp"
#include "proctor/hash.hpp"
#include "proctor/lstm.hpp"
#include "proctor/pipeline.hpp"
#include "proctor/stream.hpp"
#include "proctor/synth.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace proctor;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, std::string_view text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::IoError, "cannot write " + p.string());
}

void require_file(const fs::path& p, std::string_view what) {
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, std::string_view what) {
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

/// Splits recorded in a manifest.json next to session or feature files.
std::map<std::string, std::string> read_splits(const fs::path& dir) {
  std::map<std::string, std::string> out;
  const auto mp = dir / "manifest.json";
  if (!fs::exists(mp)) return out;
  const auto j = ojson::parse(slurp(mp));
  for (const auto& s : j.at("sessions")) out[s.at("session_id").get<std::string>()] = s.value("split", "");
  return out;
}

std::vector<SessionFeatures> load_features(const fs::path& dir, const std::string& split) {
  require_dir(dir, "features directory");
  const auto splits = read_splits(dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SessionFeatures> out;
  for (const auto& f : files) {
    auto sf = read_features_csv(f);
    if (!split.empty()) {
      const auto it = splits.find(sf.session_id);
      if (it == splits.end() || it->second != split) continue;
    }
    out.push_back(std::move(sf));
  }
  if (out.empty())
    throw UsageError("no feature files" + (split.empty() ? std::string() : " in split '" + split + "'") + " under " +
                     dir.string());
  return out;
}

std::optional<Eigen::VectorXd> reference_for(const fs::path& session_file) {
  fs::path ref = session_file;
  ref.replace_extension(".reference.json");
  if (!fs::exists(ref)) return std::nullopt;
  return embedding_from_json(slurp(ref));
}

struct Options {
  std::string config_path;
  RunConfig cfg;
};

void add_gbdt_flags(CLI::App& cmd, RunConfig& c) {
  cmd.add_option("--n-trees", c.gbdt.n_trees);
  cmd.add_option("--max-depth", c.gbdt.max_depth);
  cmd.add_option("--gbdt-learning-rate", c.gbdt.learning_rate);
  cmd.add_option("--min-samples-leaf", c.gbdt.min_samples_leaf);
  cmd.add_option("--l2-lambda", c.gbdt.l2_lambda);
  cmd.add_option("--smote-k", c.smote_k);
}

void add_lstm_flags(CLI::App& cmd, RunConfig& c) {
  cmd.add_option("--hidden", c.lstm.hidden);
  cmd.add_option("--dropout", c.lstm.dropout_rate);
  cmd.add_option("--fc1", c.lstm.fc1_dim);
  cmd.add_option("--window", c.lstm.window);
  cmd.add_option("--lstm-learning-rate", c.lstm.learning_rate);
  cmd.add_option("--batch-size", c.lstm.batch_size);
  cmd.add_option("--epochs", c.lstm.max_epochs);
  cmd.add_option("--lstm-seed", c.lstm.seed);
}

void add_threshold_flags(CLI::App& cmd, RunConfig& c) {
  cmd.add_option("--pose-yellow", c.face.zones.yellow_above);
  cmd.add_option("--pose-red", c.face.zones.red_above);
  cmd.add_option("--gaze-lower", c.face.gaze.lower);
  cmd.add_option("--gaze-upper", c.face.gaze.upper);
  cmd.add_option("--mouth-partial", c.face.mouth.partial);
  cmd.add_option("--mouth-open", c.face.mouth.open);
  cmd.add_option("--identity-threshold", c.face.identity_threshold);
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& script, fs::path out, const RunConfig& cfg) {
  std::vector<ScenarioScript> scripts;
  if (script.empty()) {
    scripts = default_benchmark_scripts();
  } else {
    require_file(script, "script file");
    scripts = load_scripts(script);
  }
  if (out.empty()) out = cfg.data_dir;
  fs::create_directories(out);
  SynthOptions opt;
  opt.face = cfg.face;
  opt.min_frames = cfg.lstm.window + 1;
  ojson manifest;
  manifest["format"] = "proctor.sessions";
  manifest["sessions"] = ojson::array();
  for (const auto& sc : scripts) {
    const auto gen = generate_session(sc, opt);
    const fs::path data = out / (sc.session_id + ".ndjson");
    write_session(data, gen.stream);
    const std::string ref = embedding_to_json(gen.reference_embedding);
    spit(out / (sc.session_id + ".reference.json"), ref);
    std::size_t positives = 0;
    for (const auto& f : gen.stream.frames) positives += f.label.value_or(false) ? 1 : 0;
    manifest["sessions"].push_back({{"session_id", sc.session_id},
                                    {"split", sc.split},
                                    {"file", data.filename().string()},
                                    {"frames", gen.stream.frames.size()},
                                    {"positive_frames", positives},
                                    {"content_hash", content_hash(slurp(data))},
                                    {"reference_hash", content_hash(ref)}});
    std::cerr << sc.session_id << ": " << gen.stream.frames.size() << " frames\n";
  }
  const std::string text = manifest.dump(2) + "\n";
  spit(out / "manifest.json", text);
  std::cout << "manifest " << content_hash(text) << '\n';
  return 0;
}

int cmd_extract(const fs::path& sessions, const fs::path& out, const RunConfig& cfg) {
  require_dir(sessions, "sessions directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(sessions))
    if (e.path().extension() == ".ndjson") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no .ndjson sessions under " + sessions.string());
  fs::create_directories(out);
  const auto splits = read_splits(sessions);
  ojson manifest;
  manifest["format"] = "proctor.features";
  manifest["sessions"] = ojson::array();
  for (const auto& f : files) {
    const auto stream = read_session(f);
    const auto ref = reference_for(f);
    const auto feats = extract_session(stream, cfg.face, ref ? &*ref : nullptr);
    const fs::path csv = out / (stream.session_id + ".csv");
    write_features_csv(csv, feats);
    const auto it = splits.find(stream.session_id);
    manifest["sessions"].push_back({{"session_id", stream.session_id},
                                    {"split", it == splits.end() ? "" : it->second},
                                    {"file", csv.filename().string()},
                                    {"rows", feats.vectors.size()}});
    std::cerr << stream.session_id << ": " << feats.vectors.size() << " rows\n";
  }
  spit(out / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

int cmd_train(const std::string& kind, const fs::path& features, const std::string& split, fs::path out,
              fs::path preprocess_path, const RunConfig& cfg) {
  const auto train = load_features(features, split);
  if (preprocess_path.empty()) preprocess_path = cfg.models_dir / "preprocess.json";
  const Preprocessor pre = fit_preprocessor(train);
  spit(preprocess_path, pre.to_json());
  if (kind == "static") {
    if (out.empty()) out = cfg.models_dir / "static.json";
    StaticTrainReport rep;
    const auto model = train_static(train, pre, cfg, &rep);
    spit(out, model.to_json());
    std::cerr << "rows " << rep.rows_before_smote << " -> " << rep.rows_after_smote << " after SMOTE ("
              << rep.danger_count << " danger), final loss " << rep.loss_curve.back() << ", threshold "
              << model.threshold << '\n';
  } else {
    if (out.empty()) out = cfg.models_dir / "temporal.json";
    const auto result = train_temporal(train, pre, cfg);
    spit(out, result.model.to_json());
    for (const auto& e : result.history)
      std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << " val_auc "
                << (e.val_auc ? std::to_string(*e.val_auc) : std::string("-")) << '\n';
    std::cerr << "best epoch " << result.best_epoch << ", threshold " << result.model.threshold << '\n';
  }
  std::cout << out.string() << ' ' << content_hash(slurp(out)) << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& static_path, const fs::path& temporal_path, const fs::path& preprocess_path,
                 const fs::path& features, const std::string& split, fs::path out, const RunConfig& cfg) {
  if (static_path.empty() && temporal_path.empty()) throw UsageError("give --static and/or --temporal");
  require_file(preprocess_path, "preprocessing file");
  const auto pre = Preprocessor::load(preprocess_path);
  const auto test = load_features(features, split);
  ojson reports = ojson::array();
  std::optional<EvalReport> s, t;
  if (!static_path.empty()) {
    require_file(static_path, "static model");
    s = evaluate_static(GBDTModel::load(static_path), pre, test);
    reports.push_back(ojson::parse(s->to_json()));
  }
  if (!temporal_path.empty()) {
    require_file(temporal_path, "temporal model");
    t = evaluate_temporal(LSTMModel::load(temporal_path), pre, test);
    reports.push_back(ojson::parse(t->to_json()));
  }
  if (s && t) std::cout << format_comparison(*s, *t);
  else std::cout << reports.dump(2) << '\n';
  if (out.empty()) out = cfg.reports_dir / "evaluation.json";
  spit(out, ojson{{"reports", reports}}.dump(2) + "\n");
  return 0;
}

int cmd_stream(const fs::path& session, const fs::path& static_path, const fs::path& temporal_path,
               const fs::path& preprocess_path, double rate, const RunConfig& cfg) {
  require_file(session, "session file");
  require_file(preprocess_path, "preprocessing file");
  if (rate < 0.0) throw UsageError("--rate must be non-negative");
  const auto pre = Preprocessor::load(preprocess_path);
  std::optional<GBDTModel> gbdt;
  std::optional<LSTMModel> lstm;
  std::optional<StreamScorer> scorer;
  if (!static_path.empty()) {
    require_file(static_path, "static model");
    gbdt = GBDTModel::load(static_path);
    if (!gbdt->preprocess_fingerprint.empty() && gbdt->preprocess_fingerprint != pre.fingerprint())
      throw Error(Errc::HashMismatch, "static model was trained with a different preprocessing state");
  }
  if (!temporal_path.empty()) {
    require_file(temporal_path, "temporal model");
    lstm = LSTMModel::load(temporal_path);
    scorer.emplace(*lstm, pre);
  }
  const auto stream = read_session(session);
  const auto ref = reference_for(session);
  const auto period = rate > 0.0 ? std::chrono::duration<double>(1.0 / rate) : std::chrono::duration<double>(0.0);
  auto next = std::chrono::steady_clock::now();
  for (const auto& rec : stream.frames) {
    const FaceGeometryReport face = analyze_face_frame(rec, cfg.face, ref ? &*ref : nullptr);
    FeatureVector v = assemble(face, analyze_hand_frame(rec));
    v.frame_index = rec.frame_index;
    ojson line;
    line["frame_index"] = rec.frame_index;
    line["static_p"] = nullptr;
    line["temporal_p"] = nullptr;
    if (gbdt) line["static_p"] = predict_proba(*gbdt, pre.transform(v.values).transpose());
    if (scorer)
      if (const auto p = scorer->push(v)) line["temporal_p"] = *p;
    line["zone"] = face.pose ? ojson(static_cast<int>(face.pose->zone)) : ojson(nullptr);
    line["gaze"] = face.gaze ? ojson(static_cast<int>(face.gaze->gaze_class)) : ojson(nullptr);
    line["mouth"] = face.mouth ? ojson(static_cast<int>(face.mouth->state)) : ojson(nullptr);
    std::cout << line.dump() << '\n';
    if (rate > 0.0) {
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      std::this_thread::sleep_until(next);
    }
  }
  std::cout.flush();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal exam proctoring pipeline"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "JSON run configuration (default: $PROCTOR_CONFIG)");

  std::string script;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Generate scripted sessions");
  sim->add_option("--script", script, "Scenario script JSON (default: built-in benchmark)");
  sim->add_option("--out", sim_out, "Output directory");

  std::string ex_sessions, ex_out;
  auto* ex = app.add_subcommand("extract", "Per-frame feature extraction");
  ex->add_option("--sessions", ex_sessions, "Directory of .ndjson sessions")->required();
  ex->add_option("--out", ex_out, "Output directory for feature CSVs")->required();

  // Flags are overlaid onto the loaded config after parsing, so they are
  // captured into a scratch config first and copied only when given.
  RunConfig flags;
  std::string kind, tr_features, tr_split = "train", tr_out, preprocess;
  auto* tr = app.add_subcommand("train", "Train the static or temporal proctor");
  tr->add_option("--kind", kind)->required()->check(CLI::IsMember({"static", "temporal"}));
  tr->add_option("--features", tr_features, "Directory of feature CSVs")->required();
  tr->add_option("--split", tr_split, "Manifest split to train on; empty for all files");
  tr->add_option("--out", tr_out, "Model file");
  tr->add_option("--preprocess", preprocess, "Preprocessing state file to write");
  tr->add_option("--seed", flags.seed);
  add_gbdt_flags(*tr, flags);
  add_lstm_flags(*tr, flags);

  std::string ev_static, ev_temporal, ev_features, ev_split = "test", ev_out;
  auto* ev = app.add_subcommand("evaluate", "Score models on held-out features");
  ev->add_option("--static", ev_static, "Static model file");
  ev->add_option("--temporal", ev_temporal, "Temporal model file");
  ev->add_option("--preprocess", preprocess, "Preprocessing state file");
  ev->add_option("--features", ev_features, "Directory of feature CSVs")->required();
  ev->add_option("--split", ev_split, "Manifest split to evaluate; empty for all files");
  ev->add_option("--out", ev_out, "Report JSON");

  std::string st_session, st_static, st_temporal;
  double rate = 0.0;
  auto* st = app.add_subcommand("stream", "Replay a session and print per-frame probabilities");
  st->add_option("--session", st_session, "Session .ndjson file")->required();
  st->add_option("--static", st_static, "Static model file");
  st->add_option("--temporal", st_temporal, "Temporal model file");
  st->add_option("--preprocess", preprocess, "Preprocessing state file");
  st->add_option("--rate", rate, "Frames per second to replay at; 0 for as fast as possible");

  for (auto* cmd : {sim, ex, st}) add_threshold_flags(*cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (opt.config_path.empty())
      if (const char* env = std::getenv(kConfigEnvVar)) opt.config_path = env;
    if (!opt.config_path.empty()) {
      require_file(opt.config_path, "config file");
      opt.cfg = load_config(opt.config_path);
    }
    // Overlay explicitly given flags.
    RunConfig& c = opt.cfg;
    auto overlay = [&](CLI::App* cmd, const char* name, auto& dst, const auto& src) {
      if (cmd->count(name) > 0) dst = src;
    };
    for (auto* cmd : {sim, ex, st}) {
      overlay(cmd, "--pose-yellow", c.face.zones.yellow_above, flags.face.zones.yellow_above);
      overlay(cmd, "--pose-red", c.face.zones.red_above, flags.face.zones.red_above);
      overlay(cmd, "--gaze-lower", c.face.gaze.lower, flags.face.gaze.lower);
      overlay(cmd, "--gaze-upper", c.face.gaze.upper, flags.face.gaze.upper);
      overlay(cmd, "--mouth-partial", c.face.mouth.partial, flags.face.mouth.partial);
      overlay(cmd, "--mouth-open", c.face.mouth.open, flags.face.mouth.open);
      overlay(cmd, "--identity-threshold", c.face.identity_threshold, flags.face.identity_threshold);
    }
    overlay(tr, "--seed", c.seed, flags.seed);
    overlay(tr, "--n-trees", c.gbdt.n_trees, flags.gbdt.n_trees);
    overlay(tr, "--max-depth", c.gbdt.max_depth, flags.gbdt.max_depth);
    overlay(tr, "--gbdt-learning-rate", c.gbdt.learning_rate, flags.gbdt.learning_rate);
    overlay(tr, "--min-samples-leaf", c.gbdt.min_samples_leaf, flags.gbdt.min_samples_leaf);
    overlay(tr, "--l2-lambda", c.gbdt.l2_lambda, flags.gbdt.l2_lambda);
    overlay(tr, "--smote-k", c.smote_k, flags.smote_k);
    overlay(tr, "--hidden", c.lstm.hidden, flags.lstm.hidden);
    overlay(tr, "--dropout", c.lstm.dropout_rate, flags.lstm.dropout_rate);
    overlay(tr, "--fc1", c.lstm.fc1_dim, flags.lstm.fc1_dim);
    overlay(tr, "--window", c.lstm.window, flags.lstm.window);
    overlay(tr, "--lstm-learning-rate", c.lstm.learning_rate, flags.lstm.learning_rate);
    overlay(tr, "--batch-size", c.lstm.batch_size, flags.lstm.batch_size);
    overlay(tr, "--epochs", c.lstm.max_epochs, flags.lstm.max_epochs);
    overlay(tr, "--lstm-seed", c.lstm.seed, flags.lstm.seed);
    c.validate();

    const fs::path pre_path = preprocess.empty() ? c.models_dir / "preprocess.json" : fs::path(preprocess);
    if (*sim) return cmd_simulate(script, sim_out, c);
    if (*ex) return cmd_extract(ex_sessions, ex_out, c);
    if (*tr) return cmd_train(kind, tr_features, tr_split, tr_out, pre_path, c);
    if (*ev) return cmd_evaluate(ev_static, ev_temporal, pre_path, ev_features, ev_split, ev_out, c);
    if (*st) return cmd_stream(st_session, st_static, st_temporal, pre_path, rate, c);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::ConfigError ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
