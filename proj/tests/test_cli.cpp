#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "proctor/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string("env -u PROCTOR_CONFIG ") + PROCTOR_CLI_PATH + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "proctor_test_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string line_with(const std::string& text, const std::string& prefix) {
  const auto at = text.find(prefix);
  if (at == std::string::npos) return {};
  return text.substr(at, text.find('\n', at) - at);
}

// Two training sessions and one test session from the default benchmark.
std::size_t write_script(const fs::path& path) {
  const auto all = proctor::default_benchmark_scripts();
  const std::vector<proctor::ScenarioScript> scripts{all[0], all[1], all[8]};
  std::ofstream(path) << proctor::scripts_to_json(scripts);
  return static_cast<std::size_t>(all[8].total_frames());
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const auto dir = workdir();
  const auto missing = (dir / "no_such_script.json").string();
  const auto r = run("simulate --script " + missing + " --out " + (dir / "s").string());
  CHECK(r.code == 2);
  CHECK(r.output.find(missing) != std::string::npos);

  CHECK(run("frobnicate").code == 2);
  CHECK(run("train --kind fancy --features x").code == 2);
  CHECK(run("extract --sessions " + (dir / "absent").string() + " --out " + (dir / "f").string()).code == 2);

  std::ofstream(dir / "bad.json") << R"({"unknown": 1})";
  CHECK(run("--config " + (dir / "bad.json").string() + " simulate --out " + (dir / "s").string()).code == 2);
}

TEST_CASE("end-to-end run") {
  const auto dir = workdir();
  const auto script = dir / "script.json";
  const std::size_t test_frames = write_script(script);
  const auto sessions = dir / "sessions", features = dir / "features", models = dir / "models";

  const auto sim = run("simulate --script " + script.string() + " --out " + sessions.string());
  REQUIRE(sim.code == 0);
  CHECK(fs::exists(sessions / "manifest.json"));
  CHECK(fs::exists(sessions / "session_01.ndjson"));
  CHECK(fs::exists(sessions / "session_01.reference.json"));
  const auto again = run("simulate --script " + script.string() + " --out " + (dir / "sessions2").string());
  CHECK(line_with(sim.output, "manifest ") == line_with(again.output, "manifest "));
  CHECK_FALSE(line_with(sim.output, "manifest ").empty());

  REQUIRE(run("extract --sessions " + sessions.string() + " --out " + features.string()).code == 0);
  CHECK(fs::exists(features / "session_09.csv"));

  const auto pre = (models / "preprocess.json").string();
  const auto st = run("train --kind static --features " + features.string() + " --out " +
                      (models / "static.json").string() + " --preprocess " + pre + " --n-trees 20 --max-depth 3");
  REQUIRE(st.code == 0);
  const auto tm = run("train --kind temporal --features " + features.string() + " --out " +
                      (models / "temporal.json").string() + " --preprocess " + pre +
                      " --hidden 8 --fc1 4 --epochs 2");
  REQUIRE(tm.code == 0);

  const auto ev = run("evaluate --static " + (models / "static.json").string() + " --temporal " +
                      (models / "temporal.json").string() + " --preprocess " + pre + " --features " +
                      features.string() + " --out " + (dir / "report.json").string());
  REQUIRE(ev.code == 0);
  CHECK(ev.output.find("False Positives") != std::string::npos);
  CHECK(fs::exists(dir / "report.json"));

  const auto stream = run("stream --session " + (sessions / "session_09.ndjson").string() + " --static " +
                          (models / "static.json").string() + " --temporal " + (models / "temporal.json").string() +
                          " --preprocess " + pre + " --rate 0");
  REQUIRE(stream.code == 0);
  std::size_t lines = 0, temporal = 0;
  for (std::size_t at = 0; (at = stream.output.find("{\"frame_index\"", at)) != std::string::npos; ++at) {
    ++lines;
    const auto end = stream.output.find('\n', at);
    if (stream.output.substr(at, end - at).find("\"temporal_p\":null") == std::string::npos) ++temporal;
  }
  CHECK(lines == test_frames);
  CHECK(temporal == test_frames - 14);

  // a model trained against other preprocessing state is rejected at run time
  const auto other = (dir / "other_pre.json").string();
  REQUIRE(run("train --kind static --features " + features.string() + " --split '' --out " +
              (dir / "other.json").string() + " --preprocess " + other + " --n-trees 5")
              .code == 0);
  CHECK(run("evaluate --static " + (models / "static.json").string() + " --preprocess " + other + " --features " +
            features.string())
            .code == 1);
}
