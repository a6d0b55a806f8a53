// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "mvaug/pipeline.hpp"
#include "mvaug/synth.hpp"

using namespace mvaug;
using nlohmann::json;
namespace fs = std::filesystem;
namespace pl = mvaug::pipeline;

namespace {

struct FixtureDir {
  fs::path root;
  FixtureDir() {
    root = fs::temp_directory_path() / ("mvaug_pipe_" + std::to_string(std::random_device{}()));
    synth::write_fixture_set(root);
  }
  ~FixtureDir() { fs::remove_all(root); }
  pl::PipelineConfig config() const { return pl::load_config(root / "pipeline.json"); }
};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + MVAUG_CLI + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("stage names") {
  for (pl::Stage s : pl::stage_order()) CHECK(pl::parse_stage(pl::to_string(s)) == s);
  CHECK(pl::parse_stage("all") == pl::Stage::kAll);
  try {
    pl::parse_stage("nope");
    FAIL("expected ConfigError");
  } catch (const pl::ConfigError& e) {
    CHECK(std::string(e.what()).find("curate-pool") != std::string::npos);
  }
}

TEST_CASE("config parsing and validation") {
  FixtureDir fx;
  const pl::PipelineConfig cfg = fx.config();
  CHECK(cfg.seed == 2026u);
  CHECK(cfg.output_dir == fx.root / "out");
  CHECK(cfg.min_frames == 25);
  CHECK(cfg.max_frames == 550);
  CHECK(cfg.max_chunk == 33);
  CHECK(cfg.sample_steps == 4);
  CHECK_NOTHROW(pl::validate_config(cfg));

  auto bad = [&](auto mutate) {
    pl::PipelineConfig c = cfg;
    mutate(c);
    CHECK_THROWS_AS(pl::validate_config(c), pl::ConfigError);
  };
  bad([](pl::PipelineConfig& c) { c.seed.reset(); });
  bad([](pl::PipelineConfig& c) { c.max_chunk = 32; });
  bad([](pl::PipelineConfig& c) { c.stub_fixtures = "/nonexistent/stub.json"; });
  bad([](pl::PipelineConfig& c) { c.model.draws = 0; });
  bad([](pl::PipelineConfig& c) { c.model.dim = 25; });

  json j = read_json(fx.root / "pipeline.json");
  j["segmentation"] = {{"median_kernell", 5}};
  CHECK_THROWS_AS(pl::config_from_json(j, fx.root), pl::ConfigError);
  json round = pl::to_json(cfg);
  const pl::PipelineConfig again = pl::config_from_json(round, fx.root);
  CHECK(pl::to_json(again) == round);
}

TEST_CASE("environment overrides") {
  FixtureDir fx;
  pl::PipelineConfig cfg = fx.config();
  const std::map<std::string, std::string> env = {
      {"ROBOVIP_SEED", "7"}, {"ROBOVIP_WORKERS", "3"}, {"ROBOVIP_TRAIN_STEPS", "11"}, {"ROBOVIP_MAX_CHUNK", "17"}};
  pl::apply_env_overrides(cfg, [&](const char* k) -> const char* {
    auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(cfg.seed == 7u);
  CHECK(cfg.workers == 3);
  CHECK(cfg.train_steps == 11);
  CHECK(cfg.max_chunk == 17);
  CHECK_THROWS_AS(pl::apply_env_overrides(cfg, [](const char* k) -> const char* {
                    return std::string(k) == "ROBOVIP_SEED" ? "-4" : nullptr;
                  }),
                  pl::ConfigError);
}

TEST_CASE("full run, rerun and determinism of reports") {
  FixtureDir fx;
  const pl::PipelineConfig cfg = fx.config();
  std::ostringstream log1;
  const pl::RunResult r = pl::run(cfg, pl::Stage::kAll, log1);
  CHECK(r.exit_code == 0);
  CHECK(r.stages.size() == pl::stage_order().size());
  const fs::path out = cfg.output_dir;
  CHECK(fs::exists(out / "evaluate" / "report.tsv"));
  CHECK(fs::exists(out / "train-toy" / "model.ckpt"));
  const json ingest = read_json(out / "ingest" / "stage_manifest.json");
  CHECK(ingest.at("succeeded").size() == 3);
  CHECK(ingest.at("seeds").at("base") == 2026);

  std::ifstream tsv(out / "evaluate" / "report.tsv");
  std::stringstream body;
  body << tsv.rdbuf();
  CHECK(body.str().find("mvmat") != std::string::npos);
  CHECK(body.str().find("backend absent") != std::string::npos);

  std::ostringstream log2;
  const pl::RunResult again = pl::run(cfg, pl::Stage::kAll, log2);
  CHECK(again.exit_code == 0);
  for (const auto& s : again.stages) CHECK(s.up_to_date);
  for (pl::Stage s : pl::stage_order())
    CHECK(log2.str().find(pl::to_string(s) + ": up-to-date") != std::string::npos);

  // A changed seed invalidates every stage.
  pl::PipelineConfig reseeded = cfg;
  reseeded.seed = 2027;
  std::ostringstream log3;
  const pl::RunResult fresh = pl::run(reseeded, pl::Stage::kIngest, log3);
  CHECK_FALSE(fresh.stages[0].up_to_date);
}

TEST_CASE("missing upstream output is a configuration error") {
  FixtureDir fx;
  std::ostringstream log;
  CHECK_THROWS_AS(pl::run(fx.config(), pl::Stage::kSegment, log), pl::ConfigError);
}

TEST_CASE("one failing episode is recorded and the stage exits 1") {
  FixtureDir fx;
  json stub = read_json(fx.root / "stub_fixtures.json");
  const std::string victim = stub.at("episodes").begin().key();
  stub["episodes"][victim]["fail"] = {"track_video"};
  std::ofstream(fx.root / "stub_fixtures.json") << stub.dump(2);

  const pl::PipelineConfig cfg = fx.config();
  std::ostringstream log;
  CHECK(pl::run(cfg, pl::Stage::kIngest, log).exit_code == 0);
  const pl::RunResult seg = pl::run(cfg, pl::Stage::kSegment, log);
  REQUIRE(seg.stages.size() == 1);
  CHECK(seg.exit_code == 1);
  CHECK(seg.stages[0].succeeded.size() == 2);
  REQUIRE(seg.stages[0].errors.size() == 1);
  CHECK(seg.stages[0].errors[0].episode_id == victim);
  const json errors = read_json(cfg.output_dir / "segment" / "errors.json");
  CHECK(errors.size() == 1);
}

TEST_CASE("command line exit codes and precedence") {
  FixtureDir fx;
  const std::string config = "--config " + (fx.root / "pipeline.json").string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli(config + " --stage nope") == 2);
  CHECK(run_cli("--config " + (fx.root / "missing.json").string()) == 2);
  CHECK(run_cli("--bogus-flag") == 2);
  CHECK(run_cli(config + " --stage ingest", "ROBOVIP_SEED=oops") == 2);

  // Flags beat the environment, which beats the config file.
  const fs::path out = fx.root / "cli_out";
  CHECK(run_cli(config + " --stage ingest --seed 9", "ROBOVIP_SEED=5 ROBOVIP_OUTPUT=" + out.string()) == 0);
  CHECK(read_json(out / "ingest" / "stage_manifest.json").at("seeds").at("base") == 9);
  CHECK(run_cli(config + " --stage ingest", "ROBOVIP_SEED=5 ROBOVIP_OUTPUT=" + out.string()) == 0);
  CHECK(read_json(out / "ingest" / "stage_manifest.json").at("seeds").at("base") == 5);

  CHECK(run_cli("synth-fixtures --out " + (fx.root / "copy").string()) == 0);
  CHECK(fs::exists(fx.root / "copy" / "pipeline.json"));
}
