// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point for the staged augmentation workflow.
//
//   mvaug --config pipeline.json --stage all [--workers N] [--seed K]
//         [--stub-fixtures PATH]
//   mvaug synth-fixtures --out DIR
//
// Precedence: config file < ROBOVIP_* environment < flags.
// Exit codes: 0 ok, 1 partial failure, 2 configuration error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mvaug/pipeline.hpp"
#include "mvaug/synth.hpp"

namespace fs = std::filesystem;
namespace pl = mvaug::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"mvaug: multi-view robot episode augmentation pipeline"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string stage_name = "all";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::string stub_fixtures;
  app.add_option("--config", config_path, "pipeline config JSON");
  app.add_option("--stage", stage_name,
                 "ingest|segment|curate-pool|assemble|train-toy|augment|evaluate|all");
  app.add_option("--workers", workers, "per-stage worker threads");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--stub-fixtures", stub_fixtures, "stub client fixture table");

  auto* synth = app.add_subcommand("synth-fixtures", "write the procedural 3-episode fixture set");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*synth) {
    try {
      mvaug::synth::write_fixture_set(synth_out);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    std::cout << "wrote fixture set to " << synth_out << '\n';
    return 0;
  }

  try {
    if (config_path.empty()) throw pl::ConfigError("--config is required");
    pl::PipelineConfig cfg = pl::load_config(config_path);
    pl::apply_env_overrides(cfg);
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
    if (!stub_fixtures.empty()) {
      cfg.stub_fixtures = fs::absolute(stub_fixtures);
      cfg.remote_argv.clear();
    }
    const pl::Stage stage = pl::parse_stage(stage_name);
    const pl::RunResult r = pl::run(cfg, stage, std::cout);
    return r.exit_code;
  } catch (const pl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const mvaug::ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
