// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Staged, resumable augmentation workflow. Every stage writes its artifacts
// under <output>/<stage>/ together with stage_manifest.json, which records an
// inputs hash (config section, seeds, client fingerprint and the outputs hash
// of every upstream stage) and an outputs hash. A stage whose inputs hash and
// on-disk outputs still match its manifest is skipped as up-to-date.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvaug/conditioning.hpp"
#include "mvaug/denoiser.hpp"
#include "mvaug/identity_pool.hpp"
#include "mvaug/segmentation.hpp"

namespace mvaug::pipeline {

class ConfigError : public Error { using Error::Error; };

enum class Stage { kIngest, kSegment, kCuratePool, kAssemble, kTrainToy, kAugment, kEvaluate, kAll };

std::string to_string(Stage s);
Stage parse_stage(const std::string& s);
/// Concrete stages in execution order.
const std::vector<Stage>& stage_order();

struct PipelineConfig {
  std::filesystem::path episodes_dir;  // one sub-directory per episode with episode.json
  std::filesystem::path pool_dir;      // default: <output>/pool
  std::filesystem::path output_dir;
  std::optional<std::uint64_t> seed;   // required
  int workers = 1;

  // Stage toggles consulted by `--stage all`.
  std::map<Stage, bool> enabled;

  // Clients: a stub fixture table, or a remote backend command.
  std::filesystem::path stub_fixtures;
  std::vector<std::string> remote_argv;
  nlohmann::json remote_passthrough = nlohmann::json::object();

  // Length curation: discard below 25 frames, crop above 550.
  int min_frames = 25;
  int max_frames = 550;

  // Segmentation: 0.5 gripper threshold, 5/5 frame buffers, 5 anchor samples,
  // 5x5 median filter, 5 prompt points.
  SegmentationConfig segmentation;

  // Identity pool: 60% background cap, cascade 50 / 10+10 / 30 / 60 percent,
  // panoptic queries on 3 uniformly spaced frames per view.
  double max_bg_fraction = kMaxBackgroundFraction;
  std::filesystem::path allowlist;  // default: bundled class list
  CascadePercents percents;
  int pool_frames_per_view = 3;

  // Assembly: 2 stitched views, 720x1280 budget, 33-frame chunks, 2..4
  // identities resized by [0.8, 1.2], 2 px gutters.
  AssemblyConfig assembly;
  int max_chunk = 33;
  std::optional<int> n_identities;

  // Toy denoiser and its training run.
  diffusion::DenoiserConfig model;
  int train_steps = 200;

  // Sampling: 20 Euler steps.
  int sample_steps = 20;

  // Evaluation: every frame, 0.5 matcher confidence.
  int eval_stride = 1;
  double match_threshold = 0.5;
  std::vector<std::string> metrics = {"mvmat", "mse-standin", "fid", "fvd", "lpips"};

  bool stage_enabled(Stage s) const;
};

/// Relative paths resolve against `base_dir`. Throws ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& config);

/// Applies ROBOVIP_* overrides: SEED, WORKERS, STUB_FIXTURES, EPISODES, POOL,
/// OUTPUT, TRAIN_STEPS, SAMPLE_STEPS, MAX_CHUNK. Throws ConfigError on a
/// malformed value.
void apply_env_overrides(PipelineConfig& config,
                         const std::function<const char*(const char*)>& lookup = nullptr);

/// Throws ConfigError naming the first problem.
void validate_config(const PipelineConfig& config);

struct LedgerEntry {
  std::string episode_id;
  std::string stage;
  std::string kind;
  std::string message;
};

struct StageOutcome {
  Stage stage = Stage::kIngest;
  bool up_to_date = false;
  std::vector<std::string> succeeded;
  std::vector<LedgerEntry> errors;
  int exit_code() const { return errors.empty() ? 0 : 1; }
};

struct RunResult {
  std::vector<StageOutcome> stages;
  int exit_code = 0;  // 0 ok, 1 partial failure, 2 configuration error
};

/// Runs one stage, or every enabled stage for Stage::kAll. Configuration and
/// missing-upstream problems throw ConfigError. `clients` overrides the
/// configured backend.
RunResult run(const PipelineConfig& config, Stage stage, std::ostream& log,
              const ClientSet* clients = nullptr);

}  // namespace mvaug::pipeline
