// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Procedural episodes and matching stub fixtures for tests and smoke runs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvaug/episode.hpp"

namespace mvaug::synth {

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
};

struct SceneSpec {
  std::string id;
  std::vector<ViewRole> views;
  int frames = 30;
  int height = 32;
  int width = 32;
  std::string label = "carrot";
  std::uint64_t seed = 0;
};

/// Robot, object and harvestable regions as drawn in view `view_index`.
struct SceneLayout {
  Rect robot;
  Rect object;
  std::vector<std::pair<std::string, Rect>> props;
};

SceneLayout layout_for(const SceneSpec& spec, int view_index);

/// Renders a static textured scene with a grey robot block, the grasped
/// object and a few props, plus light per-frame noise. The gripper closes
/// over the middle third of the episode.
Episode make_episode(const SceneSpec& spec);

/// Stub fixture table consistent with make_episode for every spec: robot and
/// object masks (in segmentation-resolution coordinates), captions and
/// panoptic regions.
nlohmann::json stub_fixtures(const std::vector<SceneSpec>& specs);

/// The bundled set: two wrist + third-person episodes and one episode with two
/// third-person views, 30/40/45 frames of 32x32.
std::vector<SceneSpec> default_specs();

/// Writes episodes/<id>/, stub_fixtures.json and pipeline.json under `dir`.
void write_fixture_set(const std::filesystem::path& dir, const std::vector<SceneSpec>& specs = default_specs());

}  // namespace mvaug::synth
