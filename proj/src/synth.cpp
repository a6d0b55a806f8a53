// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "mvaug/hash.hpp"

namespace mvaug::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Segmentation-resolution scale factors for the bundled 32x32 frames.
constexpr int kSegH = 320;
constexpr int kSegW = 448;

struct Rgb {
  int r, g, b;
};

void paint(Image& img, const Rect& rc, Rgb base, int check, int contrast) {
  for (int y = rc.y; y < rc.y + rc.h; ++y)
    for (int x = rc.x; x < rc.x + rc.w; ++x) {
      if (y < 0 || x < 0 || y >= img.height || x >= img.width) continue;
      const int k = (((x - rc.x) / check + (y - rc.y) / check) % 2) ? contrast : -contrast;
      std::uint8_t* p = img.at(y, x);
      p[0] = static_cast<std::uint8_t>(std::clamp(base.r + k, 0, 255));
      p[1] = static_cast<std::uint8_t>(std::clamp(base.g + k, 0, 255));
      p[2] = static_cast<std::uint8_t>(std::clamp(base.b + k, 0, 255));
    }
}

json seg_rect(const Rect& r, int h, int w) {
  return json::array({r.x * kSegW / w, r.y * kSegH / h, r.w * kSegW / w, r.h * kSegH / h});
}

}  // namespace

SceneLayout layout_for(const SceneSpec&, int view_index) {
  SceneLayout l;
  if (view_index % 2 == 0) {
    l.robot = {2, 0, 8, 14};
    l.object = {12, 18, 6, 6};
    l.props = {{"cup", {20, 20, 8, 8}}, {"bowl", {2, 22, 8, 8}}, {"apple", {22, 2, 6, 6}}};
  } else {
    l.robot = {22, 0, 8, 12};
    l.object = {6, 20, 6, 6};
    l.props = {{"cup", {12, 2, 8, 8}}, {"bowl", {2, 2, 8, 8}}, {"apple", {24, 24, 6, 6}}};
  }
  return l;
}

Episode make_episode(const SceneSpec& spec) {
  Episode ep;
  ep.id = spec.id;
  ep.fps = 10.0;
  ep.instruction = "pick up the " + spec.label;
  ep.source = "synthetic";
  const int T = spec.frames;
  for (std::size_t vi = 0; vi < spec.views.size(); ++vi) {
    const SceneLayout l = layout_for(spec, static_cast<int>(vi));
    std::mt19937_64 tex(derive_seed(spec.seed, "texture/" + std::to_string(vi)));
    // Static background: soft gradient plus 4x4 block texture.
    Image bg(spec.height, spec.width);
    std::vector<int> blocks((spec.height / 4 + 1) * (spec.width / 4 + 1));
    for (int& b : blocks) b = std::uniform_int_distribution<int>(-24, 24)(tex);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        const int b = blocks[(y / 4) * (spec.width / 4 + 1) + x / 4];
        std::uint8_t* p = bg.at(y, x);
        p[0] = static_cast<std::uint8_t>(std::clamp(120 + 2 * y + b, 0, 255));
        p[1] = static_cast<std::uint8_t>(std::clamp(90 + 2 * x + b, 0, 255));
        p[2] = static_cast<std::uint8_t>(std::clamp(60 + x + y + b, 0, 255));
      }
    const int tint = static_cast<int>(spec.seed % 5) * 6;
    paint(bg, l.props[0].second, {200, 60 + tint, 60}, 2, 30);
    paint(bg, l.props[1].second, {60, 80 + tint, 200}, 4, 20);
    paint(bg, l.props[2].second, {220, 200, 40 + tint}, 1, 40);
    paint(bg, l.object, {240, 120, 20}, 3, 10);
    paint(bg, l.robot, {150, 150, 160}, 8, 0);

    ViewStream vs;
    vs.role = spec.views[vi];
    for (int t = 0; t < T; ++t) {
      std::mt19937_64 rng(derive_seed(spec.seed, "noise/" + std::to_string(vi) + "/" + std::to_string(t)));
      std::uniform_int_distribution<int> n(-3, 3);
      Image f = bg;
      for (auto& px : f.pixels) px = static_cast<std::uint8_t>(std::clamp(static_cast<int>(px) + n(rng), 0, 255));
      vs.frames.push_back(std::move(f));
    }
    ep.views.push_back(std::move(vs));
  }
  canonicalize_views(ep.views);

  ep.actions.gripper_kind = GripperKind::kBoolean;
  for (int t = 0; t < T; ++t) {
    const double ph = 2.0 * M_PI * t / T;
    ep.actions.delta_pose.push_back({0.01 * std::sin(ph), 0.01 * std::cos(ph), -0.005 * std::sin(2 * ph), 0.0, 0.0,
                                     0.02 * std::sin(ph)});
    ep.actions.gripper.push_back(t >= T / 3 && t < 2 * T / 3 ? 1.0 : 0.0);
  }
  return ep;
}

json stub_fixtures(const std::vector<SceneSpec>& specs) {
  json episodes = json::object();
  for (const auto& spec : specs) {
    std::vector<ViewRole> roles = spec.views;
    json masks = json::array();
    json panoptic = json::array();
    for (std::size_t vi = 0; vi < roles.size(); ++vi) {
      const SceneLayout l = layout_for(spec, static_cast<int>(vi));
      const std::string view = roles[vi].str();
      masks.push_back({{"query", "robot"},
                       {"view", view},
                       {"frame", -1},
                       {"rects", json::array({seg_rect(l.robot, spec.height, spec.width)})}});
      masks.push_back({{"query", spec.label},
                       {"view", view},
                       {"frame", -1},
                       {"rects", json::array({seg_rect(l.object, spec.height, spec.width)})}});
      json regions = json::array();
      double score = 0.95;
      for (const auto& [label, r] : l.props) {
        regions.push_back({{"label", label}, {"score", score}, {"rects", json::array({{r.x, r.y, r.w, r.h}})}});
        score -= 0.1;
      }
      panoptic.push_back({{"view", view}, {"frame", -1}, {"regions", regions}});
    }
    episodes[spec.id] = {{"label", spec.label},
                         {"masks", masks},
                         {"track_offset", {0, 0}},
                         {"captions",
                          {{"scene", "a wooden table with a cup, a bowl and an apple."},
                           {"action", "the robot arm picks up the " + spec.label + "."},
                           {"action_chunked", "the robot arm reaches toward the " + spec.label + "."}}},
                         {"panoptic", panoptic}};
  }
  return {{"version", "fixtures-1"}, {"episodes", episodes}};
}

std::vector<SceneSpec> default_specs() {
  return {
      {"ep_alpha", {ViewRole::wrist(), ViewRole::third_person(0)}, 30, 32, 32, "carrot", 11},
      {"ep_bravo", {ViewRole::wrist(), ViewRole::third_person(0)}, 40, 32, 32, "banana", 23},
      {"ep_charlie", {ViewRole::third_person(0), ViewRole::third_person(1)}, 45, 32, 32, "orange", 37},
  };
}

void write_fixture_set(const fs::path& dir, const std::vector<SceneSpec>& specs) {
  for (const auto& spec : specs) save_artifact(make_episode(spec), dir / "episodes" / spec.id);
  std::ofstream fx(dir / "stub_fixtures.json");
  if (!fx) throw SaveError("cannot write stub fixtures under '" + dir.string() + "'");
  fx << stub_fixtures(specs).dump(2) << '\n';
  const json config = {{"seed", 2026},
                       {"workers", 1},
                       {"paths", {{"episodes", "episodes"}, {"output", "out"}}},
                       {"clients", {{"stub_fixtures", "stub_fixtures.json"}}},
                       {"model", {{"dim", 24}, {"blocks", 2}, {"heads", 2}, {"lora_rank", 4}, {"lora_alpha", 4.0}}},
                       {"train", {{"steps", 20}}},
                       {"augment", {{"sample_steps", 4}}}};
  std::ofstream cf(dir / "pipeline.json");
  if (!cf) throw SaveError("cannot write pipeline config under '" + dir.string() + "'");
  cf << config.dump(2) << '\n';
}

}  // namespace mvaug::synth
