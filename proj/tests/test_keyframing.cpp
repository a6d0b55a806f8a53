// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "mvaug/keyframing.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mvaug;

namespace {

ActionTrace trace(std::vector<double> g, GripperKind kind) {
  ActionTrace a;
  a.gripper = std::move(g);
  a.delta_pose.assign(a.gripper.size(), {0, 0, 0, 0, 0, 0});
  a.gripper_kind = kind;
  return a;
}

using Bits = std::vector<std::uint8_t>;

}  // namespace

TEST_CASE("boolean gripper passes through") {
  CHECK(binarize_gripper(trace({0, 0, 1, 1, 0}, GripperKind::kBoolean)) == Bits{0, 0, 1, 1, 0});
}

TEST_CASE("continuous gripper thresholds against half the max aperture") {
  CHECK(binarize_gripper(trace({0.08, 0.07, 0.01, 0.00}, GripperKind::kContinuous), 0.5) == Bits{0, 0, 1, 1});
}

TEST_CASE("all-zero continuous trace is closed throughout") {
  CHECK(binarize_gripper(trace({0, 0, 0, 0}, GripperKind::kContinuous)) == Bits{1, 1, 1, 1});
}

TEST_CASE("single closure run with clamped buffers") {
  const auto w = interaction_windows({0, 0, 0, 1, 1, 1, 0, 0, 0, 0}, 5, 5);
  REQUIRE(w.size() == 1);
  CHECK(w[0].start == 0);
  CHECK(w[0].close_idx == 3);
  CHECK(w[0].open_idx == 6);
  CHECK(w[0].end == 9);
}

TEST_CASE("no closure gives no windows") { CHECK(interaction_windows(Bits(12, 0)).empty()); }

TEST_CASE("overlapping windows are not merged") {
  const auto w = interaction_windows({1, 1, 0, 0, 1, 1, 1}, 1, 1);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == InteractionWindow{0, 3, 0, 2});
  CHECK(w[1].start == 3);
  CHECK(w[1].close_idx == 4);
  CHECK_FALSE(w[1].open_idx.has_value());
  CHECK(w[1].end == 6);
}

TEST_CASE("windows agree with the run-scan oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int T = 1 + static_cast<int>(rng() % 60);
    Bits s(T);
    for (auto& b : s) b = rng() % 3 == 0;
    const int pre = static_cast<int>(rng() % 7), post = static_cast<int>(rng() % 7);
    const auto got = interaction_windows(s, pre, post);
    const auto want = oracle::windows(s, pre, post);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].start == want[i].start);
      CHECK(got[i].end == want[i].end);
      CHECK(got[i].close_idx == want[i].close_idx);
      CHECK(got[i].open_idx == want[i].open_idx);
    }
  }
}

TEST_CASE("clip extraction") {
  const auto clip = testing::synthetic_clip(40, 2);
  const Episode& ep = clip.episode;
  const ViewStream c = extract_clip(ep, InteractionWindow{10, 20, 12, 18}, ViewRole::wrist());
  CHECK(c.frame_count() == 11);
  CHECK(c.frames.front() == ep.view(ViewRole::wrist()).frames[10]);
  CHECK(extract_clip(ep, InteractionWindow{0, 39, 0, {}}, ViewRole::wrist()) == ep.view(ViewRole::wrist()));
  CHECK_THROWS_AS(extract_clip(ep, InteractionWindow{0, 40, 0, {}}, ViewRole::wrist()), PreconditionError);
}
