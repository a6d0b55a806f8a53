// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "mvaug/imaging.hpp"
#include "mvaug/remote_clients.hpp"
#include "mvaug/stub_clients.hpp"
#include "support.hpp"

using namespace mvaug;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json fixtures() {
  return json::parse(R"({
    "episodes": {
      "ep1": {
        "label": "carrot",
        "masks": [
          {"query": "robot", "frame": 0, "rects": [[5, 6, 40, 40]]},
          {"query": "robot", "rects": [[0, 0, 2, 2]]}
        ],
        "track_offset": [1, 0],
        "panoptic": [{"regions": [
          {"label": "cup", "score": 0.9, "rects": [[1, 1, 4, 4]]},
          {"label": "bowl", "rects": [[10, 10, 6, 3]]}
        ]}],
        "captions": {"scene": "a kitchen table", "action": "the arm lifts a carrot",
                     "action_chunked": "the arm reaches"}
      },
      "still": {"label": "cup", "track_offset": [0, 0]},
      "empty": {"panoptic": [{"regions": []}]},
      "broken": {"label": "x", "fail": ["reason_object_name", "open_vocab_mask"]}
    }
  })");
}

ViewStream blank_stream(int T, int h, int w) {
  ViewStream s{ViewRole::wrist(), {}};
  for (int t = 0; t < T; ++t) s.frames.emplace_back(h, w);
  return s;
}

CallContext ctx(const std::string& ep, int frame = 0) { return {ep, ViewRole::wrist(), frame}; }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mvaug_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("panoptic vocabulary has 133 distinct classes") {
  const auto& v = panoptic_vocabulary();
  CHECK(v.size() == 133);
  CHECK(std::set<std::string>(v.begin(), v.end()).size() == 133);
  CHECK(in_panoptic_vocabulary("cup"));
  CHECK(in_panoptic_vocabulary("dining table"));
  CHECK(in_panoptic_vocabulary("table-merged"));
  CHECK_FALSE(in_panoptic_vocabulary("carrot cake"));
}

TEST_CASE("stub object reasoning") {
  StubBackend stub(fixtures());
  CHECK(stub.reason_object_name(ctx("ep1"), blank_stream(3, 8, 8), kObjectQuestion) == "carrot");
  CHECK_THROWS_AS(stub.reason_object_name(ctx("unknown"), blank_stream(3, 8, 8), kObjectQuestion), ClientError);
  CHECK_THROWS_AS(stub.reason_object_name(ctx("broken"), blank_stream(3, 8, 8), kObjectQuestion), ClientError);
}

TEST_CASE("stub open-vocabulary masks") {
  StubBackend stub(fixtures());
  const Image frame(64, 64);
  const MaskResult m = stub.open_vocab_mask(ctx("ep1", 0), frame, "robot");
  CHECK_FALSE(m.warning);
  CHECK(m.mask.area() == 1600);
  CHECK(m.mask.get(6, 5));
  CHECK(m.mask.get(45, 44));
  CHECK_FALSE(m.mask.get(5, 5));
  CHECK_FALSE(m.mask.get(46, 44));
  // Frame-specific entries win; other frames fall back to the wildcard.
  CHECK(stub.open_vocab_mask(ctx("ep1", 3), frame, "robot").mask.area() == 4);

  const MaskResult none = stub.open_vocab_mask(ctx("ep1"), frame, "spoon");
  CHECK(none.warning);
  CHECK_FALSE(none.mask.any());
  CHECK(none.mask.height == 64);
  CHECK_THROWS_AS(stub.open_vocab_mask(ctx("ep1"), frame, ""), PreconditionError);
}

TEST_CASE("stub tracker propagation") {
  StubBackend stub(fixtures());
  Mask anchor(20, 20);
  fill_rect(anchor, 2, 3, 5, 4);
  PointPrompt pp{{{4, 5}}};

  const TrackResult still = stub.track_video(ctx("still"), blank_stream(6, 20, 20), pp, 2, &anchor);
  for (const auto& m : still.masks) CHECK(m == anchor);

  const int anchor_idx = 1;
  const TrackResult moving = stub.track_video(ctx("ep1"), blank_stream(20, 20, 20), pp, anchor_idx, &anchor);
  REQUIRE(moving.masks.size() == 20);
  for (int t = 0; t < 20; ++t) {
    // Direct rasterisation of the shifted rectangle, clipped to the frame.
    Mask want(20, 20);
    const int shift = t - anchor_idx;
    for (int y = 3; y < 7; ++y)
      for (int x = 2 + shift; x < 7 + shift; ++x)
        if (x >= 0 && x < 20) want.set(y, x, true);
    CHECK(moving.masks[t] == want);
  }

  CHECK_THROWS_AS(stub.track_video(ctx("ep1"), blank_stream(4, 20, 20), PointPrompt{{{25, 1}}}, 0, nullptr),
                  PreconditionError);
  CHECK_THROWS_AS(stub.track_video(ctx("ep1"), blank_stream(4, 20, 20), PointPrompt{{{-1, 1}}}, 0, nullptr),
                  PreconditionError);
  CHECK_THROWS_AS(stub.track_video(ctx("ep1"), blank_stream(4, 20, 20), pp, 4, nullptr), PreconditionError);
}

TEST_CASE("stub panoptic regions") {
  StubBackend stub(fixtures());
  const PanopticResult two = stub.panoptic_segment(ctx("ep1"), Image(32, 32));
  REQUIRE(two.regions.size() == 2);
  CHECK(two.regions[0].label == "cup");
  CHECK(two.regions[0].score == doctest::Approx(0.9));
  CHECK(two.regions[1].mask.area() == 18);
  CHECK(stub.panoptic_segment(ctx("empty"), Image(32, 32)).regions.empty());
}

TEST_CASE("caption templates reach the backend verbatim") {
  StubBackend stub(fixtures());
  const Video v(2, Image(8, 8));
  CHECK(stub.caption_episode(ctx("ep1"), v, CaptionTemplate::kScene) == "a kitchen table");
  CHECK(stub.caption_episode(ctx("ep1"), v, CaptionTemplate::kAction) == "the arm lifts a carrot");
  CHECK(stub.caption_episode(ctx("ep1"), v, CaptionTemplate::kActionChunked) == "the arm reaches");
  const auto log = stub.caption_log();
  REQUIRE(log.size() == 3);
  CHECK(log[0].rfind("Describe the scene setup in the video (exclude the robot arm) within 15 words.", 0) == 0);
  CHECK(log[1].rfind("Describe the action of the robot arm briefly in the video within 15 words.", 0) == 0);
  CHECK(log[2].rfind("Describe the action of the robot arm briefly in the video within 10 words.", 0) == 0);
  CHECK(log[2].find("Do not predict what will happen.") != std::string::npos);
  CHECK(compose_prompt("a table.", "an arm.") == "a table. an arm.");
}

TEST_CASE("stub matcher") {
  StubBackend stub(json::object());
  std::mt19937_64 rng(8);
  const Image a = testing::random_image(64, 48, rng);
  CHECK(stub.match_features(a, a, 0.5) == StubBackend::max_matches(64, 48));
  CHECK(StubBackend::max_matches(64, 48) == 48);
  const Image b = testing::random_image(64, 48, rng);
  CHECK(stub.match_features(a, b, 0.5) < 0.01 * StubBackend::max_matches(64, 48));
}

TEST_CASE("stub scorers pass fixtures through") {
  json f = json::parse(R"({"scores": {"iqa": {"a1": 0.25}, "clip": {"a1": 0.75}, "fail": ["bad"]}})");
  StubBackend stub(f);
  const Image img(4, 4, 9);
  CHECK(stub.iqa("a1", img) == 0.25);
  CHECK(stub.clip_similarity("a1", img, "a cup") == 0.75);
  const double h = stub.iqa("other", img);
  CHECK(h >= 0.0);
  CHECK(h < 1.0);
  CHECK(stub.iqa("other", img) == h);
  CHECK_THROWS_AS(stub.iqa("bad", img), ClientError);
}

TEST_CASE("remote backend matches the stub through the line protocol") {
  TempDir tmp("remote");
  const fs::path fx = tmp.path / "fixtures.json";
  std::ofstream(fx) << fixtures().dump();
  StubBackend stub(fixtures());
  RemoteBackend remote({MVAUG_FAKE_BACKEND, fx.string()}, tmp.path / "work");
  CHECK(remote.info() == BackendInfo{"fake", "1"});

  CHECK(remote.reason_object_name(ctx("ep1"), blank_stream(2, 8, 8), kObjectQuestion) == "carrot");
  CHECK(remote.open_vocab_mask(ctx("ep1"), Image(64, 64), "robot").mask ==
        stub.open_vocab_mask(ctx("ep1"), Image(64, 64), "robot").mask);
  Mask anchor(20, 20);
  fill_rect(anchor, 2, 3, 5, 4);
  CHECK(remote.track_video(ctx("ep1"), blank_stream(5, 20, 20), PointPrompt{{{4, 5}}}, 1, &anchor).masks ==
        stub.track_video(ctx("ep1"), blank_stream(5, 20, 20), PointPrompt{{{4, 5}}}, 1, &anchor).masks);
  const auto pr = remote.panoptic_segment(ctx("ep1"), Image(32, 32));
  REQUIRE(pr.regions.size() == 2);
  CHECK(pr.regions[1].label == "bowl");
  CHECK(pr.regions[1].mask.area() == 18);
  CHECK(remote.caption_episode(ctx("ep1"), Video(1, Image(8, 8)), CaptionTemplate::kActionChunked) ==
        "the arm reaches");
  std::mt19937_64 rng(2);
  const Image a = testing::random_image(32, 32, rng);
  CHECK(remote.match_features(a, a, 0.5) == 16);
  CHECK(remote.iqa("x", a) == stub.iqa("x", a));
  CHECK(remote.clip_similarity("x", a, "cup") == stub.clip_similarity("x", a, "cup"));
  CHECK_THROWS_AS(remote.reason_object_name(ctx("unknown"), blank_stream(1, 8, 8), kObjectQuestion), ClientError);
}

TEST_CASE("remote errors surface as client errors") {
  TempDir tmp("remote_fail");
  const fs::path fx = tmp.path / "fixtures.json";
  std::ofstream(fx) << fixtures().dump();
  SUBCASE("op failure") {
    RemoteBackend remote({MVAUG_FAKE_BACKEND, fx.string(), "--fail", "panoptic_segment"}, tmp.path / "work");
    try {
      remote.panoptic_segment(ctx("ep1"), Image(8, 8));
      FAIL("expected ClientError");
    } catch (const ClientError& e) {
      CHECK(e.episode_id() == "ep1");
      CHECK(std::string(e.what()).find("injected failure") != std::string::npos);
    }
    // The process stays usable after an error response.
    CHECK(remote.reason_object_name(ctx("ep1"), blank_stream(1, 8, 8), kObjectQuestion) == "carrot");
  }
  SUBCASE("backend exits mid-run") {
    RemoteBackend remote({MVAUG_FAKE_BACKEND, fx.string(), "--exit-after", "2"}, tmp.path / "work");
    CHECK(remote.reason_object_name(ctx("ep1"), blank_stream(1, 8, 8), kObjectQuestion) == "carrot");
    CHECK_THROWS_AS(remote.reason_object_name(ctx("ep1"), blank_stream(1, 8, 8), kObjectQuestion), ClientError);
  }
  SUBCASE("missing executable") {
    CHECK_THROWS_AS(RemoteBackend({(tmp.path / "no_such_backend").string()}, tmp.path / "work"), ClientError);
  }
  SUBCASE("empty command") { CHECK_THROWS_AS(RemoteBackend({}, tmp.path / "work"), ParameterError); }
}

TEST_CASE("remote passthrough parameters are forwarded") {
  TempDir tmp("remote_pass");
  const fs::path fx = tmp.path / "fixtures.json";
  const fs::path echo = tmp.path / "echo.jsonl";
  std::ofstream(fx) << fixtures().dump();
  {
    RemoteBackend remote({MVAUG_FAKE_BACKEND, fx.string(), "--echo-params", echo.string()}, tmp.path / "work",
                         json{{"temperature", 0.2}, {"max_tokens", 32}});
    remote.caption_episode(ctx("ep1"), Video(1, Image(8, 8)), CaptionTemplate::kScene);
  }
  std::ifstream in(echo);
  std::string line;
  int caption_lines = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    CHECK(j.at("params").at("temperature") == 0.2);
    CHECK(j.at("params").at("max_tokens") == 32);
    if (j.at("op") == "caption") {
      ++caption_lines;
      CHECK(j.at("params").at("instruction") == std::string(caption_instruction(CaptionTemplate::kScene)));
      CHECK(j.at("params").at("ctx").at("episode_id") == "ep1");
    }
  }
  CHECK(caption_lines == 1);
}
