// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/stub_clients.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "mvaug/hash.hpp"
#include "mvaug/imaging.hpp"

namespace mvaug {

using nlohmann::json;

namespace {

bool view_matches(const json& entry, const ViewRole& view, bool& exact) {
  const std::string v = entry.value("view", std::string("*"));
  exact = v != "*";
  return !exact || v == view.str();
}

bool frame_matches(const json& entry, int frame, bool& exact) {
  const int f = entry.value("frame", -1);
  exact = f >= 0;
  return !exact || f == frame;
}

// Most specific entry of `list` matching (view, frame) and the predicate.
template <typename Pred>
const json* best_entry(const json& list, const CallContext& ctx, Pred pred) {
  const json* best = nullptr;
  int best_score = -1;
  for (const auto& e : list) {
    if (!pred(e)) continue;
    bool view_exact = false, frame_exact = false;
    if (!view_matches(e, ctx.view, view_exact) || !frame_matches(e, ctx.frame_index, frame_exact)) continue;
    const int score = (frame_exact ? 2 : 0) + (view_exact ? 1 : 0);
    if (score > best_score) {
      best = &e;
      best_score = score;
    }
  }
  return best;
}

Mask rasterize(const json& rects, int h, int w) {
  Mask m(h, w);
  for (const auto& r : rects) fill_rect(m, r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>());
  return m;
}

double unit_from_hash(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::string_view bytes_of(const Image& img) {
  return {reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size()};
}

std::unordered_map<std::uint64_t, long> block_hashes(const Image& img) {
  constexpr int s = StubBackend::kMatchBlock;
  std::unordered_map<std::uint64_t, long> counts;
  std::string block(static_cast<std::size_t>(s) * s * 3, '\0');
  for (int by = 0; by + s <= img.height; by += s) {
    for (int bx = 0; bx + s <= img.width; bx += s) {
      for (int y = 0; y < s; ++y) {
        std::copy_n(img.at(by + y, bx), s * 3, block.begin() + static_cast<std::ptrdiff_t>(y) * s * 3);
      }
      ++counts[fnv1a64(block)];
    }
  }
  return counts;
}

}  // namespace

StubBackend::StubBackend(json fixtures)
    : fixtures_(std::move(fixtures)), version_(fixtures_.value("version", std::string("fixtures-1"))) {}

std::shared_ptr<StubBackend> StubBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open stub fixtures '" + path.string() + "'");
  try {
    return std::make_shared<StubBackend>(json::parse(in));
  } catch (const json::exception& e) {
    throw LoadError("malformed stub fixtures '" + path.string() + "': " + e.what());
  }
}

BackendInfo StubBackend::info() const { return {"stub", version_}; }

std::vector<std::string> StubBackend::caption_log() const {
  std::lock_guard lock(log_mutex_);
  return caption_log_;
}

long StubBackend::max_matches(int height, int width) {
  return static_cast<long>(height / kMatchBlock) * (width / kMatchBlock);
}

const json* StubBackend::episode(const std::string& id) const {
  if (!fixtures_.contains("episodes")) return nullptr;
  const auto& eps = fixtures_.at("episodes");
  auto it = eps.find(id);
  return it == eps.end() ? nullptr : &*it;
}

void StubBackend::maybe_fail(const CallContext& ctx, std::string_view op) const {
  const json* ep = episode(ctx.episode_id);
  if (!ep || !ep->contains("fail")) return;
  for (const auto& f : ep->at("fail")) {
    if (f.get<std::string>() == op) {
      throw ClientError(ctx.episode_id, "stub backend configured to fail " + std::string(op));
    }
  }
}

std::string StubBackend::do_reason_object_name(const CallContext& ctx, const ViewStream&,
                                               std::string_view) {
  maybe_fail(ctx, "reason_object_name");
  const json* ep = episode(ctx.episode_id);
  if (!ep || !ep->contains("label")) {
    throw ClientError(ctx.episode_id, "no label fixture for episode");
  }
  return ep->at("label").get<std::string>();
}

MaskResult StubBackend::do_open_vocab_mask(const CallContext& ctx, const Image& frame,
                                           std::string_view query) {
  maybe_fail(ctx, "open_vocab_mask");
  MaskResult r{Mask(frame.height, frame.width), true, info()};
  const json* ep = episode(ctx.episode_id);
  if (!ep || !ep->contains("masks")) return r;
  const json* e = best_entry(ep->at("masks"), ctx, [&](const json& m) {
    return m.value("query", std::string()) == query;
  });
  if (!e) return r;
  r.mask = rasterize(e->value("rects", json::array()), frame.height, frame.width);
  r.warning = false;
  return r;
}

TrackResult StubBackend::do_track_video(const CallContext& ctx, const ViewStream& frames,
                                        const PointPrompt& prompts, int anchor_index,
                                        const Mask* anchor_mask) {
  maybe_fail(ctx, "track_video");
  Mask anchor;
  if (anchor_mask) {
    anchor = *anchor_mask;
  } else {
    anchor = Mask(frames.height(), frames.width());
    for (const auto& p : prompts.points) fill_rect(anchor, p.x - 1, p.y - 1, 3, 3);
  }
  int dx = 0, dy = 0;
  if (const json* ep = episode(ctx.episode_id); ep && ep->contains("track_offset")) {
    dx = ep->at("track_offset").at(0).get<int>();
    dy = ep->at("track_offset").at(1).get<int>();
  }
  TrackResult r;
  r.provenance = info();
  r.masks.reserve(frames.frames.size());
  for (int t = 0; t < frames.frame_count(); ++t) {
    const int k = t - anchor_index;
    r.masks.push_back(translate(anchor, k * dx, k * dy));
  }
  return r;
}

PanopticResult StubBackend::do_panoptic_segment(const CallContext& ctx, const Image& frame) {
  maybe_fail(ctx, "panoptic_segment");
  PanopticResult r;
  r.provenance = info();
  const json* ep = episode(ctx.episode_id);
  if (!ep || !ep->contains("panoptic")) return r;
  const json* e = best_entry(ep->at("panoptic"), ctx, [](const json&) { return true; });
  if (!e) return r;
  for (const auto& reg : e->value("regions", json::array())) {
    r.regions.push_back({reg.at("label").get<std::string>(),
                         rasterize(reg.value("rects", json::array()), frame.height, frame.width),
                         reg.value("score", 1.0)});
  }
  return r;
}

std::string StubBackend::do_caption(const CallContext& ctx, const Video&, std::string_view instruction) {
  {
    std::lock_guard lock(log_mutex_);
    caption_log_.emplace_back(instruction);
  }
  maybe_fail(ctx, "caption");
  std::string key;
  for (auto t : {CaptionTemplate::kScene, CaptionTemplate::kAction, CaptionTemplate::kActionChunked}) {
    if (caption_instruction(t) == instruction) key = to_string(t);
  }
  const json* ep = episode(ctx.episode_id);
  if (key.empty() || !ep || !ep->contains("captions") || !ep->at("captions").contains(key)) {
    throw ClientError(ctx.episode_id, "no caption fixture for template '" + key + "'");
  }
  return ep->at("captions").at(key).get<std::string>();
}

long StubBackend::do_match_features(const Image& a, const Image& b, double) {
  const auto ha = block_hashes(a);
  const auto hb = block_hashes(b);
  long count = 0;
  for (const auto& [h, n] : ha) {
    auto it = hb.find(h);
    if (it != hb.end()) count += std::min(n, it->second);
  }
  return count;
}

namespace {

std::optional<double> score_fixture(const json& fixtures, const char* table, std::string_view id) {
  if (!fixtures.contains("scores")) return std::nullopt;
  const auto& scores = fixtures.at("scores");
  if (scores.contains("fail")) {
    for (const auto& f : scores.at("fail")) {
      if (f.get<std::string>() == id) throw ClientError("", "scorer configured to fail asset " + std::string(id));
    }
  }
  if (scores.contains(table)) {
    const auto& t = scores.at(table);
    auto it = t.find(std::string(id));
    if (it != t.end()) return it->get<double>();
  }
  return std::nullopt;
}

}  // namespace

double StubBackend::do_iqa(std::string_view asset_id, const Image& image) {
  if (auto v = score_fixture(fixtures_, "iqa", asset_id)) return *v;
  return unit_from_hash(fnv1a64(bytes_of(image), 0x1a2b3c4d5e6f7081ULL));
}

double StubBackend::do_clip_similarity(std::string_view asset_id, const Image& image,
                                       std::string_view text) {
  if (auto v = score_fixture(fixtures_, "clip", asset_id)) return *v;
  return unit_from_hash(fnv1a64(text, fnv1a64(bytes_of(image))));
}

}  // namespace mvaug
