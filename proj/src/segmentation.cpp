// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mvaug/hash.hpp"
#include "mvaug/imaging.hpp"
#include "mvaug/kernels.hpp"

namespace mvaug {

std::vector<int> uniform_sample_indices(int frame_count, int n_samples) {
  if (frame_count < 1) throw PreconditionError("cannot sample from an empty stream");
  if (n_samples < 1) throw ParameterError("need at least one anchor sample");
  std::vector<int> out;
  if (n_samples == 1) return {0};
  for (int i = 0; i < n_samples; ++i) {
    // Truncating, like an integer cast of linspace: T=100, n=5 gives 0 24 49 74 99.
    const int idx = static_cast<int>(static_cast<long>(i) * (frame_count - 1) / (n_samples - 1));
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

AnchorFrame select_anchor_frame(const CallContext& ctx, const ViewStream& view, std::string_view query,
                                OpenVocabSegmenter& segmenter, int n_samples) {
  int best_index = -1;
  std::size_t best_area = 0;
  Mask best_mask;
  for (int idx : uniform_sample_indices(view.frame_count(), n_samples)) {
    CallContext c = ctx;
    c.view = view.role;
    c.frame_index = idx;
    const Image small = resize_bilinear(view.frames[idx], kSegmentationHeight, kSegmentationWidth);
    MaskResult r = segmenter.open_vocab_mask(c, small, query);
    const std::size_t area = r.mask.area();
    if (area > best_area) {
      best_area = area;
      best_index = idx;
      best_mask = std::move(r.mask);
    }
  }
  if (best_index < 0) {
    throw AnchorNotFound("no sampled frame of " + view.role.str() + " contains '" + std::string(query) + "'");
  }
  return {best_index, resize_nearest(best_mask, view.height(), view.width())};
}

Mask refine_mask(const Mask& mask, int kernel) {
  if (kernel < 3 || kernel % 2 == 0) {
    throw ParameterError("median kernel must be odd and >= 3, got " + std::to_string(kernel));
  }
  Mask out(mask.height, mask.width);
  kernels::majority_filter(mask.bits, out.bits, mask.height, mask.width, kernel);
  return out;
}

namespace {

double dist2(double ax, double ay, double bx, double by) {
  return (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
}

}  // namespace

PointPrompt sample_prompt_points(const Mask& mask, int k, std::uint64_t seed) {
  if (k < 1) throw ParameterError("k must be positive");
  std::vector<Point> pix;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.get(y, x)) pix.push_back({x, y});
  if (pix.empty()) throw EmptyMaskError("cannot sample prompt points from an empty mask");

  const int n = static_cast<int>(pix.size());
  const int kk = std::min(k, n);

  // Farthest-point initialisation from a seeded first pick.
  std::mt19937_64 rng(seed);
  std::vector<std::pair<double, double>> centers;
  centers.reserve(kk);
  const int first = static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng));
  centers.emplace_back(pix[first].x, pix[first].y);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < kk) {
    const auto& c = centers.back();
    int far = 0;
    for (int i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], dist2(pix[i].x, pix[i].y, c.first, c.second));
      if (nearest[i] > nearest[far]) far = i;
    }
    centers.emplace_back(pix[far].x, pix[far].y);
  }

  // Lloyd iterations.
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = dist2(pix[i].x, pix[i].y, centers[0].first, centers[0].second);
      for (int c = 1; c < kk; ++c) {
        const double d = dist2(pix[i].x, pix[i].y, centers[c].first, centers[c].second);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sx(kk, 0), sy(kk, 0);
    std::vector<int> cnt(kk, 0);
    for (int i = 0; i < n; ++i) {
      sx[assign[i]] += pix[i].x;
      sy[assign[i]] += pix[i].y;
      ++cnt[assign[i]];
    }
    for (int c = 0; c < kk; ++c)
      if (cnt[c] > 0) centers[c] = {sx[c] / cnt[c], sy[c] / cnt[c]};
  }

  // Snap every centroid to its nearest true pixel (first in row-major order on ties).
  PointPrompt out;
  for (const auto& c : centers) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double d = dist2(pix[i].x, pix[i].y, c.first, c.second);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    if (std::find(out.points.begin(), out.points.end(), pix[best]) == out.points.end()) {
      out.points.push_back(pix[best]);
    }
  }
  return out;
}

namespace {

EntityMaskVideo segment_entity(const Episode& ep, const ViewStream& view, EntityMaskVideo::Entity entity,
                               const std::string& query, const ClientSet& clients,
                               const SegmentationConfig& cfg) {
  CallContext ctx{ep.id, view.role, 0};
  EntityMaskVideo out;
  out.entity = entity;
  out.view = view.role;
  out.label = query;

  AnchorFrame anchor = select_anchor_frame(ctx, view, query, *clients.segmenter, cfg.anchor_samples);
  Mask refined = refine_mask(anchor.mask, cfg.median_kernel);
  // A very small mask can be wiped out by the filter; fall back to the raw one.
  if (!refined.any()) refined = anchor.mask;

  const std::uint64_t seed =
      derive_seed(cfg.seed, ep.id + "/" + view.role.str() + "/" + to_string(entity));
  PointPrompt prompts = sample_prompt_points(refined, cfg.prompt_points, seed);
  ctx.frame_index = anchor.index;
  TrackResult tracked = clients.tracker->track_video(ctx, view, prompts, anchor.index, &refined);

  out.anchor_index = anchor.index;
  out.prompt_points = prompts.points;
  out.masks = std::move(tracked.masks);
  return out;
}

EntityMaskVideo absent_entity(const ViewStream& view, EntityMaskVideo::Entity entity, const std::string& label) {
  EntityMaskVideo out;
  out.entity = entity;
  out.view = view.role;
  out.label = label;
  out.entity_absent = true;
  out.masks.assign(view.frames.size(), Mask(view.height(), view.width()));
  return out;
}

}  // namespace

EpisodeSegmentation segment_episode(const Episode& episode, const ClientSet& clients,
                                    const SegmentationConfig& config) {
  if (!clients.reasoner || !clients.segmenter || !clients.tracker) {
    throw PreconditionError("segment_episode needs reasoner, segmenter and tracker clients");
  }
  EpisodeSegmentation result;

  // Object naming runs on the wrist view when there is one; otherwise the
  // first third-person view stands in.
  const ViewStream& label_view =
      episode.has_view(ViewRole::wrist()) ? episode.view(ViewRole::wrist()) : episode.views.front();
  result.label_source = label_view.role.is_wrist() ? LabelSource::kWrist : LabelSource::kThirdPerson;

  const auto closed = binarize_gripper(episode.actions, config.close_threshold);
  result.windows = interaction_windows(closed, config.pre_buffer, config.post_buffer);
  ViewStream clip;
  CallContext ctx{episode.id, label_view.role, 0};
  if (!result.windows.empty()) {
    clip = extract_clip(episode, result.windows.front(), label_view.role);
    ctx.frame_index = result.windows.front().start;
  } else {
    clip = label_view;
    result.full_clip_fallback = true;
  }
  result.label = clients.reasoner->reason_object_name(ctx, clip, config.question);

  for (const auto& view : episode.views) {
    ViewSegmentation vs;
    try {
      vs.robot = segment_entity(episode, view, EntityMaskVideo::Entity::kRobot, "robot", clients, config);
    } catch (const AnchorNotFound& e) {
      throw UnusableEpisode("episode '" + episode.id + "': " + e.what());
    }
    try {
      vs.object = segment_entity(episode, view, EntityMaskVideo::Entity::kObject, result.label, clients, config);
    } catch (const AnchorNotFound&) {
      vs.object = absent_entity(view, EntityMaskVideo::Entity::kObject, result.label);
    }
    result.views.emplace(view.role, std::move(vs));
  }
  return result;
}

MaskVideo merge_entities(const EntityMaskVideo& robot, const EntityMaskVideo& object) {
  // An absent entity may carry no masks at all.
  if (object.entity_absent && object.masks.empty()) return robot.masks;
  if (robot.entity_absent && robot.masks.empty()) return object.masks;
  if (robot.masks.size() != object.masks.size()) {
    throw PreconditionError("entity mask videos differ in length: " + std::to_string(robot.masks.size()) +
                            " vs " + std::to_string(object.masks.size()));
  }
  MaskVideo out;
  out.reserve(robot.masks.size());
  for (std::size_t t = 0; t < robot.masks.size(); ++t) {
    const Mask& r = robot.masks[t];
    const Mask& o = object.masks[t];
    if (r.height != o.height || r.width != o.width) {
      throw PreconditionError("entity mask shapes differ at frame " + std::to_string(t));
    }
    if (robot.entity_absent && object.entity_absent) {
      out.emplace_back(r.height, r.width);
    } else if (object.entity_absent) {
      out.push_back(r);
    } else if (robot.entity_absent) {
      out.push_back(o);
    } else {
      out.push_back(mask_or(r, o));
    }
  }
  return out;
}

ConditioningVideo build_conditioning_video(const ViewStream& view, const MaskVideo& keep_mask) {
  if (keep_mask.size() != view.frames.size()) {
    throw PreconditionError("keep mask has " + std::to_string(keep_mask.size()) + " frames, view has " +
                            std::to_string(view.frames.size()));
  }
  ConditioningVideo out{view.role, {}, keep_mask};
  out.frames.reserve(view.frames.size());
  for (std::size_t t = 0; t < view.frames.size(); ++t) {
    const Image& src = view.frames[t];
    const Mask& m = keep_mask[t];
    if (m.height != src.height || m.width != src.width) {
      throw PreconditionError("keep mask shape differs from frame " + std::to_string(t));
    }
    Image dst(src.height, src.width, 255);
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
      if (m.bits[i]) std::copy_n(&src.pixels[i * 3], 3, &dst.pixels[i * 3]);
    }
    out.frames.push_back(std::move(dst));
  }
  return out;
}

}  // namespace mvaug
