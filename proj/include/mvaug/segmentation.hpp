// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mvaug/clients.hpp"
#include "mvaug/keyframing.hpp"

namespace mvaug {

struct AnchorFrame {
  int index = 0;
  Mask mask;  // native resolution
};

class AnchorNotFound : public Error { using Error::Error; };
class EmptyMaskError : public Error { using Error::Error; };
/// Robot segmentation failed; the episode cannot be augmented.
class UnusableEpisode : public Error { using Error::Error; };

/// floor(i * (T-1) / (n-1)) for i in [0, n), deduplicated.
std::vector<int> uniform_sample_indices(int frame_count, int n_samples);

/// Queries `segmenter` on uniformly spaced frames resized to the segmentation
/// resolution and keeps the one with the largest mask (smallest index on
/// ties). The mask is nearest-neighbour resampled back to native size.
AnchorFrame select_anchor_frame(const CallContext& ctx, const ViewStream& view, std::string_view query,
                                OpenVocabSegmenter& segmenter, int n_samples = 5);

/// Binary median filter; `kernel` must be odd and >= 3.
Mask refine_mask(const Mask& mask, int kernel = 5);

/// k-means over true-pixel coordinates, centroids snapped to the nearest true
/// pixel. Returns at most k distinct points, all inside the mask.
PointPrompt sample_prompt_points(const Mask& mask, int k, std::uint64_t seed);

struct SegmentationConfig {
  double close_threshold = 0.5;
  int pre_buffer = 5;
  int post_buffer = 5;
  int anchor_samples = 5;
  int median_kernel = 5;
  int prompt_points = 5;
  std::uint64_t seed = 0;
  std::string question{kObjectQuestion};
};

enum class LabelSource { kWrist, kThirdPerson };

struct ViewSegmentation {
  EntityMaskVideo robot;
  EntityMaskVideo object;
};

struct EpisodeSegmentation {
  std::string label;
  LabelSource label_source = LabelSource::kWrist;
  bool full_clip_fallback = false;  // no closure run; the whole video was queried
  std::vector<InteractionWindow> windows;
  std::map<ViewRole, ViewSegmentation> views;
};

/// Runs action-guided segmentation for every view. Throws UnusableEpisode when
/// the robot cannot be found in some view; a missing object marks that
/// entity absent instead.
EpisodeSegmentation segment_episode(const Episode& episode, const ClientSet& clients,
                                    const SegmentationConfig& config = {});

/// Per-pixel OR of the two entity masks; absent entities contribute nothing.
MaskVideo merge_entities(const EntityMaskVideo& robot, const EntityMaskVideo& object);

/// Keeps pixels under keep_mask and paints everything else (255, 255, 255).
ConditioningVideo build_conditioning_video(const ViewStream& view, const MaskVideo& keep_mask);

}  // namespace mvaug
