// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/clients.hpp"

#include <algorithm>
#include <unordered_set>

namespace mvaug {

std::string_view caption_instruction(CaptionTemplate t) {
  switch (t) {
    case CaptionTemplate::kScene:
      return "Describe the scene setup in the video (exclude the robot arm) within 15 words. "
             "The input is a vertically stitched multi-view video. "
             "Only provide information with high confidence.";
    case CaptionTemplate::kAction:
      return "Describe the action of the robot arm briefly in the video within 15 words. "
             "The input is a vertically stitched multi-view video. "
             "Only provide information with high confidence.";
    case CaptionTemplate::kActionChunked:
      return "Describe the action of the robot arm briefly in the video within 10 words. "
             "Do not predict what will happen. Just focus on what has been done. "
             "The input is a vertically stitched multi-view video. "
             "Only provide information with high confidence.";
  }
  return {};
}

std::string to_string(CaptionTemplate t) {
  switch (t) {
    case CaptionTemplate::kScene: return "scene";
    case CaptionTemplate::kAction: return "action";
    case CaptionTemplate::kActionChunked: return "action_chunked";
  }
  return "?";
}

std::string compose_prompt(std::string_view scene, std::string_view action) {
  std::string out(scene);
  out += ' ';
  out += action;
  return out;
}

const std::vector<std::string>& panoptic_vocabulary() {
  static const std::vector<std::string> kVocab = {
      // things
      "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat",
      "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog",
      "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella",
      "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
      "baseball bat", "baseball glove", "skateboard", "surfboard", "tennis racket", "bottle",
      "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich",
      "orange", "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch",
      "potted plant", "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote",
      "keyboard", "cell phone", "microwave", "oven", "toaster", "sink", "refrigerator", "book",
      "clock", "vase", "scissors", "teddy bear", "hair drier", "toothbrush",
      // stuff
      "banner", "blanket", "bridge", "cardboard", "counter", "curtain", "door-stuff",
      "floor-wood", "flower", "fruit", "gravel", "house", "light", "mirror-stuff", "net",
      "pillow", "platform", "playingfield", "railroad", "river", "road", "roof", "sand", "sea",
      "shelf", "snow", "stairs", "tent", "towel", "wall-brick", "wall-stone", "wall-tile",
      "wall-wood", "water-other", "window-blind", "window-other", "tree-merged", "fence-merged",
      "ceiling-merged", "sky-other-merged", "cabinet-merged", "table-merged",
      "floor-other-merged", "pavement-merged", "mountain-merged", "grass-merged", "dirt-merged",
      "paper-merged", "food-other-merged", "building-other-merged", "rock-merged",
      "wall-other-merged", "rug-merged"};
  return kVocab;
}

bool in_panoptic_vocabulary(std::string_view label) {
  static const std::unordered_set<std::string_view> kSet = [] {
    std::unordered_set<std::string_view> s;
    for (const auto& v : panoptic_vocabulary()) s.insert(v);
    return s;
  }();
  return kSet.count(label) > 0;
}

// --- NVI entry points -------------------------------------------------------

std::string ObjectReasoner::reason_object_name(const CallContext& ctx, const ViewStream& clip,
                                               std::string_view question) {
  if (clip.frames.empty()) throw PreconditionError("reason_object_name: empty clip");
  std::string label = do_reason_object_name(ctx, clip, question);
  if (label.empty()) throw ClientError(ctx.episode_id, "reasoner returned an empty label");
  return label;
}

MaskResult OpenVocabSegmenter::open_vocab_mask(const CallContext& ctx, const Image& frame,
                                               std::string_view query) {
  if (query.empty()) throw PreconditionError("open_vocab_mask: empty query");
  MaskResult r = do_open_vocab_mask(ctx, frame, query);
  if (r.mask.height != frame.height || r.mask.width != frame.width) {
    throw ClientError(ctx.episode_id, "segmenter returned a mask of the wrong shape");
  }
  return r;
}

TrackResult VideoTracker::track_video(const CallContext& ctx, const ViewStream& frames,
                                      const PointPrompt& prompts, int anchor_index,
                                      const Mask* anchor_mask) {
  if (anchor_index < 0 || anchor_index >= frames.frame_count()) {
    throw PreconditionError("track_video: anchor index " + std::to_string(anchor_index) +
                            " outside [0, " + std::to_string(frames.frame_count()) + ")");
  }
  if (prompts.points.empty()) throw PreconditionError("track_video: no prompt points");
  for (const auto& p : prompts.points) {
    if (p.x < 0 || p.y < 0 || p.x >= frames.width() || p.y >= frames.height()) {
      throw PreconditionError("track_video: prompt (" + std::to_string(p.x) + ", " +
                              std::to_string(p.y) + ") outside the frame");
    }
  }
  if (anchor_mask && (anchor_mask->height != frames.height() || anchor_mask->width != frames.width())) {
    throw PreconditionError("track_video: anchor mask shape differs from frames");
  }
  TrackResult r = do_track_video(ctx, frames, prompts, anchor_index, anchor_mask);
  if (static_cast<int>(r.masks.size()) != frames.frame_count()) {
    throw ClientError(ctx.episode_id, "tracker returned the wrong number of masks");
  }
  return r;
}

PanopticResult PanopticSegmenter::panoptic_segment(const CallContext& ctx, const Image& frame) {
  PanopticResult r = do_panoptic_segment(ctx, frame);
  for (const auto& reg : r.regions) {
    if (reg.mask.height != frame.height || reg.mask.width != frame.width) {
      throw ClientError(ctx.episode_id, "panoptic mask shape differs from frame");
    }
    if (!in_panoptic_vocabulary(reg.label)) {
      throw ClientError(ctx.episode_id, "panoptic label '" + reg.label + "' outside the vocabulary");
    }
  }
  return r;
}

std::string Captioner::caption_episode(const CallContext& ctx, const Video& stitched,
                                       CaptionTemplate t) {
  return do_caption(ctx, stitched, caption_instruction(t));
}

long FeatureMatcher::match_features(const Image& a, const Image& b, double confidence_threshold) {
  const long n = do_match_features(a, b, confidence_threshold);
  if (n < 0) throw ClientError("", "matcher returned a negative count");
  return n;
}

double QualityScorer::iqa(std::string_view asset_id, const Image& image) {
  return do_iqa(asset_id, image);
}

double AlignmentScorer::clip_similarity(std::string_view asset_id, const Image& image,
                                        std::string_view text) {
  return do_clip_similarity(asset_id, image, text);
}

}  // namespace mvaug
