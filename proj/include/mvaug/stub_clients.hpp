// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <mutex>
#include <set>

#include <nlohmann/json.hpp>

#include "mvaug/clients.hpp"

namespace mvaug {

/// Deterministic backend driven by a JSON fixture table. Every output is a
/// pure function of (inputs, fixtures); the only mutable state is a log of
/// caption instructions received, guarded by a mutex.
///
/// Fixture layout:
///   { "version": "...",
///     "episodes": { "<id>": {
///         "label": "carrot",
///         "fail": ["reason_object_name", "open_vocab_mask", ...],
///         "masks": [ {"query": "robot", "view": "*", "frame": -1, "rects": [[x,y,w,h], ...]} ],
///         "track_offset": [dx, dy],
///         "captions": {"scene": "...", "action": "...", "action_chunked": "..."},
///         "panoptic": [ {"view": "*", "frame": -1,
///                        "regions": [{"label": "cup", "score": 0.9, "rects": [[x,y,w,h]]}]} ] } },
///     "scores": { "iqa": {"<asset id>": 0.7}, "clip": {...}, "fail": ["<asset id>"] } }
///
/// Mask rectangles are in the coordinates of the frame passed to the call.
/// Entries with frame -1 or view "*" are wildcards; exact matches win.
class StubBackend final : public ObjectReasoner,
                          public OpenVocabSegmenter,
                          public VideoTracker,
                          public PanopticSegmenter,
                          public Captioner,
                          public FeatureMatcher,
                          public QualityScorer,
                          public AlignmentScorer {
 public:
  explicit StubBackend(nlohmann::json fixtures);
  static std::shared_ptr<StubBackend> from_file(const std::filesystem::path& path);

  BackendInfo info() const override;

  /// Instructions received by the captioner, in call order.
  std::vector<std::string> caption_log() const;

  /// Side length of the blocks hashed by the stub matcher.
  static constexpr int kMatchBlock = 8;
  /// Matches the stub can report for a frame of this size.
  static long max_matches(int height, int width);

 protected:
  std::string do_reason_object_name(const CallContext& ctx, const ViewStream& clip,
                                    std::string_view question) override;
  MaskResult do_open_vocab_mask(const CallContext& ctx, const Image& frame,
                                std::string_view query) override;
  TrackResult do_track_video(const CallContext& ctx, const ViewStream& frames,
                             const PointPrompt& prompts, int anchor_index,
                             const Mask* anchor_mask) override;
  PanopticResult do_panoptic_segment(const CallContext& ctx, const Image& frame) override;
  std::string do_caption(const CallContext& ctx, const Video& stitched,
                         std::string_view instruction) override;
  long do_match_features(const Image& a, const Image& b, double confidence_threshold) override;
  double do_iqa(std::string_view asset_id, const Image& image) override;
  double do_clip_similarity(std::string_view asset_id, const Image& image,
                            std::string_view text) override;

 private:
  const nlohmann::json* episode(const std::string& id) const;
  void maybe_fail(const CallContext& ctx, std::string_view op) const;

  nlohmann::json fixtures_;
  std::string version_;
  mutable std::mutex log_mutex_;
  std::vector<std::string> caption_log_;
};

}  // namespace mvaug
