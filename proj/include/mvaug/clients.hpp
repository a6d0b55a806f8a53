// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Contracts for the off-the-shelf models the pipeline orchestrates. Each
// capability is an abstract class with a non-virtual public entry point that
// checks preconditions and postconditions, and a protected virtual hook that
// backends implement. Two backends ship: StubBackend (deterministic fixtures,
// stub_clients.hpp) and RemoteBackend (subprocess protocol, remote_clients.hpp).

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mvaug/episode.hpp"

namespace mvaug {

/// Provenance attached to every client output.
struct BackendInfo {
  std::string backend;
  std::string version;
  bool operator==(const BackendInfo&) const = default;
};

/// Which episode/view/frame a call concerns. Stubs key their fixtures on it;
/// remote backends receive it as request params.
struct CallContext {
  std::string episode_id;
  ViewRole view;
  int frame_index = 0;
};

struct MaskResult {
  Mask mask;
  bool warning = false;  // backend had nothing for this query
  BackendInfo provenance;
};

struct PanopticRegion {
  std::string label;
  Mask mask;
  double score = 0.0;
};

struct PanopticResult {
  std::vector<PanopticRegion> regions;
  BackendInfo provenance;
};

/// Positive point prompts for the video tracker.
struct PointPrompt {
  std::vector<Point> points;
};

struct TrackResult {
  MaskVideo masks;
  BackendInfo provenance;
};

enum class CaptionTemplate { kScene, kAction, kActionChunked };

/// Exact instruction text sent to the captioning backend.
std::string_view caption_instruction(CaptionTemplate t);
std::string to_string(CaptionTemplate t);
/// Final text prompt: scene caption, a space, action caption.
std::string compose_prompt(std::string_view scene, std::string_view action);

/// Default question for naming the grasped object from a gripper-closure clip.
inline constexpr std::string_view kObjectQuestion =
    "Which object is the robot gripper grasping or interacting with in this video? "
    "Answer with a short noun phrase only.";

/// The 133-class panoptic label set (80 thing + 53 stuff classes).
const std::vector<std::string>& panoptic_vocabulary();
bool in_panoptic_vocabulary(std::string_view label);

/// Segmentation backends expect frames at this size.
inline constexpr int kSegmentationHeight = 320;
inline constexpr int kSegmentationWidth = 448;

class Client {
 public:
  virtual ~Client() = default;
  virtual BackendInfo info() const = 0;
};

class ObjectReasoner : public virtual Client {
 public:
  /// Names the interacted object in `clip`. Throws ClientError.
  std::string reason_object_name(const CallContext& ctx, const ViewStream& clip,
                                 std::string_view question);

 protected:
  virtual std::string do_reason_object_name(const CallContext& ctx, const ViewStream& clip,
                                            std::string_view question) = 0;
};

class OpenVocabSegmenter : public virtual Client {
 public:
  MaskResult open_vocab_mask(const CallContext& ctx, const Image& frame, std::string_view query);

 protected:
  virtual MaskResult do_open_vocab_mask(const CallContext& ctx, const Image& frame,
                                        std::string_view query) = 0;
};

class VideoTracker : public virtual Client {
 public:
  /// Propagates a segmentation from `anchor_index` to every frame. The anchor
  /// mask, when given, is passed alongside the point prompts.
  TrackResult track_video(const CallContext& ctx, const ViewStream& frames,
                          const PointPrompt& prompts, int anchor_index, const Mask* anchor_mask);

 protected:
  virtual TrackResult do_track_video(const CallContext& ctx, const ViewStream& frames,
                                     const PointPrompt& prompts, int anchor_index,
                                     const Mask* anchor_mask) = 0;
};

class PanopticSegmenter : public virtual Client {
 public:
  PanopticResult panoptic_segment(const CallContext& ctx, const Image& frame);

 protected:
  virtual PanopticResult do_panoptic_segment(const CallContext& ctx, const Image& frame) = 0;
};

class Captioner : public virtual Client {
 public:
  std::string caption_episode(const CallContext& ctx, const Video& stitched, CaptionTemplate t);

 protected:
  /// `instruction` is the exact text of caption_instruction(t).
  virtual std::string do_caption(const CallContext& ctx, const Video& stitched,
                                 std::string_view instruction) = 0;
};

class FeatureMatcher : public virtual Client {
 public:
  /// Number of matched point pairs between two views.
  long match_features(const Image& a, const Image& b, double confidence_threshold);

 protected:
  virtual long do_match_features(const Image& a, const Image& b, double confidence_threshold) = 0;
};

/// No-reference image quality, higher is better.
class QualityScorer : public virtual Client {
 public:
  double iqa(std::string_view asset_id, const Image& image);

 protected:
  virtual double do_iqa(std::string_view asset_id, const Image& image) = 0;
};

/// Text-image alignment, higher is better.
class AlignmentScorer : public virtual Client {
 public:
  double clip_similarity(std::string_view asset_id, const Image& image, std::string_view text);

 protected:
  virtual double do_clip_similarity(std::string_view asset_id, const Image& image,
                                    std::string_view text) = 0;
};

/// The full set of clients a pipeline run uses.
struct ClientSet {
  std::shared_ptr<ObjectReasoner> reasoner;
  std::shared_ptr<OpenVocabSegmenter> segmenter;
  std::shared_ptr<VideoTracker> tracker;
  std::shared_ptr<PanopticSegmenter> panoptic;
  std::shared_ptr<Captioner> captioner;
  std::shared_ptr<FeatureMatcher> matcher;
  std::shared_ptr<QualityScorer> iqa;
  std::shared_ptr<AlignmentScorer> clip;

  /// Points every slot at one backend implementing all capabilities.
  template <typename Backend>
  static ClientSet from(std::shared_ptr<Backend> b) {
    return {b, b, b, b, b, b, b, b};
  }
};

}  // namespace mvaug
