// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Adapter for model servers running as a child process. One JSON object per
// line in each direction over the child's stdin/stdout:
//
//   request:  {"id": N, "op": "<name>", "payload_paths": ["..."], "params": {...},
//              "result_dir": "..."}
//   response: {"id": N, "status": "ok", "result_path": "..."}
//             {"id": N, "status": "error", "error": "..."}
//
// Images travel as PNG files under a per-adapter work directory; results come
// back as a file written under result_dir (JSON for structured results, 1-bit
// PNG for single masks).
// Requests are serialised per subprocess.
//
// Ops and result schemas:
//   info                -> {"backend", "version"}
//   reason_object_name  payload: clip frames     params: question, ctx      -> {"label"}
//   open_vocab_mask     payload: [frame]         params: query, ctx         -> mask PNG
//   track_video         payload: frames [+mask]  params: points, anchor_index, has_mask, ctx
//                                                                           -> {"masks": [png...]}
//   panoptic_segment    payload: [frame]         params: ctx                -> {"regions": [{label, score, mask}]}
//   caption             payload: stitched frames params: instruction, ctx   -> {"text"}
//   match_features      payload: [a, b]          params: confidence_threshold -> {"count"}
//   iqa                 payload: [image]         params: asset_id           -> {"score"}
//   clip_similarity     payload: [image]         params: asset_id, text     -> {"score"}
//
// Model decoding parameters (temperature etc.) are forwarded untouched from
// the `passthrough` object given at construction.

#include <filesystem>
#include <mutex>

#include <nlohmann/json.hpp>

#include "mvaug/clients.hpp"

namespace mvaug {

class RemoteBackend final : public ObjectReasoner,
                            public OpenVocabSegmenter,
                            public VideoTracker,
                            public PanopticSegmenter,
                            public Captioner,
                            public FeatureMatcher,
                            public QualityScorer,
                            public AlignmentScorer {
 public:
  RemoteBackend(std::vector<std::string> argv, std::filesystem::path work_dir,
                nlohmann::json passthrough = nlohmann::json::object());
  ~RemoteBackend() override;
  RemoteBackend(const RemoteBackend&) = delete;
  RemoteBackend& operator=(const RemoteBackend&) = delete;

  BackendInfo info() const override;

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
  struct Call {
    std::filesystem::path dir;
    std::vector<std::string> payload;
  };
  Call new_call();
  std::string add_image(Call& call, const Image& img);
  /// Sends a request and returns the result path. Throws ClientError.
  std::filesystem::path request(const std::string& episode_id, const std::string& op, Call& call,
                                nlohmann::json params);
  nlohmann::json request_json(const std::string& episode_id, const std::string& op, Call& call,
                              nlohmann::json params);

  std::filesystem::path work_dir_;
  nlohmann::json passthrough_;
  int pid_ = -1;
  int to_child_ = -1;
  void* from_child_ = nullptr;  // FILE*
  long next_id_ = 0;
  BackendInfo info_;
  mutable std::mutex mutex_;
};

}  // namespace mvaug
