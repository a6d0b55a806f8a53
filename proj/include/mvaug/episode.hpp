// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvaug/types.hpp"

namespace mvaug {

enum class GripperKind { kBoolean, kContinuous };

/// Per-frame action signal: 6-DoF end-effector delta and a 1-D gripper state.
struct ActionTrace {
  std::vector<std::array<double, 6>> delta_pose;  // dx dy dz droll dpitch dyaw
  std::vector<double> gripper;
  GripperKind gripper_kind = GripperKind::kBoolean;

  std::size_t size() const { return gripper.size(); }
  bool operator==(const ActionTrace&) const = default;
};

struct Episode {
  std::string id;
  std::vector<ViewStream> views;  // canonical order
  ActionTrace actions;
  std::string instruction;
  double fps = 10.0;
  std::string source;

  int frame_count() const { return views.empty() ? 0 : views.front().frame_count(); }
  bool has_view(const ViewRole& role) const;
  const ViewStream& view(const ViewRole& role) const;  // throws LookupError
  bool operator==(const Episode&) const = default;
};

/// Sorts views into canonical order (wrist, then third-person by index).
void canonicalize_views(std::vector<ViewStream>& views);

/// Throws ValidationError naming the offending field or lengths.
void validate(const Episode& episode);

struct CurationDecision {
  enum class Action { kKeep, kDiscard, kCrop };
  Action action = Action::kKeep;
  std::optional<std::pair<int, int>> crop_range;  // [start, end)

  bool operator==(const CurationDecision&) const = default;
};

std::string to_string(CurationDecision::Action action);

/// Short episodes are discarded, long ones cropped to the prefix [0, max_frames).
CurationDecision curate_length(const Episode& episode, int min_frames = 25, int max_frames = 550);

/// Applies a keep/crop decision. Throws PreconditionError for a discard.
Episode apply_curation(const Episode& episode, const CurationDecision& decision);

// ---------------------------------------------------------------------------
// Persistence: lossless PNG frames + one JSON manifest per artifact.
// ---------------------------------------------------------------------------

/// Binary per-frame masks for one entity in one view.
struct EntityMaskVideo {
  enum class Entity { kRobot, kObject };
  Entity entity = Entity::kRobot;
  ViewRole view;
  MaskVideo masks;
  bool entity_absent = false;
  int anchor_index = -1;
  std::string label;
  std::vector<Point> prompt_points;

  bool operator==(const EntityMaskVideo&) const = default;
};

std::string to_string(EntityMaskVideo::Entity entity);

/// Masked frames: pixels outside keep_mask are (255, 255, 255).
struct ConditioningVideo {
  ViewRole view;
  Video frames;
  MaskVideo keep_mask;

  bool operator==(const ConditioningVideo&) const = default;
};

inline constexpr const char* kEpisodeManifest = "episode.json";
inline constexpr const char* kMaskManifest = "masks.json";
inline constexpr const char* kConditioningManifest = "conditioning.json";

/// Each returns the path of the manifest written under `dir`. Throws SaveError.
std::filesystem::path save_artifact(const Episode& episode, const std::filesystem::path& dir);
std::filesystem::path save_artifact(const EntityMaskVideo& masks, const std::filesystem::path& dir);
std::filesystem::path save_artifact(const ConditioningVideo& video, const std::filesystem::path& dir);

/// Loads and validates; throws LoadError or ValidationError.
Episode load_episode(const std::filesystem::path& manifest_path);
EntityMaskVideo load_mask_video(const std::filesystem::path& manifest_path);
ConditioningVideo load_conditioning_video(const std::filesystem::path& manifest_path);

}  // namespace mvaug
