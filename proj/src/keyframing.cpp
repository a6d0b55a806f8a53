// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/keyframing.hpp"

#include <algorithm>

namespace mvaug {

std::vector<std::uint8_t> binarize_gripper(const ActionTrace& trace, double close_threshold) {
  std::vector<std::uint8_t> closed(trace.gripper.size(), 0);
  if (trace.gripper_kind == GripperKind::kBoolean) {
    std::transform(trace.gripper.begin(), trace.gripper.end(), closed.begin(),
                   [](double g) -> std::uint8_t { return g != 0.0 ? 1 : 0; });
    return closed;
  }
  const double max_aperture =
      trace.gripper.empty() ? 0.0 : *std::max_element(trace.gripper.begin(), trace.gripper.end());
  if (max_aperture <= 0.0) {
    std::fill(closed.begin(), closed.end(), 1);
    return closed;
  }
  const double cutoff = close_threshold * max_aperture;
  std::transform(trace.gripper.begin(), trace.gripper.end(), closed.begin(),
                 [cutoff](double g) -> std::uint8_t { return g < cutoff ? 1 : 0; });
  return closed;
}

std::vector<InteractionWindow> interaction_windows(const std::vector<std::uint8_t>& closed,
                                                   int pre_buffer, int post_buffer) {
  std::vector<InteractionWindow> out;
  const int t = static_cast<int>(closed.size());
  int i = 0;
  while (i < t) {
    if (!closed[i]) {
      ++i;
      continue;
    }
    const int run_start = i;
    while (i < t && closed[i]) ++i;
    InteractionWindow w;
    w.close_idx = run_start;
    w.start = std::max(run_start - pre_buffer, 0);
    if (i < t) {
      w.open_idx = i;
      w.end = std::min(i + post_buffer, t - 1);
    } else {
      w.end = t - 1;
    }
    out.push_back(w);
  }
  return out;
}

ViewStream extract_clip(const Episode& episode, const InteractionWindow& window, const ViewRole& role) {
  const ViewStream& view = episode.view(role);
  const int t = view.frame_count();
  if (window.start < 0 || window.start > window.end || window.end >= t) {
    throw PreconditionError("window [" + std::to_string(window.start) + ", " +
                            std::to_string(window.end) + "] invalid for " + std::to_string(t) +
                            " frames");
  }
  ViewStream clip{view.role, {}};
  clip.frames.assign(view.frames.begin() + window.start, view.frames.begin() + window.end + 1);
  return clip;
}

}  // namespace mvaug
