// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "mvaug/episode.hpp"

namespace mvaug {

/// Buffered frame interval around one gripper-closure run. `end` is inclusive.
struct InteractionWindow {
  int start = 0;
  int end = 0;
  int close_idx = 0;
  std::optional<int> open_idx;

  int length() const { return end - start + 1; }
  bool operator==(const InteractionWindow&) const = default;
};

/// 1 = closed. Boolean traces pass through; continuous apertures below
/// close_threshold * max(aperture) count as closed. An all-zero continuous
/// trace is treated as closed throughout.
std::vector<std::uint8_t> binarize_gripper(const ActionTrace& trace, double close_threshold = 0.5);

/// One window per maximal run of closed frames. Windows are clamped to
/// [0, T-1] and never merged, even when the buffers make them overlap.
std::vector<InteractionWindow> interaction_windows(const std::vector<std::uint8_t>& closed,
                                                   int pre_buffer = 5, int post_buffer = 5);

/// Copies frames [window.start, window.end] of one view.
ViewStream extract_clip(const Episode& episode, const InteractionWindow& window, const ViewRole& role);

}  // namespace mvaug
