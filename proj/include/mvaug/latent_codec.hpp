// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Toy causal video codec with temporal compression 4. Latent frame 0 covers
// raw frame 0 alone; latent frame f >= 1 covers raw frames 4f-3 .. 4f (fewer
// at the tail). Each latent pixel summarises an s x s spatial block over its
// frame group as four numbers: the three colour means and the least-squares
// temporal slope of the block's grey level. A fixed orthogonal 4x4 mix maps
// those to the latent channels. Decoding inverts the mix and re-expands the
// block, so block means survive a round trip exactly (up to rounding).

#include <vector>

#include "mvaug/types.hpp"

namespace mvaug::codec {

inline constexpr int kTemporalFactor = 4;
inline constexpr int kChannels = 4;
inline constexpr int kDefaultSpatialFactor = 8;

/// F x C x h x w, row-major.
struct LatentVideo {
  int frames = 0;
  int channels = kChannels;
  int height = 0;
  int width = 0;
  std::vector<double> data;
  int source_frames = 0;   // T, needed to decode; 0 means unknown
  int spatial_factor = 0;  // s, needed to decode; 0 means unknown

  LatentVideo() = default;
  LatentVideo(int f, int c, int h, int w)
      : frames(f), channels(c), height(h), width(w), data(static_cast<std::size_t>(f) * c * h * w, 0.0) {}

  std::size_t frame_size() const { return static_cast<std::size_t>(channels) * height * width; }
  double& at(int f, int c, int y, int x) {
    return data[((static_cast<std::size_t>(f) * channels + c) * height + y) * width + x];
  }
  double at(int f, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(f) * channels + c) * height + y) * width + x];
  }
  bool operator==(const LatentVideo&) const = default;
};

/// Real-valued video on the 8-bit scale, T x H x W x 3.
struct RealVideo {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  double at(int t, int y, int x, int c) const {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  /// Rounds and clamps to 8-bit frames.
  Video to_frames() const;
};

/// 1 + ceil((T - 1) / 4).
int latent_frame_count(int raw_frames);

/// Raw frame range [first, last] covered by latent frame f.
std::pair<int, int> frame_group(int latent_frame, int raw_frames);

/// Throws PreconditionError if H or W is not divisible by s.
LatentVideo encode(const Video& video, int spatial_factor = kDefaultSpatialFactor);

/// Throws PreconditionError when (T, s) metadata is missing.
RealVideo decode(const LatentVideo& latent);

}  // namespace mvaug::codec
