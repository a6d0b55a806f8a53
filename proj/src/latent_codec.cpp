// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/latent_codec.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mvaug/kernels.hpp"

namespace mvaug::codec {

namespace {

// Symmetric orthogonal mix (scaled Hadamard); it is its own inverse.
constexpr std::array<std::array<double, 4>, 4> kMix = {{{0.5, 0.5, 0.5, 0.5},
                                                        {0.5, -0.5, 0.5, -0.5},
                                                        {0.5, 0.5, -0.5, -0.5},
                                                        {0.5, -0.5, -0.5, 0.5}}};

std::array<double, 4> mix(const std::array<double, 4>& v) {
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out[i] += kMix[i][j] * v[j];
  return out;
}

// Centred frame position within a group of g frames.
double slope_weight(int j, int g) { return j - (g - 1) / 2.0; }

double slope_norm(int g) {
  double s = 0.0;
  for (int j = 0; j < g; ++j) s += slope_weight(j, g) * slope_weight(j, g);
  return s;
}

}  // namespace

Video RealVideo::to_frames() const {
  Video out;
  out.reserve(frames);
  for (int t = 0; t < frames; ++t) {
    Image img(height, width);
    const double* src = data.data() + static_cast<std::size_t>(t) * height * width * 3;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(src[i]), 0L, 255L));
    }
    out.push_back(std::move(img));
  }
  return out;
}

int latent_frame_count(int raw_frames) {
  if (raw_frames < 1) throw PreconditionError("video must have at least one frame");
  return 1 + (raw_frames - 1 + kTemporalFactor - 1) / kTemporalFactor;
}

std::pair<int, int> frame_group(int latent_frame, int raw_frames) {
  if (latent_frame == 0) return {0, 0};
  const int first = kTemporalFactor * (latent_frame - 1) + 1;
  return {first, std::min(first + kTemporalFactor - 1, raw_frames - 1)};
}

LatentVideo encode(const Video& video, int s) {
  if (video.empty()) throw PreconditionError("cannot encode an empty video");
  if (s < 1) throw ParameterError("spatial factor must be positive");
  const int t_raw = static_cast<int>(video.size());
  const int h = video.front().height, w = video.front().width;
  if (h % s != 0 || w % s != 0) {
    throw PreconditionError("frame size " + std::to_string(h) + "x" + std::to_string(w) +
                            " not divisible by spatial factor " + std::to_string(s));
  }
  for (const auto& f : video) {
    if (f.height != h || f.width != w) throw PreconditionError("frame sizes differ within the video");
  }
  const int lh = h / s, lw = w / s;
  const int nf = latent_frame_count(t_raw);
  LatentVideo out(nf, kChannels, lh, lw);
  out.source_frames = t_raw;
  out.spatial_factor = s;

  const double inv_area = 1.0 / (static_cast<double>(s) * s);
  std::vector<double> sums(static_cast<std::size_t>(lh) * lw * 3);
  for (int f = 0; f < nf; ++f) {
    const auto [first, last] = frame_group(f, t_raw);
    const int g = last - first + 1;
    // Per frame of the group: normalised block colour means.
    std::vector<std::vector<double>> means(g);
    for (int j = 0; j < g; ++j) {
      std::fill(sums.begin(), sums.end(), 0.0);
      kernels::block_sum_rgb(video[first + j].pixels, sums, h, w, s);
      means[j].resize(sums.size());
      for (std::size_t i = 0; i < sums.size(); ++i) means[j][i] = sums[i] * inv_area / 127.5 - 1.0;
    }
    const double norm = slope_norm(g);
    for (int y = 0; y < lh; ++y) {
      for (int x = 0; x < lw; ++x) {
        const std::size_t b = (static_cast<std::size_t>(y) * lw + x) * 3;
        std::array<double, 4> z{};
        double slope = 0.0;
        for (int j = 0; j < g; ++j) {
          for (int c = 0; c < 3; ++c) z[c] += means[j][b + c];
          slope += slope_weight(j, g) * (means[j][b] + means[j][b + 1] + means[j][b + 2]) / 3.0;
        }
        for (int c = 0; c < 3; ++c) z[c] /= g;
        z[3] = norm > 0 ? slope / norm : 0.0;
        const auto lat = mix(z);
        for (int c = 0; c < kChannels; ++c) out.at(f, c, y, x) = lat[c];
      }
    }
  }
  return out;
}

RealVideo decode(const LatentVideo& latent) {
  if (latent.source_frames < 1 || latent.spatial_factor < 1) {
    throw PreconditionError("latent lacks (T, s) metadata needed to decode");
  }
  if (latent.channels != kChannels) throw PreconditionError("latent must have 4 channels");
  const int t_raw = latent.source_frames, s = latent.spatial_factor;
  if (latent_frame_count(t_raw) != latent.frames) {
    throw PreconditionError("latent frame count does not match recorded T");
  }
  RealVideo out;
  out.frames = t_raw;
  out.height = latent.height * s;
  out.width = latent.width * s;
  out.data.assign(static_cast<std::size_t>(t_raw) * out.height * out.width * 3, 0.0);
  for (int f = 0; f < latent.frames; ++f) {
    const auto [first, last] = frame_group(f, t_raw);
    const int g = last - first + 1;
    for (int y = 0; y < latent.height; ++y) {
      for (int x = 0; x < latent.width; ++x) {
        std::array<double, 4> lat{};
        for (int c = 0; c < kChannels; ++c) lat[c] = latent.at(f, c, y, x);
        const auto z = mix(lat);
        for (int j = 0; j < g; ++j) {
          const double shift = slope_weight(j, g) * z[3];
          double* frame = out.data.data() + static_cast<std::size_t>(first + j) * out.height * out.width * 3;
          for (int yy = y * s; yy < (y + 1) * s; ++yy) {
            for (int xx = x * s; xx < (x + 1) * s; ++xx) {
              double* px = frame + (static_cast<std::size_t>(yy) * out.width + xx) * 3;
              for (int c = 0; c < 3; ++c) px[c] = 127.5 * (z[c] + shift + 1.0);
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace mvaug::codec
