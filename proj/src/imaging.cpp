// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mvaug {

std::size_t Mask::area() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string ViewRole::str() const {
  return is_wrist() ? std::string("wrist") : "third_person_" + std::to_string(index);
}

ViewRole ViewRole::parse(std::string_view s) {
  if (s == "wrist") return wrist();
  constexpr std::string_view prefix = "third_person_";
  if (s.substr(0, prefix.size()) == prefix) {
    const std::string digits(s.substr(prefix.size()));
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      return third_person(std::stoi(digits));
    }
  }
  throw ValidationError("unknown view role '" + std::string(s) + "'");
}

namespace {

// Nearest source index under half-pixel-centre alignment.
int nearest_index(int dst, int dst_size, int src_size) {
  const double pos = (dst + 0.5) * static_cast<double>(src_size) / dst_size;
  return std::clamp(static_cast<int>(std::floor(pos)), 0, src_size - 1);
}

}  // namespace

Image resize_nearest(const Image& src, int height, int width) {
  if (src.height == height && src.width == width) return src;
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = nearest_index(y, height, src.height);
    for (int x = 0; x < width; ++x) {
      const int sx = nearest_index(x, width, src.width);
      std::copy_n(src.at(sy, sx), 3, out.at(y, x));
    }
  }
  return out;
}

Mask resize_nearest(const Mask& src, int height, int width) {
  if (src.height == height && src.width == width) return src;
  Mask out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = nearest_index(y, height, src.height);
    for (int x = 0; x < width; ++x) {
      out.set(y, x, src.get(sy, nearest_index(x, width, src.width)));
    }
  }
  return out;
}

Image resize_bilinear(const Image& src, int height, int width) {
  if (src.height == height && src.width == width) return src;
  Image out(height, width);
  const double sy_scale = static_cast<double>(src.height) / height;
  const double sx_scale = static_cast<double>(src.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0)[c] * (1 - wx) + src.at(y0, x1)[c] * wx;
        const double bot = src.at(y1, x0)[c] * (1 - wx) + src.at(y1, x1)[c] * wx;
        out.at(y, x)[c] = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bot * wy));
      }
    }
  }
  return out;
}

Image crop_padded(const Image& src, int top, int left, int height, int width) {
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = top + y;
    if (sy < 0 || sy >= src.height) continue;
    for (int x = 0; x < width; ++x) {
      const int sx = left + x;
      if (sx < 0 || sx >= src.width) continue;
      std::copy_n(src.at(sy, sx), 3, out.at(y, x));
    }
  }
  return out;
}

Mask translate(const Mask& src, int dx, int dy) {
  Mask out(src.height, src.width);
  for (int y = 0; y < src.height; ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= src.height) continue;
    for (int x = 0; x < src.width; ++x) {
      const int sx = x - dx;
      if (sx >= 0 && sx < src.width && src.get(sy, sx)) out.set(y, x, true);
    }
  }
  return out;
}

void fill_rect(Mask& mask, int x, int y, int w, int h) {
  const int y0 = std::max(y, 0), y1 = std::min(y + h, mask.height);
  const int x0 = std::max(x, 0), x1 = std::min(x + w, mask.width);
  for (int yy = y0; yy < y1; ++yy)
    for (int xx = x0; xx < x1; ++xx) mask.set(yy, xx, true);
}

Mask mask_or(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw PreconditionError("mask shape mismatch: " + std::to_string(a.height) + "x" +
                            std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                            std::to_string(b.width));
  }
  Mask out(a.height, a.width);
  for (std::size_t i = 0; i < a.bits.size(); ++i) out.bits[i] = (a.bits[i] | b.bits[i]) ? 1 : 0;
  return out;
}

}  // namespace mvaug
