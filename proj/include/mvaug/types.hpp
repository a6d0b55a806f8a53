// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mvaug {

// ---------------------------------------------------------------------------
// Errors. Every failure the library reports derives from mvaug::Error so the
// pipeline can record it in a per-episode ledger without knowing the details.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public Error { using Error::Error; };
class SaveError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };

// Raised by any external model client (stub or remote).
class ClientError : public Error {
 public:
  ClientError(std::string episode_id, const std::string& what)
      : Error(episode_id.empty() ? what : "[" + episode_id + "] " + what),
        episode_id_(std::move(episode_id)) {}
  const std::string& episode_id() const noexcept { return episode_id_; }

 private:
  std::string episode_id_;
};

// ---------------------------------------------------------------------------
// Pixel containers
// ---------------------------------------------------------------------------

/// Interleaved 8-bit RGB image, row-major (H x W x 3).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t* at(int y, int x) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int y, int x) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool empty() const { return height == 0 || width == 0; }
  bool operator==(const Image&) const = default;
};

/// Binary mask stored one byte per pixel (0 or 1).
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int h, int w, bool fill = false)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

  bool get(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int y, int x, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t area() const;
  bool any() const { return area() > 0; }
  bool operator==(const Mask&) const = default;
};

using Video = std::vector<Image>;
using MaskVideo = std::vector<Mask>;

// ---------------------------------------------------------------------------
// Camera roles
// ---------------------------------------------------------------------------

/// Camera role. Canonical order: wrist first, then third-person views by index.
struct ViewRole {
  enum class Kind { kWrist = 0, kThirdPerson = 1 };
  Kind kind = Kind::kWrist;
  int index = 0;

  static ViewRole wrist() { return {Kind::kWrist, 0}; }
  static ViewRole third_person(int k) { return {Kind::kThirdPerson, k}; }

  bool is_wrist() const { return kind == Kind::kWrist; }
  std::string str() const;
  static ViewRole parse(std::string_view s);

  auto operator<=>(const ViewRole&) const = default;
};

struct ViewStream {
  ViewRole role;
  Video frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
  bool operator==(const ViewStream&) const = default;
};

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

}  // namespace mvaug
