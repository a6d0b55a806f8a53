// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "mvaug/types.hpp"

namespace mvaug::io {

/// 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// 1-bit grayscale PNG; any nonzero pixel reads back as true.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path);

}  // namespace mvaug::io
