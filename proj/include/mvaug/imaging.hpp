// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvaug/types.hpp"

namespace mvaug {

Image resize_nearest(const Image& src, int height, int width);
Image resize_bilinear(const Image& src, int height, int width);
Mask resize_nearest(const Mask& src, int height, int width);

/// Copies a rectangle out of `src`; pixels outside the source are zero.
Image crop_padded(const Image& src, int top, int left, int height, int width);

/// Shifts a mask by (dx, dy); pixels shifted in from outside are false.
Mask translate(const Mask& src, int dx, int dy);

/// Fills [x, x+w) x [y, y+h) clipped to the mask.
void fill_rect(Mask& mask, int x, int y, int w, int h);

Mask mask_or(const Mask& a, const Mask& b);

}  // namespace mvaug
