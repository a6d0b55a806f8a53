// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvaug/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

namespace mvaug::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw_write(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw SaveError("cannot open '" + path.string() + "' for writing");
  return f;
}

// Writes rows with the given PNG colour type / depth. `rows` must stay alive.
void write_rows(const std::filesystem::path& path, int width, int height, int bit_depth,
                int color_type, const std::vector<png_bytep>& rows) {
  FilePtr f = open_or_throw_write(path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw SaveError("libpng init failed for '" + path.string() + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw SaveError("libpng write failed for '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) throw SaveError("flush failed for '" + path.string() + "'");
}

// Decodes any PNG to 8-bit with `channels` (1 = gray, 3 = RGB).
std::vector<std::uint8_t> read_any(const std::filesystem::path& path, int channels, int& width,
                                   int& height) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw LoadError("cannot open '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("libpng init failed for '" + path.string() + "'");
  }
  std::vector<std::uint8_t> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray = (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA);
  if (channels == 3 && is_gray) png_set_gray_to_rgb(png);
  if (channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  data.resize(static_cast<std::size_t>(width) * height * channels);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = data.data() + static_cast<std::size_t>(y) * width * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return data;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = const_cast<png_bytep>(image.at(y, 0));
  write_rows(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

Image read_png(const std::filesystem::path& path) {
  Image img;
  img.pixels = read_any(path, 3, img.width, img.height);
  return img;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  const int stride = (mask.width + 7) / 8;
  std::vector<std::uint8_t> packed(static_cast<std::size_t>(stride) * mask.height, 0);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.get(y, x)) packed[static_cast<std::size_t>(y) * stride + x / 8] |= 0x80 >> (x % 8);
  std::vector<png_bytep> rows(mask.height);
  for (int y = 0; y < mask.height; ++y) rows[y] = packed.data() + static_cast<std::size_t>(y) * stride;
  write_rows(path, mask.width, mask.height, 1, PNG_COLOR_TYPE_GRAY, rows);
}

Mask read_mask_png(const std::filesystem::path& path) {
  Mask m;
  std::vector<std::uint8_t> gray = read_any(path, 1, m.width, m.height);
  m.bits.resize(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) m.bits[i] = gray[i] ? 1 : 0;
  return m;
}

}  // namespace mvaug::io
