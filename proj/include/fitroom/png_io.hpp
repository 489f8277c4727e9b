// Copyright (c) 2026 The fitroom Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "fitroom/error.hpp"
#include "fitroom/image.hpp"

namespace fitroom::png {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::vector<std::uint8_t> read_pixels(const std::string& path, std::uint32_t format,
                                             int& h, int& w) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read PNG '" + path + "': " + image.message);
  image.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path + "': " + image.message);
  }
  h = static_cast<int>(image.height);
  w = static_cast<int>(image.width);
  return buf;
}

inline std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace detail

// Decodes any PNG to 8-bit RGB and scales to [0, 1].
inline ImageTensor read_rgb(const std::string& path) {
  int h = 0, w = 0;
  const auto buf = detail::read_pixels(path, PNG_FORMAT_RGB, h, w);
  ImageTensor img(h, w);
  for (std::size_t i = 0; i < buf.size(); ++i) img.values[i] = buf[i] / 255.0;
  return img;
}

// Writes an 8-bit RGB PNG. Normalized images are mapped back to [0, 1]
// with their recorded stats first; values are clamped to [0, 1].
inline void write_rgb(const std::string& path, const ImageTensor& img) {
  std::vector<std::uint8_t> buf(img.values.size());
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j)
      for (int c = 0; c < 3; ++c) {
        double v = img.at(i, j, c);
        if (img.normalization) v = v * img.normalization->std[c] + img.normalization->mean[c];
        buf[img.index(i, j, c)] = detail::quantize(v);
      }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path + "': " + image.message);
}

// Any nonzero gray level reads as set.
inline BinaryMask read_mask(const std::string& path) {
  int h = 0, w = 0;
  const auto buf = detail::read_pixels(path, PNG_FORMAT_GRAY, h, w);
  BinaryMask mask(h, w);
  for (std::size_t i = 0; i < buf.size(); ++i) mask.bits[i] = buf[i] != 0 ? 1 : 0;
  return mask;
}

namespace detail {

// libpng long-jumps back here on error, so this frame holds only trivially
// destructible locals. Returns false on failure.
inline bool write_packed_rows(png_structp png_ptr, png_infop info, std::FILE* fp,
                              const BinaryMask& mask, png_byte* row, std::size_t row_bytes) {
  if (setjmp(png_jmpbuf(png_ptr))) return false;
  png_init_io(png_ptr, fp);
  png_set_IHDR(png_ptr, info, static_cast<png_uint_32>(mask.width),
               static_cast<png_uint_32>(mask.height), 1, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png_ptr, info);
  for (int i = 0; i < mask.height; ++i) {
    std::memset(row, 0, row_bytes);
    for (int j = 0; j < mask.width; ++j)
      if (mask.at(i, j)) row[j / 8] |= static_cast<png_byte>(0x80u >> (j % 8));
    png_write_row(png_ptr, row);
  }
  png_write_end(png_ptr, nullptr);
  return true;
}

}  // namespace detail

// 1-bit grayscale PNG, set pixels white.
inline void write_mask(const std::string& path, const BinaryMask& mask) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open '" + path + "' for writing");
  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png_ptr) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (!info) {
    png_destroy_write_struct(&png_ptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>((mask.width + 7) / 8));
  const bool ok = detail::write_packed_rows(png_ptr, info, fp.get(), mask, row.data(), row.size());
  png_destroy_write_struct(&png_ptr, &info);
  if (!ok) throw IoError("libpng failed writing '" + path + "'");
}

}  // namespace fitroom::png
