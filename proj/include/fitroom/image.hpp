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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fitroom/error.hpp"

namespace fitroom {

// Per-channel constants used by channel normalization.
struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  bool operator==(const ChannelStats&) const = default;
};

// H x W x 3 raster, RGB, interleaved row-major (row, col, channel).
// Values live in [0, 1] until normalize_channels() records the stats used.
struct ImageTensor {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::optional<ChannelStats> normalization;

  ImageTensor() = default;
  ImageTensor(int h, int w, double fill = 0.0) : height(h), width(w) {
    enforce(h > 0 && w > 0, "image dimensions must be positive, got ", h, "x", w);
    values.assign(static_cast<std::size_t>(h) * w * kChannels, fill);
  }

  bool normalized() const { return normalization.has_value(); }
  std::size_t size() const { return values.size(); }

  std::size_t index(int row, int col, int c) const {
    return (static_cast<std::size_t>(row) * width + col) * kChannels + c;
  }
  double& at(int row, int col, int c) { return values[index(row, col, c)]; }
  double at(int row, int col, int c) const { return values[index(row, col, c)]; }

  // Pixel range that corresponds to [0, 1] before normalization.
  std::pair<double, double> valid_range(int c) const {
    if (!normalization) return {0.0, 1.0};
    const double m = normalization->mean[c], s = normalization->std[c];
    return {(0.0 - m) / s, (1.0 - m) / s};
  }

  bool operator==(const ImageTensor&) const = default;
};

// One boolean per pixel, row-major.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w, bool fill = false) : height(h), width(w) {
    enforce(h > 0 && w > 0, "mask dimensions must be positive, got ", h, "x", w);
    bits.assign(static_cast<std::size_t>(h) * w, fill ? 1 : 0);
  }

  bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool v = true) {
    bits[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0;
  }
  std::size_t popcount() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  bool empty() const { return popcount() == 0; }

  bool operator==(const BinaryMask&) const = default;
};

inline BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  enforce(a.height == b.height && a.width == b.width, "mask shape mismatch");
  BinaryMask out = a;
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = (a.bits[i] | b.bits[i]) ? 1 : 0;
  return out;
}

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  enforce(a.height == b.height && a.width == b.width, "mask shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] && b.bits[i]) ? 1 : 0;
    uni += (a.bits[i] || b.bits[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Bilinear resampling of an interleaved raster with half-pixel-center
// alignment: destination pixel i samples source coordinate
// (i + 0.5) * src / dst - 0.5, clamped to the source extent.
inline std::vector<double> resize_bilinear(std::span<const double> src, int src_h, int src_w,
                                           int channels, int dst_h, int dst_w) {
  enforce(src_h > 0 && src_w > 0 && dst_h > 0 && dst_w > 0, "resize with empty extent");
  enforce(src.size() == static_cast<std::size_t>(src_h) * src_w * channels,
          "resize source size mismatch");
  std::vector<double> dst(static_cast<std::size_t>(dst_h) * dst_w * channels);
  const double sy_scale = static_cast<double>(src_h) / dst_h;
  const double sx_scale = static_cast<double>(src_w) / dst_w;
  for (int i = 0; i < dst_h; ++i) {
    const double sy = std::clamp((i + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(src_h - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double fy = sy - y0;
    for (int j = 0; j < dst_w; ++j) {
      const double sx =
          std::clamp((j + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(src_w - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double fx = sx - x0;
      for (int c = 0; c < channels; ++c) {
        auto px = [&](int y, int x) {
          return src[(static_cast<std::size_t>(y) * src_w + x) * channels + c];
        };
        const double top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
        const double bot = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
        dst[(static_cast<std::size_t>(i) * dst_w + j) * channels + c] =
            top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return dst;
}

inline ImageTensor resize_image(const ImageTensor& img, int dst_h, int dst_w) {
  ImageTensor out(dst_h, dst_w);
  out.values = resize_bilinear(img.values, img.height, img.width, ImageTensor::kChannels, dst_h,
                               dst_w);
  out.normalization = img.normalization;
  return out;
}

}  // namespace fitroom
