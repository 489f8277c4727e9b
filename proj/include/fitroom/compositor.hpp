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

#include <string>
#include <vector>

#include "fitroom/annotations.hpp"
#include "fitroom/error.hpp"
#include "fitroom/image.hpp"

namespace fitroom {

struct CompositeJob {
  ImageTensor original;
  ImageTensor stylized;
  BinaryMask mask;
  int feather_radius = 0;
};

// `radius` passes of a 3x3 mean filter over the mask, edge-replicated.
inline std::vector<double> feather_alpha(const BinaryMask& mask, int radius) {
  const int h = mask.height, w = mask.width;
  std::vector<double> alpha(mask.bits.begin(), mask.bits.end());
  std::vector<double> next(alpha.size());
  for (int pass = 0; pass < radius; ++pass) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj) {
            const int y = std::clamp(i + di, 0, h - 1), x = std::clamp(j + dj, 0, w - 1);
            acc += alpha[static_cast<std::size_t>(y) * w + x];
          }
        next[static_cast<std::size_t>(i) * w + j] = acc / 9.0;
      }
    alpha.swap(next);
  }
  return alpha;
}

// Hard select for radius 0; alpha blend with a feathered mask otherwise.
// Pixels whose alpha is exactly 0 are copied from the original.
inline ImageTensor composite(const CompositeJob& job) {
  const auto& o = job.original;
  const auto& s = job.stylized;
  enforce(o.height == s.height && o.width == s.width && o.height == job.mask.height &&
              o.width == job.mask.width,
          "composite: original ", o.height, "x", o.width, ", stylized ", s.height, "x", s.width,
          ", mask ", job.mask.height, "x", job.mask.width, " must agree");
  enforce(job.feather_radius >= 0, "feather radius must be >= 0");
  ImageTensor out = o;
  if (job.feather_radius == 0) {
    for (int i = 0; i < o.height; ++i)
      for (int j = 0; j < o.width; ++j)
        if (job.mask.at(i, j))
          for (int c = 0; c < 3; ++c) out.at(i, j, c) = s.at(i, j, c);
    return out;
  }
  const auto alpha = feather_alpha(job.mask, job.feather_radius);
  for (int i = 0; i < o.height; ++i)
    for (int j = 0; j < o.width; ++j) {
      const double a = alpha[static_cast<std::size_t>(i) * o.width + j];
      if (a == 0.0) continue;
      for (int c = 0; c < 3; ++c) out.at(i, j, c) = a * s.at(i, j, c) + (1.0 - a) * o.at(i, j, c);
    }
  return out;
}

// CopyPaste baseline: the texture is tiled from the mask's bounding-box
// origin and written into masked pixels only.
inline ImageTensor copy_paste(const ImageTensor& original, const ImageTensor& texture,
                              const BinaryMask& mask, std::vector<std::string>* warnings = nullptr) {
  enforce(texture.height > 0 && texture.width > 0 && !texture.values.empty(),
          "copy_paste: empty texture");
  enforce(original.height == mask.height && original.width == mask.width,
          "copy_paste: mask shape does not match image");
  if (mask.empty()) {
    if (warnings) warnings->push_back("copy_paste: empty mask, image returned unchanged");
    return original;
  }
  const BoxXYWH box = bbox_from_mask(mask);
  const int x0 = static_cast<int>(box.x), y0 = static_cast<int>(box.y);
  ImageTensor out = original;
  for (int i = 0; i < mask.height; ++i)
    for (int j = 0; j < mask.width; ++j) {
      if (!mask.at(i, j)) continue;
      const int ty = (i - y0) % texture.height, tx = (j - x0) % texture.width;
      for (int c = 0; c < 3; ++c) out.at(i, j, c) = texture.at(ty, tx, c);
    }
  return out;
}

}  // namespace fitroom
