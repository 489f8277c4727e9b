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

#include <cstddef>
#include <vector>

#include "fitroom/error.hpp"
#include "fitroom/image.hpp"

namespace fitroom {

// Dense C x H x W array of doubles, channel-major. Row c of the C x (H*W)
// view is the contiguous block [c*H*W, (c+1)*H*W).
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, double fill = 0.0) : channels(c), height(h), width(w) {
    enforce(c > 0 && h > 0 && w > 0, "tensor dimensions must be positive, got ", c, "x", h, "x",
            w);
    data.assign(static_cast<std::size_t>(c) * h * w, fill);
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  double& operator()(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double operator()(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  bool operator==(const Tensor3&) const = default;
};

inline Tensor3 to_chw(const ImageTensor& img) {
  Tensor3 t(ImageTensor::kChannels, img.height, img.width);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j)
      for (int c = 0; c < ImageTensor::kChannels; ++c) t(c, i, j) = img.at(i, j, c);
  return t;
}

// Writes a 3-channel tensor back into interleaved order, keeping the
// normalization state of `like`.
inline ImageTensor to_hwc(const Tensor3& t, const ImageTensor& like) {
  enforce(t.channels == ImageTensor::kChannels, "expected 3 channels, got ", t.channels);
  ImageTensor img(t.height, t.width);
  img.normalization = like.normalization;
  for (int i = 0; i < t.height; ++i)
    for (int j = 0; j < t.width; ++j)
      for (int c = 0; c < ImageTensor::kChannels; ++c) img.at(i, j, c) = t(c, i, j);
  return img;
}

}  // namespace fitroom
