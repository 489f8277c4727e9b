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


// Deterministic synthetic inputs shared by the unit and acceptance suites.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fitroom/fitroom.hpp"

namespace fitroom::fixture {

inline ImageTensor random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageTensor img(h, w);
  for (auto& v : img.values) v = nst::unit_uniform(rng);
  return img;
}

// Smooth "portrait": a disc (head), a trapezoid (torso) and gradients.
inline ImageTensor portrait(int h, int w, int variant) {
  ImageTensor img(h, w);
  const double cx = w * (0.45 + 0.05 * variant), cy = h * 0.25;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double r = std::hypot(i - cy, j - cx);
      const bool head = r < 0.14 * std::min(h, w);
      const bool torso = i > h * 0.45 && std::abs(j - cx) < (i - h * 0.3) * 0.6;
      img.at(i, j, 0) = head ? 0.85 : torso ? 0.3 + 0.1 * variant : 0.15 + 0.5 * j / w;
      img.at(i, j, 1) = head ? 0.65 : torso ? 0.35 : 0.2 + 0.4 * i / h;
      img.at(i, j, 2) = head ? 0.55 : torso ? 0.6 - 0.1 * variant : 0.5;
    }
  return img;
}

// Periodic patterns standing in for style images.
inline ImageTensor texture(int h, int w, int kind) {
  ImageTensor img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const bool check = ((i / 4) + (j / 4)) % 2 == 0;
      const bool stripe = (j / 3 + kind) % 2 == 0;
      switch (kind % 3) {
        case 0:
          img.at(i, j, 0) = check ? 0.9 : 0.1;
          img.at(i, j, 1) = 0.5 + 0.4 * std::sin(0.7 * j);
          img.at(i, j, 2) = i % 8 < 4 ? 0.3 : 0.7;
          break;
        case 1:
          img.at(i, j, 0) = 0.2;
          img.at(i, j, 1) = stripe ? 0.3 : 0.45;
          img.at(i, j, 2) = stripe ? 0.8 : 0.55;
          break;
        default:
          img.at(i, j, 0) = 0.5 + 0.45 * std::sin(0.5 * i) * std::cos(0.3 * j);
          img.at(i, j, 1) = check ? 0.75 : 0.25;
          img.at(i, j, 2) = 0.4;
      }
    }
  return img;
}

inline Polygon rect(double x0, double y0, double x1, double y1) {
  return Polygon{{x0, y0, x1, y0, x1, y1, x0, y1}};
}

inline AnnotationRecord record(long long image_id, long long id, int category,
                               std::vector<Polygon> polys) {
  AnnotationRecord r;
  r.image_id = image_id;
  r.annotation_id = id;
  r.category_id = category;
  r.segmentation = std::move(polys);
  r.bbox = polygon_bounds(r.segmentation);
  return r;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

struct RunFixture {
  std::filesystem::path dir;
  std::filesystem::path manifest;
  std::vector<int> selected;
};

// Writes a content image, annotations with three items (two of them
// selected, one overlapping another), two style images and a manifest.
// Non-square sizes exercise the padding path.
inline RunFixture write_run_fixture(const std::filesystem::path& dir, int variant, int iterations,
                                    int target = 64) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int h = 48 + 8 * variant, w = 40 + 4 * variant;
  png::write_rgb((dir / "content.png").string(), portrait(h, w, variant));
  png::write_rgb((dir / "style_a.png").string(), texture(40, 40, variant));
  png::write_rgb((dir / "style_b.png").string(), texture(32, 48, variant + 1));

  std::vector<AnnotationRecord> recs;
  const double cx = w * (0.45 + 0.05 * variant);
  recs.push_back(record(100 + variant, 1, 1,
                        {Polygon{{cx - 6, h * 0.5, cx + 6, h * 0.5, cx + 14, h - 2.0, cx - 14,
                                  h - 2.0}}}));
  recs.push_back(record(100 + variant, 2, 2, {rect(cx - 12, h * 0.7, cx + 12, h * 0.7 + 3)}));
  recs.push_back(record(100 + variant, 3, 7, {rect(2, 2, 10, 12)}));
  fixture::write_file(dir / "annotations.json", serialize_annotations(recs));

  RunFixture f;
  f.dir = dir;
  f.manifest = dir / "manifest.json";
  f.selected = {1, 2};
  const std::string manifest = R"({
  "content_image": "content.png",
  "annotations": "annotations.json",
  "selections": [
    {"category_id": 2, "style_image": "style_b.png"},
    {"category_id": 1, "style_image": "style_a.png"}
  ],
  "nst": {"iterations": )" + std::to_string(iterations) + R"(, "snapshot_interval": 5},
  "target_size": )" + std::to_string(target) + R"(,
  "feather_radius": 0,
  "output_dir": "out"
})";
  write_file(f.manifest, manifest);
  return f;
}

}  // namespace fitroom::fixture
