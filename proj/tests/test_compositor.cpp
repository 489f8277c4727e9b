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


#include <gtest/gtest.h>

#include "fitroom/fitroom.hpp"
#include "fixtures.hpp"

namespace fitroom {
namespace {

TEST(Composite, HardMask) {
  const auto o = fixture::random_image(6, 8, 1), s = fixture::random_image(6, 8, 2);
  EXPECT_EQ(composite({o, s, BinaryMask(6, 8), 0}).values, o.values);
  EXPECT_EQ(composite({o, s, BinaryMask(6, 8, true), 0}).values, s.values);
  BinaryMask left(6, 8);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) left.set(i, j);
  const auto out = composite({o, s, left, 0});
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 8; ++j)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(i, j, c), (j < 4 ? s : o).at(i, j, c));
}

TEST(Composite, FeatherBlendsOnlyNearMask) {
  const auto o = fixture::random_image(12, 12, 3), s = fixture::random_image(12, 12, 4);
  BinaryMask m(12, 12);
  for (int i = 4; i < 8; ++i)
    for (int j = 4; j < 8; ++j) m.set(i, j);
  const auto alpha = feather_alpha(m, 2);
  const auto out = composite({o, s, m, 2});
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      const double a = alpha[i * 12 + j];
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
      const bool far = i < 2 || i > 9 || j < 2 || j > 9;
      if (far) {
        EXPECT_EQ(a, 0.0);
        EXPECT_EQ(out.at(i, j, 1), o.at(i, j, 1));
      }
    }
  EXPECT_THROW(composite({o, s, BinaryMask(3, 3), 0}), DomainError);
}

TEST(CopyPaste, Tiling) {
  const auto o = fixture::random_image(4, 4, 5);
  ImageTensor one(1, 1, 0.625);
  BinaryMask m(4, 4);
  m.set(1, 1);
  m.set(2, 3);
  const auto flat = copy_paste(o, one, m);
  EXPECT_EQ(flat.at(1, 1, 2), 0.625);
  EXPECT_EQ(flat.at(0, 0, 0), o.at(0, 0, 0));

  const auto tex = fixture::random_image(2, 2, 6);
  const auto tiled = copy_paste(o, tex, BinaryMask(4, 4, true));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(tiled.at(i, j, c), tex.at(i % 2, j % 2, c));

  // Texture larger than the mask bbox is cropped from the bbox origin.
  const auto big = fixture::random_image(10, 10, 7);
  BinaryMask block(4, 4);
  for (int i = 1; i < 3; ++i)
    for (int j = 2; j < 4; ++j) block.set(i, j);
  const auto cropped = copy_paste(o, big, block);
  for (int i = 1; i < 3; ++i)
    for (int j = 2; j < 4; ++j) EXPECT_EQ(cropped.at(i, j, 0), big.at(i - 1, j - 2, 0));

  std::vector<std::string> warnings;
  EXPECT_EQ(copy_paste(o, tex, BinaryMask(4, 4), &warnings).values, o.values);
  EXPECT_EQ(warnings.size(), 1u);
}

}  // namespace
}  // namespace fitroom
