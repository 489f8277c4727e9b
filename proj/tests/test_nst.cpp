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

#include <cmath>
#include <random>

#include "fitroom/fitroom.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace fitroom::nst {
namespace {

ConvLayer random_conv(int in, int out, int k, int stride, int pad, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ConvLayer c{out, in, k, stride, pad, {}, {}};
  c.weights.resize(static_cast<std::size_t>(out) * in * k * k);
  for (auto& v : c.weights) v = unit_uniform(rng) - 0.5;
  c.bias.resize(out);
  for (auto& v : c.bias) v = unit_uniform(rng) - 0.5;
  return c;
}

Tensor3 random_tensor(int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor3 t(c, h, w);
  for (auto& v : t.data) v = 2 * unit_uniform(rng) - 1;
  return t;
}

TEST(Layers, IdentityConv) {
  ConvLayer id{1, 1, 1, 1, 0, {1.0}, {0.0}};
  const auto in = random_tensor(1, 4, 5, 1);
  EXPECT_EQ(detail::conv_forward(id, in).data, in.data);
}

TEST(Layers, ReluZeroesNegatives) {
  Tensor3 t(2, 3, 3);
  std::fill(t.data.begin(), t.data.end(), -0.25);
  for (double v : detail::relu_forward(t).data) EXPECT_EQ(v, 0.0);
}

TEST(Layers, ConvMatchesSlidingWindow) {
  const auto in = random_tensor(2, 5, 5, 2);
  for (auto [s, p] : {std::pair{1, 0}, std::pair{1, 1}, std::pair{2, 1}}) {
    const auto L = random_conv(2, 3, 3, s, p, 7 + s + p);
    const auto got = detail::conv_forward(L, in);
    const auto want = oracle::conv(L, in);
    ASSERT_TRUE(got.same_shape(want));
    for (std::size_t k = 0; k < got.data.size(); ++k) EXPECT_NEAR(got.data[k], want.data[k], 1e-12);
  }
}

TEST(Layers, BackwardIsAdjointOfForward) {
  // <conv(x), g> is linear in x apart from the bias, so its input gradient
  // is the adjoint applied to g; compare against <J e_k, g>.
  const auto L = random_conv(2, 3, 3, 2, 1, 3);
  const auto x = random_tensor(2, 6, 7, 4);
  const auto y = detail::conv_forward(L, x);
  const auto g = random_tensor(y.channels, y.height, y.width, 5);
  const auto gin = detail::conv_backward(L, x, g);
  auto dot = [](const Tensor3& a, const Tensor3& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.data.size(); ++k) s += a.data[k] * b.data[k];
    return s;
  };
  const double base = dot(oracle::conv(L, x), g);
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    Tensor3 e = x;
    e.data[k] += 1.0;
    EXPECT_NEAR(dot(oracle::conv(L, e), g) - base, gin.data[k], 1e-10);
  }
  AvgPoolLayer pool{2, 2};
  const auto py = detail::pool_forward(pool, x);
  const auto pg = random_tensor(py.channels, py.height, py.width, 6);
  const auto pin = detail::pool_backward(pool, x, pg);
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    Tensor3 e = x;
    e.data[k] += 1.0;
    EXPECT_NEAR(dot(detail::pool_forward(pool, e), pg) - dot(py, pg), pin.data[k], 1e-12);
  }
}

TEST(Extractor, ReferenceShapes) {
  const auto ex = reference_extractor();
  EXPECT_EQ(ex.conv_indices().size(), 3u);
  EXPECT_EQ(ex.block_outputs(), (std::vector<std::size_t>{1, 3, 6}));
  const auto acts = ex.forward(to_chw(fixture::random_image(16, 16, 1)));
  EXPECT_EQ(acts[1].channels, 8);
  EXPECT_EQ(acts[3].channels, 16);
  EXPECT_EQ(acts[6].height, 8);
  EXPECT_THROW(FeatureExtractor({ReluLayer{}}), DomainError);
  EXPECT_THROW(FeatureExtractor({random_conv(3, 4, 3, 1, 1, 1), random_conv(5, 2, 1, 1, 0, 2)}),
               DomainError);
}

TEST(WeightFile, RoundTripAndCorruption) {
  const auto ex = reference_extractor(99);
  const auto bytes = serialize_extractor(ex);
  EXPECT_EQ(std::memcmp(bytes.data(), "NSTW", 4), 0);
  const auto back = parse_extractor(bytes);
  EXPECT_EQ(back, ex);
  EXPECT_EQ(serialize_extractor(back), bytes);

  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(parse_extractor(std::span(bytes).first(cut)), IoError) << cut;
  auto flipped = bytes;
  flipped[40] ^= 0x10;
  EXPECT_THROW(parse_extractor(flipped), IoError);

  const auto path = (std::filesystem::temp_directory_path() / "fitroom_weights.nstw").string();
  save_extractor(ex, path);
  EXPECT_EQ(load_extractor(path), ex);
  EXPECT_THROW(load_extractor(path + ".missing"), IoError);
}

TEST(Gram, Fixtures) {
  EXPECT_EQ(gram(Tensor3(3, 2, 2)).g, std::vector<double>(9, 0.0));
  Tensor3 row(1, 1, 3);
  row.data = {1, 2, 3};
  EXPECT_EQ(gram(row).g, std::vector<double>{14});
  Tensor3 f(2, 1, 2);
  f.data = {1, 2, 3, 4};
  EXPECT_EQ(gram(f).g, (std::vector<double>{5, 11, 11, 25}));
}

TEST(Losses, ContentStyleTvFixtures) {
  const auto f = random_tensor(2, 3, 3, 8);
  EXPECT_EQ(content_loss(f, f, 1.0), 0.0);
  Tensor3 p = f;
  for (auto& v : p.data) v -= 1.0;
  EXPECT_NEAR(content_loss(f, p, 1.0), 18.0, 1e-12);
  EXPECT_NEAR(content_loss(f, p, 2.0), 36.0, 1e-12);

  GramMatrix g{2, {2, 0, 0, 2}}, a{2, {1, 0, 0, 1}};
  EXPECT_EQ(style_layer_loss(g, g, 5), 0.0);
  EXPECT_EQ(style_layer_loss(g, a, 3), 6.0);
  GramMatrix h{2, {4, 1, 1, 0}};
  EXPECT_EQ(style_loss({{1, g}, {3, h}}, {{1, a}, {3, h}}, {{1, 3.0}, {3, 0.0}}), 6.0);

  EXPECT_EQ(tv_loss(ImageTensor(4, 4, 0.3), 1.0), 0.0);
  ImageTensor pair(1, 2);
  pair.at(0, 1, 0) = 1.0;
  EXPECT_EQ(tv_loss(pair, 1.0), 1.0);
  ImageTensor diag(2, 2);
  diag.at(0, 1, 0) = 1.0;
  diag.at(1, 0, 0) = 1.0;
  EXPECT_EQ(tv_loss(diag, 1.0), 4.0);

  const auto tg = tv_gradient(pair, 0.5);
  EXPECT_EQ(tg.at(0, 0, 0), -1.0);
  EXPECT_EQ(tg.at(0, 1, 0), 1.0);
  EXPECT_EQ(tg.at(0, 0, 1), 0.0);
}

TEST(Objective, ZeroAtTargets) {
  const auto ex = reference_extractor();
  const auto img = fixture::random_image(16, 16, 3);
  auto cfg = default_config(ex);
  cfg.tv_weight = 0;
  const auto t = make_targets(ex, img, img, cfg);
  const auto lg = loss_and_gradient(ex, img, t, cfg);
  EXPECT_EQ(lg.loss.content, 0.0);
  EXPECT_EQ(lg.loss.style, 0.0);
  for (double v : lg.gradient.values) EXPECT_EQ(v, 0.0);

  auto zero = cfg;
  zero.content_weight = 0;
  for (auto& [l, w] : zero.style_weights) w = 0;
  const auto other = fixture::random_image(16, 16, 4);
  EXPECT_EQ(total_loss(ex, other, make_targets(ex, img, other, zero), zero).total, 0.0);
}

TEST(Objective, ComponentsRecompose) {
  const auto ex = reference_extractor();
  const auto c = fixture::random_image(16, 16, 5), s = fixture::random_image(16, 16, 6);
  const auto x = fixture::random_image(16, 16, 7);
  const auto cfg = default_config(ex);
  const auto t = make_targets(ex, c, s, cfg);
  const auto l = total_loss(ex, x, t, cfg);
  const auto acts = ex.forward(to_chw(x));
  const double content = content_loss(acts[cfg.content_layer], t.content, cfg.content_weight);
  double style = 0;
  for (const auto& [layer, w] : cfg.style_weights)
    style += style_layer_loss(gram(acts[layer]), t.style.at(layer), w);
  EXPECT_DOUBLE_EQ(l.content, content);
  EXPECT_DOUBLE_EQ(l.style, style);
  EXPECT_DOUBLE_EQ(l.tv, tv_loss(x, cfg.tv_weight));
  EXPECT_DOUBLE_EQ(l.total, content + style + l.tv);
}

TEST(Objective, TwoLayerGradientMatchesFiniteDifferences) {
  const FeatureExtractor ex({random_conv(3, 4, 3, 1, 1, 21), ReluLayer{}});
  NstConfig cfg;
  cfg.content_layer = 1;
  cfg.content_weight = 1.0;
  cfg.style_weights = {{1, 0.01}};
  cfg.tv_weight = 0.5;
  const auto c = fixture::random_image(16, 16, 8), s = fixture::random_image(16, 16, 9);
  const auto x = fixture::random_image(16, 16, 10);
  const auto t = make_targets(ex, c, s, cfg);
  const auto g = pixel_gradient(ex, x, t, cfg);
  const auto fd = oracle::nst_central_differences(ex, x, t, cfg);
  for (std::size_t k = 0; k < g.values.size(); ++k)
    EXPECT_LT(oracle::relative_error(g.values[k], fd.grad[k]), 1e-4) << k;
}

TEST(Objective, TvOnlyPairGradient) {
  const FeatureExtractor ex({random_conv(3, 2, 1, 1, 0, 1)});
  NstConfig cfg;
  cfg.content_weight = 0;
  cfg.tv_weight = 1.5;
  ImageTensor pair(1, 2);
  pair.at(0, 1, 0) = 1.0;
  const auto g = pixel_gradient(ex, pair, make_targets(ex, pair, pair, cfg), cfg);
  EXPECT_EQ(g.at(0, 0, 0), -3.0);
  EXPECT_EQ(g.at(0, 1, 0), 3.0);
}

TEST(Optimize, FixedPointWhenStyleEqualsContent) {
  const auto ex = reference_extractor();
  const auto img = fixture::random_image(16, 16, 11);
  auto cfg = default_config(ex);
  cfg.tv_weight = 0;
  cfg.iterations = 5;
  const auto r = optimize(img, img, ex, cfg);
  EXPECT_EQ(r.image.values, img.values);
}

TEST(Optimize, SnapshotsAndTrajectory) {
  const auto ex = reference_extractor();
  auto cfg = default_config(ex);
  cfg.iterations = 25;
  std::vector<int> seen_loss;
  NstObserver obs;
  obs.on_loss = [&](int it, const LossBreakdown&) { seen_loss.push_back(it); };
  const auto r = optimize(fixture::portrait(16, 16, 0), fixture::texture(16, 16, 0), ex, cfg, obs);
  std::vector<int> its;
  for (const auto& s : r.snapshots) its.push_back(s.iteration);
  EXPECT_EQ(its, (std::vector<int>{10, 20, 25}));
  EXPECT_EQ(r.trajectory.size(), 26u);
  EXPECT_EQ(seen_loss.size(), 26u);
  EXPECT_EQ(r.snapshots.back().image.values, r.image.values);
}

TEST(Optimize, ClampsAndIsDeterministic) {
  const auto ex = reference_extractor();
  auto cfg = default_config(ex);
  cfg.iterations = 8;
  cfg.step_size = 0.5;
  cfg.init = InitMode::kUniformNoise;
  cfg.seed = 17;
  const auto c = fixture::portrait(16, 16, 1), s = fixture::texture(16, 16, 2);
  const auto a = optimize(c, s, ex, cfg), b = optimize(c, s, ex, cfg);
  EXPECT_EQ(a.image.values, b.image.values);
  for (double v : a.image.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Optimize, PlainGdWithHalvingNeverIncreases) {
  const auto ex = reference_extractor();
  auto cfg = default_config(ex);
  cfg.optimizer = Optimizer::kPlainGd;
  cfg.iterations = 15;
  const auto r = optimize(fixture::portrait(16, 16, 0), fixture::texture(16, 16, 1), ex, cfg);
  for (std::size_t k = 1; k < r.trajectory.size(); ++k)
    EXPECT_LE(r.trajectory[k].total, r.trajectory[k - 1].total);
}

TEST(Optimize, RejectsBadConfig) {
  const auto ex = reference_extractor();
  auto cfg = default_config(ex);
  cfg.iterations = 0;
  EXPECT_THROW(optimize(ImageTensor(4, 4), ImageTensor(4, 4), ex, cfg), DomainError);
  cfg = default_config(ex);
  cfg.content_layer = 40;
  EXPECT_THROW(cfg.validate(ex), DomainError);
}

}  // namespace
}  // namespace fitroom::nst
