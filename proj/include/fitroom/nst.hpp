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

// Pixel-space neural style transfer: a small convolutional feature
// extractor with exact reverse-mode gradients, the content / Gram-style /
// total-variation objective, and the descent loop that optimizes pixels.

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fitroom/error.hpp"
#include "fitroom/image.hpp"
#include "fitroom/tensor.hpp"

namespace fitroom::nst {

// ---------------------------------------------------------------------------
// Layers

// Cross-correlation (no kernel flip), zero padding.
// weights are laid out [out][in][k][k].
struct ConvLayer {
  int out_channels = 0;
  int in_channels = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double w(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }
  bool operator==(const ConvLayer&) const = default;
};

struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};

struct AvgPoolLayer {
  int window = 2;
  int stride = 2;
  bool operator==(const AvgPoolLayer&) const = default;
};

using Layer = std::variant<ConvLayer, ReluLayer, AvgPoolLayer>;

namespace detail {

inline int conv_out(int in, int k, int stride, int pad) {
  const int span = in + 2 * pad - k;
  return span < 0 ? 0 : span / stride + 1;
}

inline Tensor3 conv_forward(const ConvLayer& L, const Tensor3& in) {
  const int oh = conv_out(in.height, L.kernel, L.stride, L.pad);
  const int ow = conv_out(in.width, L.kernel, L.stride, L.pad);
  enforce(oh >= 1 && ow >= 1, "conv output would be ", oh, "x", ow, " for input ", in.height, "x",
          in.width);
  Tensor3 out(L.out_channels, oh, ow);
  for (int o = 0; o < L.out_channels; ++o) {
    double* dst = &out.data[static_cast<std::size_t>(o) * out.plane()];
    std::fill(dst, dst + out.plane(), L.bias[o]);
    for (int i = 0; i < L.in_channels; ++i)
      for (int ky = 0; ky < L.kernel; ++ky)
        for (int kx = 0; kx < L.kernel; ++kx) {
          const double wv = L.w(o, i, ky, kx);
          for (int y = 0; y < oh; ++y) {
            const int sy = y * L.stride + ky - L.pad;
            if (sy < 0 || sy >= in.height) continue;
            const double* src = &in.data[(static_cast<std::size_t>(i) * in.height + sy) * in.width];
            double* row = dst + static_cast<std::size_t>(y) * ow;
            for (int x = 0; x < ow; ++x) {
              const int sx = x * L.stride + kx - L.pad;
              if (sx < 0 || sx >= in.width) continue;
              row[x] += wv * src[sx];
            }
          }
        }
  }
  return out;
}

inline Tensor3 conv_backward(const ConvLayer& L, const Tensor3& in, const Tensor3& gout) {
  Tensor3 gin(in.channels, in.height, in.width);
  for (int o = 0; o < L.out_channels; ++o)
    for (int i = 0; i < L.in_channels; ++i)
      for (int ky = 0; ky < L.kernel; ++ky)
        for (int kx = 0; kx < L.kernel; ++kx) {
          const double wv = L.w(o, i, ky, kx);
          for (int y = 0; y < gout.height; ++y) {
            const int sy = y * L.stride + ky - L.pad;
            if (sy < 0 || sy >= in.height) continue;
            double* dst = &gin.data[(static_cast<std::size_t>(i) * in.height + sy) * in.width];
            const double* g =
                &gout.data[(static_cast<std::size_t>(o) * gout.height + y) * gout.width];
            for (int x = 0; x < gout.width; ++x) {
              const int sx = x * L.stride + kx - L.pad;
              if (sx < 0 || sx >= in.width) continue;
              dst[sx] += wv * g[x];
            }
          }
        }
  return gin;
}

inline Tensor3 relu_forward(const Tensor3& in) {
  Tensor3 out = in;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Tensor3 relu_backward(const Tensor3& in, const Tensor3& gout) {
  Tensor3 gin = gout;
  for (std::size_t k = 0; k < gin.data.size(); ++k)
    if (!(in.data[k] > 0.0)) gin.data[k] = 0.0;
  return gin;
}

inline Tensor3 pool_forward(const AvgPoolLayer& L, const Tensor3& in) {
  const int oh = conv_out(in.height, L.window, L.stride, 0);
  const int ow = conv_out(in.width, L.window, L.stride, 0);
  enforce(oh >= 1 && ow >= 1, "avgpool output would be ", oh, "x", ow, " for input ", in.height,
          "x", in.width);
  Tensor3 out(in.channels, oh, ow);
  const double inv = 1.0 / (static_cast<double>(L.window) * L.window);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int dy = 0; dy < L.window; ++dy)
          for (int dx = 0; dx < L.window; ++dx)
            acc += in(c, y * L.stride + dy, x * L.stride + dx);
        out(c, y, x) = acc * inv;
      }
  return out;
}

inline Tensor3 pool_backward(const AvgPoolLayer& L, const Tensor3& in, const Tensor3& gout) {
  Tensor3 gin(in.channels, in.height, in.width);
  const double inv = 1.0 / (static_cast<double>(L.window) * L.window);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < gout.height; ++y)
      for (int x = 0; x < gout.width; ++x) {
        const double g = gout(c, y, x) * inv;
        for (int dy = 0; dy < L.window; ++dy)
          for (int dx = 0; dx < L.window; ++dx) gin(c, y * L.stride + dy, x * L.stride + dx) += g;
      }
  return gin;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feature extractor

class FeatureExtractor {
 public:
  FeatureExtractor() = default;

  explicit FeatureExtractor(std::vector<Layer> layers) : layers_(std::move(layers)) {
    enforce(!layers_.empty(), "feature extractor needs at least one layer");
    int channels = -1;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (const auto* conv = std::get_if<ConvLayer>(&layers_[l])) {
        enforce(conv->out_channels > 0 && conv->in_channels > 0 && conv->kernel > 0 &&
                    conv->stride > 0 && conv->pad >= 0,
                "layer ", l, ": invalid conv dimensions");
        enforce(conv->weights.size() == static_cast<std::size_t>(conv->out_channels) *
                                            conv->in_channels * conv->kernel * conv->kernel,
                "layer ", l, ": conv weight count does not match its shape");
        enforce(conv->bias.size() == static_cast<std::size_t>(conv->out_channels), "layer ", l,
                ": conv bias count does not match out_channels");
        if (channels < 0) input_channels_ = conv->in_channels;
        enforce(channels < 0 || conv->in_channels == channels, "layer ", l, ": conv expects ",
                conv->in_channels, " input channels but the previous layer produces ", channels);
        channels = conv->out_channels;
      } else if (const auto* pool = std::get_if<AvgPoolLayer>(&layers_[l])) {
        enforce(pool->window > 0 && pool->stride > 0, "layer ", l, ": invalid avgpool");
      }
    }
    enforce(channels > 0, "feature extractor needs at least one conv layer");
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  int input_channels() const { return input_channels_; }

  std::vector<std::size_t> conv_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t l = 0; l < layers_.size(); ++l)
      if (std::holds_alternative<ConvLayer>(layers_[l])) idx.push_back(l);
    return idx;
  }

  // Output index of each conv block: the relu directly after a conv if
  // there is one, otherwise the conv itself.
  std::vector<std::size_t> block_outputs() const {
    std::vector<std::size_t> out;
    for (std::size_t l : conv_indices()) {
      if (l + 1 < layers_.size() && std::holds_alternative<ReluLayer>(layers_[l + 1]))
        out.push_back(l + 1);
      else
        out.push_back(l);
    }
    return out;
  }

  // One activation per layer. Stops after `last` when given.
  std::vector<Tensor3> forward(const Tensor3& input,
                               std::optional<std::size_t> last = std::nullopt) const {
    enforce(input.channels == input_channels_, "extractor expects ", input_channels_,
            " input channels, got ", input.channels);
    const std::size_t n = last ? std::min(*last + 1, layers_.size()) : layers_.size();
    std::vector<Tensor3> acts;
    acts.reserve(n);
    for (std::size_t l = 0; l < n; ++l) {
      const Tensor3& in = l == 0 ? input : acts.back();
      acts.push_back(std::visit(
          [&](const auto& layer) -> Tensor3 {
            using T = std::decay_t<decltype(layer)>;
            if constexpr (std::is_same_v<T, ConvLayer>)
              return detail::conv_forward(layer, in);
            else if constexpr (std::is_same_v<T, ReluLayer>)
              return detail::relu_forward(in);
            else
              return detail::pool_forward(layer, in);
          },
          layers_[l]));
    }
    return acts;
  }

  // Reverse pass. output_grads[l], when present, is dLoss/d(activation l);
  // returns dLoss/d(input).
  Tensor3 backward(const Tensor3& input, const std::vector<Tensor3>& acts,
                   const std::map<std::size_t, Tensor3>& output_grads) const {
    Tensor3 grad_in(input.channels, input.height, input.width);
    if (output_grads.empty()) return grad_in;
    const std::size_t top = output_grads.rbegin()->first;
    enforce(top < acts.size(), "gradient supplied for layer ", top, " beyond the forward pass");
    std::optional<Tensor3> g;
    for (std::size_t l = top + 1; l-- > 0;) {
      if (auto it = output_grads.find(l); it != output_grads.end()) {
        enforce(it->second.same_shape(acts[l]), "gradient shape mismatch at layer ", l);
        if (!g) {
          g = it->second;
        } else {
          for (std::size_t k = 0; k < g->data.size(); ++k) g->data[k] += it->second.data[k];
        }
      }
      if (!g) continue;
      const Tensor3& in = l == 0 ? input : acts[l - 1];
      g = std::visit(
          [&](const auto& layer) -> Tensor3 {
            using T = std::decay_t<decltype(layer)>;
            if constexpr (std::is_same_v<T, ConvLayer>)
              return detail::conv_backward(layer, in, *g);
            else if constexpr (std::is_same_v<T, ReluLayer>)
              return detail::relu_backward(in, *g);
            else
              return detail::pool_backward(layer, in, *g);
          },
          layers_[l]);
    }
    return g ? *g : grad_in;
  }

  bool operator==(const FeatureExtractor&) const = default;

 private:
  std::vector<Layer> layers_;
  int input_channels_ = 0;
};

// ---------------------------------------------------------------------------
// Weight file
//
// Little-endian. "NSTW", u32 version (1), u32 layer count, then per layer a
// u32 type tag: 1 = conv (u32 out, in, k, stride, pad; f64 weights
// [out][in][k][k]; f64 bias[out]), 2 = relu (no payload), 3 = avgpool
// (u32 window, stride). The file ends with the CRC-32 (zlib polynomial) of
// every preceding byte.

inline constexpr std::uint32_t kWeightFileVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * b);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw IoError(fitroom::detail::concat("weight file truncated at byte ", pos_, " (need ", n, " more)"));
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_extractor(const FeatureExtractor& ex) {
  detail::ByteWriter w;
  w.raw("NSTW", 4);
  w.u32(kWeightFileVersion);
  w.u32(static_cast<std::uint32_t>(ex.size()));
  for (const auto& layer : ex.layers()) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      w.u32(1);
      w.u32(static_cast<std::uint32_t>(c->out_channels));
      w.u32(static_cast<std::uint32_t>(c->in_channels));
      w.u32(static_cast<std::uint32_t>(c->kernel));
      w.u32(static_cast<std::uint32_t>(c->stride));
      w.u32(static_cast<std::uint32_t>(c->pad));
      for (double v : c->weights) w.f64(v);
      for (double v : c->bias) w.f64(v);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      w.u32(2);
    } else {
      const auto& p = std::get<AvgPoolLayer>(layer);
      w.u32(3);
      w.u32(static_cast<std::uint32_t>(p.window));
      w.u32(static_cast<std::uint32_t>(p.stride));
    }
  }
  const std::uint32_t crc = detail::crc32_of(w.bytes());
  w.u32(crc);
  return std::move(w.bytes());
}

inline FeatureExtractor parse_extractor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw IoError("weight file truncated: too short for header and checksum");
  if (std::memcmp(bytes.data(), "NSTW", 4) != 0) throw IoError("weight file: bad magic");
  const auto body = bytes.first(bytes.size() - 4);
  detail::ByteReader tail(bytes.subspan(bytes.size() - 4));
  const std::uint32_t stored = tail.u32();
  detail::ByteReader r(body.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kWeightFileVersion)
    throw IoError(fitroom::detail::concat("weight file: unsupported version ", version));
  const std::uint32_t count = r.u32();
  // Bound allocations by what the payload can actually hold.
  auto checked_count = [&](std::uint64_t n, std::size_t unit) {
    if (n * unit > body.size()) throw IoError("weight file truncated: layer payload exceeds file");
    return static_cast<std::size_t>(n);
  };
  std::vector<Layer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t tag = r.u32();
    if (tag == 1) {
      ConvLayer c;
      c.out_channels = static_cast<int>(r.u32());
      c.in_channels = static_cast<int>(r.u32());
      c.kernel = static_cast<int>(r.u32());
      c.stride = static_cast<int>(r.u32());
      c.pad = static_cast<int>(r.u32());
      const std::uint64_t nw = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.out_channels)) *
                               static_cast<std::uint32_t>(c.in_channels) *
                               static_cast<std::uint32_t>(c.kernel) *
                               static_cast<std::uint32_t>(c.kernel);
      c.weights.resize(checked_count(nw, 8));
      for (double& v : c.weights) v = r.f64();
      c.bias.resize(checked_count(static_cast<std::uint32_t>(c.out_channels), 8));
      for (double& v : c.bias) v = r.f64();
      layers.emplace_back(std::move(c));
    } else if (tag == 2) {
      layers.emplace_back(ReluLayer{});
    } else if (tag == 3) {
      AvgPoolLayer p;
      p.window = static_cast<int>(r.u32());
      p.stride = static_cast<int>(r.u32());
      layers.emplace_back(p);
    } else {
      throw IoError(fitroom::detail::concat("weight file: unknown layer tag ", tag, " at layer ", l));
    }
  }
  if (r.pos() + 4 != body.size())
    throw IoError(fitroom::detail::concat("weight file: ", body.size() - 4 - r.pos(),
                                 " unexpected trailing bytes before checksum"));
  if (detail::crc32_of(body) != stored) throw IoError("weight file: checksum mismatch");
  try {
    return FeatureExtractor(std::move(layers));
  } catch (const DomainError& e) {
    throw DomainError(std::string("weight file: ") + e.what());
  }
}

inline void save_extractor(const FeatureExtractor& ex, const std::string& path) {
  const auto bytes = serialize_extractor(ex);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline FeatureExtractor load_extractor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read weight file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_extractor(bytes);
}

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// conv 3->8, relu, conv 8->16, relu, avgpool 2x2, conv 16->16, relu; all
// convs 3x3 / stride 1 / pad 1. Weights uniform in +-sqrt(3 / fan_in),
// biases uniform in +-0.05.
inline FeatureExtractor reference_extractor(std::uint64_t seed = 20190521) {
  std::mt19937_64 rng(seed);
  auto conv = [&](int in, int out) {
    ConvLayer c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel = 3;
    c.stride = 1;
    c.pad = 1;
    const double a = std::sqrt(3.0 / (in * 9.0));
    c.weights.resize(static_cast<std::size_t>(out) * in * 9);
    for (double& v : c.weights) v = (2.0 * unit_uniform(rng) - 1.0) * a;
    c.bias.resize(static_cast<std::size_t>(out));
    for (double& v : c.bias) v = (2.0 * unit_uniform(rng) - 1.0) * 0.05;
    return c;
  };
  std::vector<Layer> layers;
  layers.emplace_back(conv(3, 8));
  layers.emplace_back(ReluLayer{});
  layers.emplace_back(conv(8, 16));
  layers.emplace_back(ReluLayer{});
  layers.emplace_back(AvgPoolLayer{2, 2});
  layers.emplace_back(conv(16, 16));
  layers.emplace_back(ReluLayer{});
  return FeatureExtractor(std::move(layers));
}

// ---------------------------------------------------------------------------
// Loss terms

// Symmetric C x C Gram matrix of a feature map.
struct GramMatrix {
  int n = 0;
  std::vector<double> g;

  double operator()(int i, int j) const { return g[static_cast<std::size_t>(i) * n + j]; }
  bool operator==(const GramMatrix&) const = default;
};

// G = F F^T over the C x (H*W) view; each (i, j) with i <= j is computed
// once and mirrored.
inline GramMatrix gram(const Tensor3& f) {
  GramMatrix out{f.channels, std::vector<double>(static_cast<std::size_t>(f.channels) * f.channels)};
  const std::size_t m = f.plane();
  for (int i = 0; i < f.channels; ++i) {
    const double* fi = &f.data[i * m];
    for (int j = i; j < f.channels; ++j) {
      const double* fj = &f.data[j * m];
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += fi[k] * fj[k];
      out.g[static_cast<std::size_t>(i) * f.channels + j] = acc;
      out.g[static_cast<std::size_t>(j) * f.channels + i] = acc;
    }
  }
  return out;
}

inline double content_loss(const Tensor3& f, const Tensor3& p, double w_c) {
  enforce(f.same_shape(p), "content_loss: feature maps differ in shape");
  double acc = 0.0;
  for (std::size_t k = 0; k < f.data.size(); ++k) {
    const double d = f.data[k] - p.data[k];
    acc += d * d;
  }
  return w_c * acc;
}

inline double style_layer_loss(const GramMatrix& g, const GramMatrix& a, double w) {
  enforce(g.n == a.n, "style_loss: Gram sizes differ (", g.n, " vs ", a.n, ")");
  double acc = 0.0;
  for (std::size_t k = 0; k < g.g.size(); ++k) {
    const double d = g.g[k] - a.g[k];
    acc += d * d;
  }
  return w * acc;
}

// Sum over layers of w_l * ||G_l - A_l||_F^2. The three maps must name the
// same layers.
inline double style_loss(const std::map<std::size_t, GramMatrix>& current,
                         const std::map<std::size_t, GramMatrix>& style,
                         const std::map<std::size_t, double>& weights) {
  enforce(current.size() == style.size() && current.size() == weights.size(),
          "style_loss: layer sets differ");
  double total = 0.0;
  for (const auto& [layer, g] : current) {
    auto a = style.find(layer);
    auto w = weights.find(layer);
    enforce(a != style.end() && w != weights.end(), "style_loss: layer ", layer,
            " missing from targets or weights");
    total += style_layer_loss(g, a->second, w->second);
  }
  return total;
}

// w_t times the summed squared differences of vertically and horizontally
// adjacent pixels, per channel.
inline double tv_loss(const ImageTensor& img, double w_t) {
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i + 1 < img.height; ++i)
      for (int j = 0; j < img.width; ++j) {
        const double d = img.at(i + 1, j, c) - img.at(i, j, c);
        acc += d * d;
      }
    for (int i = 0; i < img.height; ++i)
      for (int j = 0; j + 1 < img.width; ++j) {
        const double d = img.at(i, j + 1, c) - img.at(i, j, c);
        acc += d * d;
      }
  }
  return w_t * acc;
}

inline ImageTensor tv_gradient(const ImageTensor& img, double w_t) {
  ImageTensor g = img;
  std::fill(g.values.begin(), g.values.end(), 0.0);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i + 1 < img.height; ++i)
      for (int j = 0; j < img.width; ++j) {
        const double d = 2.0 * w_t * (img.at(i + 1, j, c) - img.at(i, j, c));
        g.at(i + 1, j, c) += d;
        g.at(i, j, c) -= d;
      }
    for (int i = 0; i < img.height; ++i)
      for (int j = 0; j + 1 < img.width; ++j) {
        const double d = 2.0 * w_t * (img.at(i, j + 1, c) - img.at(i, j, c));
        g.at(i, j + 1, c) += d;
        g.at(i, j, c) -= d;
      }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Objective

enum class Optimizer { kPlainGd, kAdam };
enum class InitMode { kContentCopy, kUniformNoise };

struct NstConfig {
  std::size_t content_layer = 0;  // index into the extractor's layer list
  double content_weight = 1.0;
  std::map<std::size_t, double> style_weights;  // layer index -> w_l
  double tv_weight = 0.0;
  int iterations = 100;
  double step_size = 0.05;
  Optimizer optimizer = Optimizer::kAdam;
  bool step_halving = true;  // plain-gd only: halve and retry on loss increase
  int snapshot_interval = 10;
  InitMode init = InitMode::kContentCopy;
  std::uint64_t seed = 0;

  void validate(const FeatureExtractor& ex) const {
    enforce(content_layer < ex.size(), "content layer ", content_layer, " out of range");
    enforce(content_weight >= 0 && tv_weight >= 0, "loss weights must be nonnegative");
    for (const auto& [l, w] : style_weights) {
      enforce(l < ex.size(), "style layer ", l, " out of range");
      enforce(w >= 0, "style weight for layer ", l, " must be nonnegative");
    }
    enforce(iterations >= 1, "iterations must be >= 1");
    enforce(snapshot_interval >= 1, "snapshot interval must be >= 1");
    enforce(step_size > 0, "step size must be positive");
  }
};

// Content layer = second conv block, style = every conv block with equal
// weights, Adam with step 0.05 starting from the content image.
inline NstConfig default_config(const FeatureExtractor& ex) {
  NstConfig cfg;
  const auto blocks = ex.block_outputs();
  cfg.content_layer = blocks.size() > 1 ? blocks[1] : blocks[0];
  cfg.content_weight = 1.0;
  for (std::size_t l : blocks) cfg.style_weights[l] = 1e-3;
  cfg.tv_weight = 1.0;
  return cfg;
}

struct NstTargets {
  std::size_t content_layer = 0;
  Tensor3 content;                             // P at the content layer
  std::map<std::size_t, GramMatrix> style;     // A per style layer
};

inline NstTargets make_targets(const FeatureExtractor& ex, const ImageTensor& content_img,
                               const ImageTensor& style_img, const NstConfig& cfg) {
  cfg.validate(ex);
  NstTargets t;
  t.content_layer = cfg.content_layer;
  t.content = ex.forward(to_chw(content_img), cfg.content_layer)[cfg.content_layer];
  if (!cfg.style_weights.empty()) {
    const auto acts = ex.forward(to_chw(style_img), cfg.style_weights.rbegin()->first);
    for (const auto& [l, w] : cfg.style_weights) t.style[l] = gram(acts[l]);
  }
  return t;
}

struct LossBreakdown {
  double total = 0;
  double content = 0;
  double style = 0;
  double tv = 0;
};

namespace detail {
inline std::size_t deepest_layer(const NstConfig& cfg) {
  std::size_t top = cfg.content_layer;
  if (!cfg.style_weights.empty()) top = std::max(top, cfg.style_weights.rbegin()->first);
  return top;
}

inline LossBreakdown losses_from(const std::vector<Tensor3>& acts, const ImageTensor& img,
                                 const NstTargets& targets, const NstConfig& cfg) {
  LossBreakdown out;
  out.content = content_loss(acts[cfg.content_layer], targets.content, cfg.content_weight);
  for (const auto& [l, w] : cfg.style_weights) {
    auto a = targets.style.find(l);
    enforce(a != targets.style.end(), "no style target for layer ", l);
    out.style += style_layer_loss(gram(acts[l]), a->second, w);
  }
  out.tv = tv_loss(img, cfg.tv_weight);
  out.total = out.content + out.style + out.tv;
  return out;
}
}  // namespace detail

inline LossBreakdown total_loss(const FeatureExtractor& ex, const ImageTensor& img,
                                const NstTargets& targets, const NstConfig& cfg) {
  const auto acts = ex.forward(to_chw(img), detail::deepest_layer(cfg));
  return detail::losses_from(acts, img, targets, cfg);
}

struct LossAndGradient {
  LossBreakdown loss;
  ImageTensor gradient;
};

// Exact d total / d pixel. Feature-space gradients:
//   content: 2 w_c (F - P)
//   style:   4 w_l (G - A) F     (G symmetric)
// are pulled back through the extractor; the TV gradient is added in closed form.
inline LossAndGradient loss_and_gradient(const FeatureExtractor& ex, const ImageTensor& img,
                                         const NstTargets& targets, const NstConfig& cfg) {
  const Tensor3 input = to_chw(img);
  const auto acts = ex.forward(input, detail::deepest_layer(cfg));
  LossAndGradient out;
  out.loss = detail::losses_from(acts, img, targets, cfg);

  std::map<std::size_t, Tensor3> grads;
  auto add = [&](std::size_t l, Tensor3 g) {
    auto it = grads.find(l);
    if (it == grads.end()) {
      grads.emplace(l, std::move(g));
    } else {
      for (std::size_t k = 0; k < g.data.size(); ++k) it->second.data[k] += g.data[k];
    }
  };
  if (cfg.content_weight != 0.0) {
    const Tensor3& f = acts[cfg.content_layer];
    Tensor3 g = f;
    for (std::size_t k = 0; k < g.data.size(); ++k)
      g.data[k] = 2.0 * cfg.content_weight * (f.data[k] - targets.content.data[k]);
    add(cfg.content_layer, std::move(g));
  }
  for (const auto& [l, w] : cfg.style_weights) {
    if (w == 0.0) continue;
    const Tensor3& f = acts[l];
    const GramMatrix gm = gram(f);
    const GramMatrix& a = targets.style.at(l);
    const int c = f.channels;
    const std::size_t m = f.plane();
    Tensor3 g(f.channels, f.height, f.width);
    for (int i = 0; i < c; ++i) {
      double* gi = &g.data[i * m];
      for (int j = 0; j < c; ++j) {
        const double coeff = 4.0 * w * (gm(i, j) - a(i, j));
        if (coeff == 0.0) continue;
        const double* fj = &f.data[j * m];
        for (std::size_t k = 0; k < m; ++k) gi[k] += coeff * fj[k];
      }
    }
    add(l, std::move(g));
  }
  const Tensor3 gin = ex.backward(input, acts, grads);
  out.gradient = to_hwc(gin, img);
  if (cfg.tv_weight != 0.0) {
    const ImageTensor tg = tv_gradient(img, cfg.tv_weight);
    for (std::size_t k = 0; k < out.gradient.values.size(); ++k)
      out.gradient.values[k] += tg.values[k];
  }
  return out;
}

inline ImageTensor pixel_gradient(const FeatureExtractor& ex, const ImageTensor& img,
                                  const NstTargets& targets, const NstConfig& cfg) {
  return loss_and_gradient(ex, img, targets, cfg).gradient;
}

// ---------------------------------------------------------------------------
// Optimization loop

// Thrown when the objective stops being finite; carries the iteration.
class NonFiniteLoss : public DomainError {
 public:
  explicit NonFiniteLoss(int iteration)
      : DomainError(fitroom::detail::concat("non-finite loss at iteration ", iteration)),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct Snapshot {
  int iteration = 0;
  ImageTensor image;
};

struct NstResult {
  ImageTensor image;
  std::vector<Snapshot> snapshots;
  std::vector<LossBreakdown> trajectory;  // entry k: loss after k iterations
};

// Optional callbacks fired while optimize() runs, so callers can persist
// progress before a later iteration fails.
struct NstObserver {
  std::function<void(const Snapshot&)> on_snapshot;
  std::function<void(int, const LossBreakdown&)> on_loss;
};

namespace detail {
inline void clamp_to_range(ImageTensor& img) {
  for (std::size_t k = 0; k < img.values.size(); ++k) {
    const auto [lo, hi] = img.valid_range(static_cast<int>(k % 3));
    img.values[k] = std::clamp(img.values[k], lo, hi);
  }
}

inline void check_finite(const LossBreakdown& l, int iteration) {
  if (!std::isfinite(l.total)) throw NonFiniteLoss(iteration);
}
}  // namespace detail

// Gradient descent on pixels. Pixels are clamped to the valid range after
// every step; a snapshot is taken every snapshot_interval iterations and
// after the last one.
inline NstResult optimize(const ImageTensor& content, const ImageTensor& style,
                          const FeatureExtractor& ex, const NstConfig& cfg,
                          const NstObserver& observer = {}) {
  cfg.validate(ex);
  const NstTargets targets = make_targets(ex, content, style, cfg);

  ImageTensor x = content;
  if (cfg.init == InitMode::kUniformNoise) {
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t k = 0; k < x.values.size(); ++k) {
      const auto [lo, hi] = x.valid_range(static_cast<int>(k % 3));
      x.values[k] = lo + (hi - lo) * unit_uniform(rng);
    }
  }

  NstResult result;
  std::vector<double> m1(x.values.size(), 0.0), m2(x.values.size(), 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  double step = cfg.step_size;

  auto take_snapshot = [&](int it) {
    result.snapshots.push_back({it, x});
    if (observer.on_snapshot) observer.on_snapshot(result.snapshots.back());
  };

  LossAndGradient cur = loss_and_gradient(ex, x, targets, cfg);
  detail::check_finite(cur.loss, 0);
  result.trajectory.push_back(cur.loss);
  if (observer.on_loss) observer.on_loss(0, cur.loss);
  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto& g = cur.gradient.values;
    if (cfg.optimizer == Optimizer::kAdam) {
      const double c1 = 1.0 - std::pow(kBeta1, it), c2 = 1.0 - std::pow(kBeta2, it);
      for (std::size_t k = 0; k < x.values.size(); ++k) {
        m1[k] = kBeta1 * m1[k] + (1.0 - kBeta1) * g[k];
        m2[k] = kBeta2 * m2[k] + (1.0 - kBeta2) * g[k] * g[k];
        x.values[k] -= step * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + kAdamEps);
      }
      detail::clamp_to_range(x);
      cur = loss_and_gradient(ex, x, targets, cfg);
    } else if (!cfg.step_halving) {
      for (std::size_t k = 0; k < x.values.size(); ++k) x.values[k] -= step * g[k];
      detail::clamp_to_range(x);
      cur = loss_and_gradient(ex, x, targets, cfg);
    } else {
      // Backtracking: accept the first halved step that does not raise the
      // loss; after 60 halvings the iterate stays put.
      bool accepted = false;
      for (int tries = 0; tries < 60 && !accepted; ++tries) {
        ImageTensor trial = x;
        for (std::size_t k = 0; k < trial.values.size(); ++k) trial.values[k] -= step * g[k];
        detail::clamp_to_range(trial);
        LossAndGradient next = loss_and_gradient(ex, trial, targets, cfg);
        if (std::isfinite(next.loss.total) && next.loss.total <= cur.loss.total) {
          x = std::move(trial);
          cur = std::move(next);
          accepted = true;
        } else {
          step *= 0.5;
        }
      }
    }
    detail::check_finite(cur.loss, it);
    result.trajectory.push_back(cur.loss);
    if (observer.on_loss) observer.on_loss(it, cur.loss);
    if (it % cfg.snapshot_interval == 0 || it == cfg.iterations) take_snapshot(it);
  }
  result.image = x;
  return result;
}

}  // namespace fitroom::nst
