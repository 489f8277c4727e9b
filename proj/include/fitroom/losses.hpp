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
#include <cmath>
#include <span>
#include <vector>

#include "fitroom/error.hpp"
#include "fitroom/geometry.hpp"
#include "fitroom/image.hpp"

namespace fitroom {

// Guard for every log loss; probabilities are clamped to [eps, 1 - eps].
inline constexpr double kProbEps = 1e-7;

inline double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

// d smooth_l1 / dx; continuous at |x| = 1 where both branches give +-1.
inline double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0 ? 1.0 : -1.0;
}

inline double l_reg(const BoxDelta& t, const BoxDelta& t_star) {
  return smooth_l1(t.tx - t_star.tx) + smooth_l1(t.ty - t_star.ty) + smooth_l1(t.tw - t_star.tw) +
         smooth_l1(t.th - t_star.th);
}

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// Binary negative log likelihood (object vs. not object).
inline double l_cls(double p, int p_star) {
  const double q = clamp_prob(p);
  return -(p_star * std::log(q) + (1 - p_star) * std::log(1.0 - q));
}

// Categorical negative log likelihood over K + 1 classes, used by the box
// head's classification term.
inline double l_cls_multiclass(std::span<const double> probs, int label) {
  enforce(label >= 0 && static_cast<std::size_t>(label) < probs.size(), "class label ", label,
          " out of range for ", probs.size(), " classes");
  return -std::log(clamp_prob(probs[static_cast<std::size_t>(label)]));
}

// Anchors labelled "ignore" are dropped by the caller before building the batch.
struct RpnBatch {
  std::vector<double> p;
  std::vector<int> p_star;
  std::vector<BoxDelta> t;
  std::vector<BoxDelta> t_star;
  double n_cls = 1;
  double n_reg = 1;
  double lambda = 10.0;
};

struct RpnLoss {
  double total = 0;
  double cls_term = 0;
  double reg_term = 0;
};

inline RpnLoss rpn_loss(const RpnBatch& b) {
  const std::size_t n = b.p.size();
  enforce(b.p_star.size() == n && b.t.size() == n && b.t_star.size() == n,
          "rpn batch arrays must have equal length");
  enforce(b.n_cls >= 1 && b.n_reg >= 1, "n_cls and n_reg must be >= 1");
  enforce(b.lambda >= 0, "lambda must be nonnegative");
  double cls = 0.0, reg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    enforce(b.p_star[i] == 0 || b.p_star[i] == 1, "p_star must be 0 or 1");
    cls += l_cls(b.p[i], b.p_star[i]);
    if (b.p_star[i] == 1) reg += l_reg(b.t[i], b.t_star[i]);
  }
  RpnLoss out;
  out.cls_term = cls / b.n_cls;
  out.reg_term = b.lambda * reg / b.n_reg;
  out.total = out.cls_term + out.reg_term;
  return out;
}

// ---------------------------------------------------------------------------
// Mask head

// K x m x m logits, class-major.
struct MaskPrediction {
  int num_classes = 0;
  int resolution = 0;
  std::vector<double> logits;

  MaskPrediction() = default;
  MaskPrediction(int k, int m, double fill = 0.0) : num_classes(k), resolution(m) {
    enforce(k >= 1 && m >= 1, "mask prediction needs K >= 1 and m >= 1");
    logits.assign(static_cast<std::size_t>(k) * m * m, fill);
  }
  std::size_t plane() const { return static_cast<std::size_t>(resolution) * resolution; }
  double& at(int k, int y, int x) { return logits[k * plane() + y * resolution + x]; }
  double at(int k, int y, int x) const { return logits[k * plane() + y * resolution + x]; }
};

struct MaskTarget {
  int k = 0;
  BinaryMask mask;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {
inline void check_mask_shapes(const MaskPrediction& pred, const MaskTarget& target) {
  enforce(pred.logits.size() == static_cast<std::size_t>(pred.num_classes) * pred.plane(),
          "mask prediction size does not match K x m x m");
  enforce(target.k >= 0 && target.k < pred.num_classes, "target class ", target.k,
          " out of range for K = ", pred.num_classes);
  enforce(target.mask.height == pred.resolution && target.mask.width == pred.resolution,
          "target mask is ", target.mask.height, "x", target.mask.width, ", expected ",
          pred.resolution, "x", pred.resolution);
}
}  // namespace detail

// Mean per-pixel binary cross-entropy of sigmoid(channel k) against the
// target mask. Other channels are never read.
inline double mask_loss(const MaskPrediction& pred, const MaskTarget& target) {
  detail::check_mask_shapes(pred, target);
  const int m = pred.resolution;
  double acc = 0.0;
  for (int y = 0; y < m; ++y)
    for (int x = 0; x < m; ++x) {
      const double q = clamp_prob(sigmoid(pred.at(target.k, y, x)));
      acc += target.mask.at(y, x) ? -std::log(q) : -std::log(1.0 - q);
    }
  return acc / static_cast<double>(pred.plane());
}

// d mask_loss / d logits, shaped like pred.logits. Zero outside channel k
// and wherever the probability clamp is active.
inline std::vector<double> mask_loss_grad(const MaskPrediction& pred, const MaskTarget& target) {
  detail::check_mask_shapes(pred, target);
  std::vector<double> grad(pred.logits.size(), 0.0);
  const int m = pred.resolution;
  const double inv = 1.0 / static_cast<double>(pred.plane());
  for (int y = 0; y < m; ++y)
    for (int x = 0; x < m; ++x) {
      const double s = sigmoid(pred.at(target.k, y, x));
      if (s <= kProbEps || s >= 1.0 - kProbEps) continue;
      const double t = target.mask.at(y, x) ? 1.0 : 0.0;
      grad[target.k * pred.plane() + y * m + x] = (s - t) * inv;
    }
  return grad;
}

// Inference: sigmoid of channel k_hat, bilinear resize to the roi, then
// strictly-greater-than-0.5 threshold.
inline BinaryMask mask_postprocess(const MaskPrediction& pred, int k_hat, int roi_w, int roi_h) {
  enforce(k_hat >= 0 && k_hat < pred.num_classes, "predicted class ", k_hat,
          " out of range for K = ", pred.num_classes);
  enforce(roi_w > 0 && roi_h > 0, "roi dimensions must be positive, got ", roi_w, "x", roi_h);
  const int m = pred.resolution;
  std::vector<double> probs(pred.plane());
  for (int y = 0; y < m; ++y)
    for (int x = 0; x < m; ++x) probs[y * m + x] = sigmoid(pred.at(k_hat, y, x));
  const auto resized = resize_bilinear(probs, m, m, 1, roi_h, roi_w);
  BinaryMask out(roi_h, roi_w);
  for (std::size_t i = 0; i < resized.size(); ++i) out.bits[i] = resized[i] > 0.5 ? 1 : 0;
  return out;
}

// Sum of the five per-RoI terms. The box-head terms come from l_cls_multiclass
// and l_reg respectively.
inline double multi_task_total(double rpn_cls, double rpn_reg, double head_cls, double head_reg,
                               double mask) {
  for (double v : {rpn_cls, rpn_reg, head_cls, head_reg, mask})
    enforce(std::isfinite(v) && v >= 0, "loss terms must be finite and nonnegative, got ", v);
  return rpn_cls + rpn_reg + head_cls + head_reg + mask;
}

}  // namespace fitroom
