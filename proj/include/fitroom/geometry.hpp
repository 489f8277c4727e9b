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
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "fitroom/error.hpp"
#include "fitroom/tensor.hpp"

namespace fitroom {

// COCO convention: top-left corner plus extent, in pixels.
struct BoxXYWH {
  double x = 0, y = 0, w = 0, h = 0;

  double area() const { return w * h; }
  bool operator==(const BoxXYWH&) const = default;
};

// Center plus extent. Used for anchors and the delta parameterization.
struct BoxCenter {
  double cx = 0, cy = 0, w = 0, h = 0;

  bool operator==(const BoxCenter&) const = default;
};

// Regression target of a box relative to an anchor.
struct BoxDelta {
  double tx = 0, ty = 0, tw = 0, th = 0;

  bool operator==(const BoxDelta&) const = default;
};

inline BoxCenter to_center(const BoxXYWH& b) { return {b.x + b.w / 2, b.y + b.h / 2, b.w, b.h}; }
inline BoxXYWH to_xywh(const BoxCenter& b) { return {b.cx - b.w / 2, b.cy - b.h / 2, b.w, b.h}; }

inline double iou(const BoxXYWH& a, const BoxXYWH& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

inline double iou(const BoxCenter& a, const BoxCenter& b) { return iou(to_xywh(a), to_xywh(b)); }

// ---------------------------------------------------------------------------
// Anchors

struct AnchorConfig {
  std::vector<double> scales{32.0, 64.0, 128.0};
  std::vector<double> aspect_ratios{0.5, 1.0, 2.0};  // w : h
  double stride = 16.0;

  void validate() const {
    enforce(!scales.empty() && !aspect_ratios.empty(), "anchor config needs scales and ratios");
    enforce(stride > 0, "anchor stride must be positive");
    for (double s : scales) enforce(s > 0, "anchor scale must be positive, got ", s);
    for (double r : aspect_ratios) enforce(r > 0, "anchor ratio must be positive, got ", r);
  }
};

// Row-major over cells, then scale-major / ratio-minor within a cell.
// Each anchor has area scale^2 and w / h equal to its ratio.
inline std::vector<BoxCenter> generate_anchors(const AnchorConfig& cfg, int feat_h, int feat_w) {
  cfg.validate();
  std::vector<BoxCenter> anchors;
  anchors.reserve(static_cast<std::size_t>(std::max(0, feat_h * feat_w)) * cfg.scales.size() *
                  cfg.aspect_ratios.size());
  for (int i = 0; i < feat_h; ++i)
    for (int j = 0; j < feat_w; ++j)
      for (double s : cfg.scales)
        for (double r : cfg.aspect_ratios) {
          const double root = std::sqrt(r);
          anchors.push_back({(j + 0.5) * cfg.stride, (i + 0.5) * cfg.stride, s * root, s / root});
        }
  return anchors;
}

// ---------------------------------------------------------------------------
// Delta parameterization

inline BoxDelta encode_box(const BoxCenter& anchor, const BoxCenter& gt) {
  enforce(anchor.w > 0 && anchor.h > 0, "anchor must have positive extent");
  enforce(gt.w > 0 && gt.h > 0, "target box must have positive extent");
  return {(gt.cx - anchor.cx) / anchor.w, (gt.cy - anchor.cy) / anchor.h, std::log(gt.w / anchor.w),
          std::log(gt.h / anchor.h)};
}

inline BoxCenter decode_box(const BoxCenter& anchor, const BoxDelta& d) {
  enforce(std::isfinite(d.tx) && std::isfinite(d.ty) && std::isfinite(d.tw) &&
              std::isfinite(d.th),
          "non-finite box delta (", d.tx, ", ", d.ty, ", ", d.tw, ", ", d.th, ")");
  const double w = anchor.w * std::exp(d.tw);
  const double h = anchor.h * std::exp(d.th);
  enforce(std::isfinite(w) && std::isfinite(h), "box delta overflows on decode: (", d.tx, ", ",
          d.ty, ", ", d.tw, ", ", d.th, ")");
  // exp underflows to zero past about -745; keep the extent strictly positive.
  return {anchor.cx + d.tx * anchor.w, anchor.cy + d.ty * anchor.h,
          std::max(w, std::numeric_limits<double>::denorm_min()),
          std::max(h, std::numeric_limits<double>::denorm_min())};
}

// ---------------------------------------------------------------------------
// Anchor labeling

enum class AnchorLabel { kNegative = 0, kPositive = 1, kIgnore = 2 };

// An anchor is positive when it attains some gt box's highest IoU (all
// tied anchors qualify, provided that IoU is nonzero) or when its IoU with
// any gt exceeds pos_iou. Non-positive anchors whose best IoU is below
// neg_iou are negative; the rest are ignored.
inline std::vector<AnchorLabel> label_anchors(std::span<const BoxCenter> anchors,
                                              std::span<const BoxXYWH> gt_boxes,
                                              double pos_iou = 0.7, double neg_iou = 0.3) {
  enforce(0.0 <= neg_iou && neg_iou <= pos_iou && pos_iou <= 1.0,
          "label thresholds must satisfy 0 <= neg <= pos <= 1");
  std::vector<AnchorLabel> labels(anchors.size(), AnchorLabel::kNegative);
  if (gt_boxes.empty()) return labels;

  const std::size_t na = anchors.size(), ng = gt_boxes.size();
  std::vector<double> overlaps(na * ng);
  std::vector<double> best_for_anchor(na, 0.0);
  std::vector<double> best_for_gt(ng, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    const BoxXYWH ab = to_xywh(anchors[a]);
    for (std::size_t g = 0; g < ng; ++g) {
      const double v = iou(ab, gt_boxes[g]);
      overlaps[a * ng + g] = v;
      best_for_anchor[a] = std::max(best_for_anchor[a], v);
      best_for_gt[g] = std::max(best_for_gt[g], v);
    }
  }
  for (std::size_t a = 0; a < na; ++a) {
    bool positive = best_for_anchor[a] > pos_iou;
    for (std::size_t g = 0; g < ng && !positive; ++g)
      positive = best_for_gt[g] > 0.0 && overlaps[a * ng + g] == best_for_gt[g];
    if (positive)
      labels[a] = AnchorLabel::kPositive;
    else if (best_for_anchor[a] < neg_iou)
      labels[a] = AnchorLabel::kNegative;
    else
      labels[a] = AnchorLabel::kIgnore;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Non-maximum suppression

// Greedy: repeatedly keep the highest-scoring survivor (ties to the lower
// index) and drop every remaining box with IoU > iou_thresh against it.
inline std::vector<std::size_t> nms(std::span<const BoxXYWH> boxes, std::span<const double> scores,
                                    double iou_thresh = 0.7) {
  enforce(boxes.size() == scores.size(), "nms: ", boxes.size(), " boxes but ", scores.size(),
          " scores");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::uint8_t> suppressed(boxes.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou(boxes[i], boxes[j]) > iou_thresh) suppressed[j] = 1;
    }
  }
  return keep;
}

// ---------------------------------------------------------------------------
// RoI feature extraction

namespace detail {

// Feature cell (r, c) is centered at (c + 0.5, r + 0.5). Coordinates are
// clamped to the outermost cell centers before interpolating.
inline double bilinear_at(const Tensor3& feat, int c, double x, double y) {
  const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(feat.width - 1));
  const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(feat.height - 1));
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, feat.width - 1);
  const int y1 = std::min(y0 + 1, feat.height - 1);
  const double fx = u - x0, fy = v - y0;
  const double top = feat(c, y0, x0) * (1.0 - fx) + feat(c, y0, x1) * fx;
  const double bot = feat(c, y1, x0) * (1.0 - fx) + feat(c, y1, x1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

}  // namespace detail

// Quantization-free pooling: the roi is split into out_size x out_size equal
// bins, each bin averages samples_per_bin^2 regularly spaced interior
// bilinear samples.
inline Tensor3 roi_align(const Tensor3& feat, const BoxXYWH& roi, int out_size,
                         int samples_per_bin = 2) {
  enforce(roi.w > 0 && roi.h > 0, "roi_align: roi must have positive extent");
  enforce(out_size >= 1 && samples_per_bin >= 1, "roi_align: out_size and samples must be >= 1");
  Tensor3 out(feat.channels, out_size, out_size);
  const double bin_w = roi.w / out_size, bin_h = roi.h / out_size;
  const int s = samples_per_bin;
  const double inv = 1.0 / (static_cast<double>(s) * s);
  for (int c = 0; c < feat.channels; ++c)
    for (int by = 0; by < out_size; ++by)
      for (int bx = 0; bx < out_size; ++bx) {
        double acc = 0.0;
        for (int sy = 0; sy < s; ++sy) {
          const double y = roi.y + by * bin_h + (sy + 0.5) * bin_h / s;
          for (int sx = 0; sx < s; ++sx) {
            const double x = roi.x + bx * bin_w + (sx + 0.5) * bin_w / s;
            acc += detail::bilinear_at(feat, c, x, y);
          }
        }
        out(c, by, bx) = acc * inv;
      }
  return out;
}

// Classic quantized pooling: the roi snaps to whole cells
// [floor(x), floor(x + w)) and each bin takes the max over its cells.
inline Tensor3 roi_pool(const Tensor3& feat, const BoxXYWH& roi, int out_size) {
  enforce(roi.w > 0 && roi.h > 0, "roi_pool: roi must have positive extent");
  enforce(out_size >= 1, "roi_pool: out_size must be >= 1");
  const int x0 = static_cast<int>(std::floor(roi.x));
  const int y0 = static_cast<int>(std::floor(roi.y));
  const int x1 = static_cast<int>(std::floor(roi.x + roi.w));
  const int y1 = static_cast<int>(std::floor(roi.y + roi.h));
  const int rw = x1 - x0, rh = y1 - y0;
  enforce(rw > 0 && rh > 0, "roi_pool: roi [", roi.x, ", ", roi.y, ", ", roi.w, ", ", roi.h,
          "] collapses to zero cells");
  Tensor3 out(feat.channels, out_size, out_size);
  for (int by = 0; by < out_size; ++by) {
    const int ys = std::clamp(y0 + (by * rh) / out_size, 0, feat.height);
    const int ye = std::clamp(y0 + ((by + 1) * rh + out_size - 1) / out_size, 0, feat.height);
    for (int bx = 0; bx < out_size; ++bx) {
      const int xs = std::clamp(x0 + (bx * rw) / out_size, 0, feat.width);
      const int xe = std::clamp(x0 + ((bx + 1) * rw + out_size - 1) / out_size, 0, feat.width);
      for (int c = 0; c < feat.channels; ++c) {
        if (ys >= ye || xs >= xe) {
          out(c, by, bx) = 0.0;
          continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (int y = ys; y < ye; ++y)
          for (int x = xs; x < xe; ++x) best = std::max(best, feat(c, y, x));
        out(c, by, bx) = best;
      }
    }
  }
  return out;
}

}  // namespace fitroom
