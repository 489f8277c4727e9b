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
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "fitroom/error.hpp"
#include "fitroom/geometry.hpp"
#include "fitroom/image.hpp"

namespace fitroom {

struct Detection {
  long long image_id = 0;
  int category_id = 0;
  BoxXYWH box;
  double score = 0;
  std::optional<BinaryMask> mask;
};

// Cumulative precision/recall in descending-score order.
struct PrCurve {
  std::vector<double> precisions;
  std::vector<double> recalls;
  std::size_t n_gt = 0;
};

struct AsdrPair {
  double s_before = 0;
  double s_after = 0;
  int category_id = 0;
};

// Indices sorted by descending score, ties to the lower index.
inline std::vector<std::size_t> score_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Greedy matching given an overlap callback overlap(det, gt). In score
// order each detection claims the unclaimed gt with the highest overlap
// (ties to the lower gt index) when that overlap is >= iou_thresh.
// Returns per-detection flags in input order, 1 = TP.
inline std::vector<std::uint8_t> match_by_overlap(
    std::span<const double> scores, std::size_t n_gt,
    const std::function<double(std::size_t, std::size_t)>& overlap, double iou_thresh = 0.5) {
  std::vector<std::uint8_t> flags(scores.size(), 0);
  std::vector<std::uint8_t> claimed(n_gt, 0);
  for (std::size_t d : score_order(scores)) {
    double best = -1.0;
    std::size_t best_g = n_gt;
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (claimed[g]) continue;
      const double v = overlap(d, g);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < n_gt && best >= iou_thresh) {
      claimed[best_g] = 1;
      flags[d] = 1;
    }
  }
  return flags;
}

// Box matching for detections of one image and one category.
inline std::vector<std::uint8_t> match_detections(std::span<const Detection> dets,
                                                  std::span<const BoxXYWH> gts,
                                                  double iou_thresh = 0.5) {
  std::vector<double> scores;
  scores.reserve(dets.size());
  for (const auto& d : dets) scores.push_back(d.score);
  return match_by_overlap(
      scores, gts.size(), [&](std::size_t d, std::size_t g) { return iou(dets[d].box, gts[g]); },
      iou_thresh);
}

inline PrCurve pr_curve(std::span<const std::uint8_t> flags, std::span<const double> scores,
                        std::size_t n_gt) {
  enforce(flags.size() == scores.size(), "pr_curve: ", flags.size(), " flags but ", scores.size(),
          " scores");
  PrCurve curve;
  curve.n_gt = n_gt;
  std::size_t tp = 0, fp = 0;
  for (std::size_t d : score_order(scores)) {
    if (flags[d])
      ++tp;
    else
      ++fp;
    curve.precisions.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    // FN = n_gt - TP, so TP + FN = n_gt.
    curve.recalls.push_back(n_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  return curve;
}

// Pads precisions with 1 in front and 0 at the back, recalls with 0 in
// front and 1 at the back, then sums (r[i] - r[i-1]) * p[i] for i >= 1.
// A category without ground truth scores 0.
inline double average_precision(const PrCurve& curve) {
  enforce(curve.precisions.size() == curve.recalls.size(), "PR curve lengths differ");
  if (curve.n_gt == 0) return 0.0;
  std::vector<double> p, r;
  p.reserve(curve.precisions.size() + 2);
  r.reserve(curve.recalls.size() + 2);
  p.push_back(1.0);
  r.push_back(0.0);
  p.insert(p.end(), curve.precisions.begin(), curve.precisions.end());
  r.insert(r.end(), curve.recalls.begin(), curve.recalls.end());
  p.push_back(0.0);
  r.push_back(1.0);
  double ap = 0.0;
  for (std::size_t i = 1; i < r.size(); ++i) ap += (r[i] - r[i - 1]) * p[i];
  return ap;
}

inline double mean_ap(const std::map<int, double>& per_category_aps) {
  enforce(!per_category_aps.empty(), "mean_ap: no categories with ground truth");
  double acc = 0.0;
  for (const auto& [cat, ap] : per_category_aps) acc += ap;
  return acc / static_cast<double>(per_category_aps.size());
}

// ---------------------------------------------------------------------------
// Dataset-level mAP

struct GroundTruthItem {
  long long image_id = 0;
  int category_id = 0;
  BoxXYWH box;
  std::optional<BinaryMask> mask;
};

struct CategoryResult {
  int category_id = 0;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  double ap = 0;
  PrCurve curve;
};

struct MapReport {
  bool mask_iou = false;
  double iou_thresh = 0.5;
  std::vector<CategoryResult> categories;  // ascending id, gt-bearing only
  std::vector<int> excluded;               // predicted categories with no gt
  double map = 0;
};

// Matches per (image, category), pools flags across images per category and
// averages AP over categories that have ground truth.
inline MapReport evaluate_map(std::span<const GroundTruthItem> gts, std::span<const Detection> dets,
                              double iou_thresh = 0.5, bool use_mask_iou = false) {
  using Key = std::pair<int, long long>;
  std::map<Key, std::vector<std::size_t>> gt_groups, det_groups;
  std::map<int, std::size_t> gt_count;
  std::set<int> det_cats;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    gt_groups[{gts[i].category_id, gts[i].image_id}].push_back(i);
    ++gt_count[gts[i].category_id];
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    enforce(std::isfinite(dets[i].score) && dets[i].score >= 0 && dets[i].score <= 1,
            "detection score must be in [0, 1], got ", dets[i].score);
    det_groups[{dets[i].category_id, dets[i].image_id}].push_back(i);
    det_cats.insert(dets[i].category_id);
  }

  std::map<int, std::vector<double>> cat_scores;
  std::map<int, std::vector<std::uint8_t>> cat_flags;
  for (const auto& [key, det_idx] : det_groups) {
    static const std::vector<std::size_t> kNone;
    auto it = gt_groups.find(key);
    const auto& gt_idx = it == gt_groups.end() ? kNone : it->second;
    std::vector<double> scores;
    for (std::size_t d : det_idx) scores.push_back(dets[d].score);
    auto overlap = [&](std::size_t d, std::size_t g) {
      const Detection& det = dets[det_idx[d]];
      const GroundTruthItem& gt = gts[gt_idx[g]];
      if (use_mask_iou) {
        enforce(det.mask.has_value() && gt.mask.has_value(),
                "mask IoU mode needs masks on every detection and ground-truth item");
        return mask_iou(*det.mask, *gt.mask);
      }
      return iou(det.box, gt.box);
    };
    const auto flags = match_by_overlap(scores, gt_idx.size(), overlap, iou_thresh);
    auto& cs = cat_scores[key.first];
    auto& cf = cat_flags[key.first];
    cs.insert(cs.end(), scores.begin(), scores.end());
    cf.insert(cf.end(), flags.begin(), flags.end());
  }

  MapReport report;
  report.mask_iou = use_mask_iou;
  report.iou_thresh = iou_thresh;
  std::map<int, double> aps;
  for (const auto& [cat, n] : gt_count) {
    CategoryResult res;
    res.category_id = cat;
    res.n_gt = n;
    res.n_det = cat_scores[cat].size();
    res.curve = pr_curve(cat_flags[cat], cat_scores[cat], n);
    res.ap = average_precision(res.curve);
    aps[cat] = res.ap;
    report.categories.push_back(std::move(res));
  }
  for (int c : det_cats)
    if (!gt_count.count(c)) report.excluded.push_back(c);
  report.map = mean_ap(aps);
  return report;
}

// ---------------------------------------------------------------------------
// ASDR

// Pairs each before-item (in descending before-score order) with the unused
// same-category after-item of highest IoU, if that IoU >= 0.5. Unmatched
// before-items get s_after = 0. Output follows the input order of `before`.
inline std::vector<AsdrPair> correspond_items(std::span<const Detection> before,
                                              std::span<const Detection> after,
                                              double iou_thresh = 0.5) {
  std::vector<AsdrPair> pairs(before.size());
  std::vector<double> scores;
  for (const auto& d : before) scores.push_back(d.score);
  std::vector<std::uint8_t> used(after.size(), 0);
  for (std::size_t b : score_order(scores)) {
    pairs[b] = {before[b].score, 0.0, before[b].category_id};
    double best = -1.0;
    std::size_t best_a = after.size();
    for (std::size_t a = 0; a < after.size(); ++a) {
      if (used[a] || after[a].category_id != before[b].category_id) continue;
      const double v = iou(before[b].box, after[a].box);
      if (v > best) {
        best = v;
        best_a = a;
      }
    }
    if (best_a < after.size() && best >= iou_thresh) {
      used[best_a] = 1;
      pairs[b].s_after = after[best_a].score;
    }
  }
  return pairs;
}

// Mean over items of max(S_before - S_after, 0) / S_before.
inline double asdr(std::span<const AsdrPair> pairs) {
  enforce(!pairs.empty(), "asdr: no item pairs");
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    enforce(pairs[i].s_before > 0, "asdr: pair ", i, " (category ", pairs[i].category_id,
            ") has s_before = ", pairs[i].s_before, "; must be > 0");
    acc += std::max(pairs[i].s_before - pairs[i].s_after, 0.0) / pairs[i].s_before;
  }
  return acc / static_cast<double>(pairs.size());
}

}  // namespace fitroom
