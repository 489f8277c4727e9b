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

#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace fitroom::cli {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || base_dir.empty()) return p;
  return (fs::path(base_dir) / p).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(what + ": " + e.what());
  }
}

// Runs fn and converts library exceptions into exit codes.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomainFailure;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainFailure;
  }
}

std::string loss_csv_header() { return "iter,total,content,style,tv\n"; }

std::string loss_csv_row(int it, const nst::LossBreakdown& l) {
  return std::to_string(it) + "," + fixed(l.total, 10) + "," + fixed(l.content, 10) + "," +
         fixed(l.style, 10) + "," + fixed(l.tv, 10) + "\n";
}

std::string snapshot_name(int it) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%06d.png", it);
  return buf;
}

// Streams snapshots and loss rows to disk while the optimizer runs.
nst::NstResult run_nst_to_dir(const ImageTensor& content, const ImageTensor& style,
                              const nst::FeatureExtractor& ex, const nst::NstConfig& cfg,
                              const std::string& dir, const std::string& csv_path) {
  ensure_dir(dir);
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot open '" + csv_path + "' for writing");
  csv << loss_csv_header();
  nst::NstObserver obs;
  obs.on_snapshot = [&](const nst::Snapshot& s) {
    png::write_rgb((fs::path(dir) / snapshot_name(s.iteration)).string(), s.image);
  };
  obs.on_loss = [&](int it, const nst::LossBreakdown& l) {
    csv << loss_csv_row(it, l);
    csv.flush();
  };
  return nst::optimize(content, style, ex, cfg, obs);
}

nst::FeatureExtractor load_or_reference(const std::string& weights) {
  return weights.empty() ? nst::reference_extractor() : nst::load_extractor(weights);
}

int thread_cap() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("FITROOM_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) n = std::min(n, v);
  }
  return n;
}

std::vector<GroundTruthItem> ground_truth_items(const AnnotationDocument& doc, bool need_masks) {
  std::map<long long, const ImageInfo*> dims;
  for (const auto& im : doc.images) dims[im.id] = &im;
  std::vector<GroundTruthItem> items;
  for (const auto& r : doc.records) {
    GroundTruthItem g{r.image_id, r.category_id, r.bbox, std::nullopt};
    if (need_masks) {
      auto it = dims.find(r.image_id);
      enforce(it != dims.end() && it->second->width > 0 && it->second->height > 0,
              "mask IoU needs width/height for image ", r.image_id, " in the 'images' array");
      g.mask = rasterize(r.segmentation, it->second->height, it->second->width);
    }
    items.push_back(std::move(g));
  }
  return items;
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Detection> parse_detections(const std::string& text, const std::string& base_dir,
                                        bool load_masks) {
  const json arr = parse_json(text, "detections");
  enforce(arr.is_array(), "detections: expected a JSON array");
  std::vector<Detection> dets;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& d = arr[i];
    enforce(d.is_object() && d.contains("image_id") && d.contains("category_id") &&
                d.contains("bbox") && d.contains("score"),
            "detection ", i, ": needs image_id, category_id, bbox, score");
    const json& b = d["bbox"];
    enforce(b.is_array() && b.size() == 4, "detection ", i, ": bbox must have 4 numbers");
    Detection det;
    det.image_id = d["image_id"].get<long long>();
    det.category_id = d["category_id"].get<int>();
    det.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    det.score = d["score"].get<double>();
    enforce(std::isfinite(det.score) && det.score >= 0 && det.score <= 1, "detection ", i,
            ": score must be in [0, 1]");
    if (load_masks && d.contains("mask_png") && d["mask_png"].is_string())
      det.mask = png::read_mask(resolve(base_dir, d["mask_png"].get<std::string>()));
    dets.push_back(std::move(det));
  }
  return dets;
}

std::string detections_to_json(const std::vector<Detection>& dets) {
  json arr = json::array();
  for (const auto& d : dets)
    arr.push_back({{"image_id", d.image_id},
                   {"category_id", d.category_id},
                   {"bbox", {d.box.x, d.box.y, d.box.w, d.box.h}},
                   {"score", d.score}});
  return arr.dump(2) + "\n";
}

nst::NstConfig apply_overrides(const nst::FeatureExtractor& ex, const NstOverrides& o) {
  nst::NstConfig cfg = nst::default_config(ex);
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.step_size) cfg.step_size = *o.step_size;
  if (o.content_weight) cfg.content_weight = *o.content_weight;
  if (o.style_weight)
    for (auto& [l, w] : cfg.style_weights) w = *o.style_weight;
  if (o.tv_weight) cfg.tv_weight = *o.tv_weight;
  if (o.optimizer) {
    if (*o.optimizer == "adam")
      cfg.optimizer = nst::Optimizer::kAdam;
    else if (*o.optimizer == "gd")
      cfg.optimizer = nst::Optimizer::kPlainGd;
    else
      throw DomainError("unknown optimizer '" + *o.optimizer + "' (use adam or gd)");
  }
  if (o.step_halving) cfg.step_halving = *o.step_halving;
  if (o.snapshot_interval) cfg.snapshot_interval = *o.snapshot_interval;
  if (o.init) {
    if (*o.init == "content")
      cfg.init = nst::InitMode::kContentCopy;
    else if (*o.init == "noise")
      cfg.init = nst::InitMode::kUniformNoise;
    else
      throw DomainError("unknown init '" + *o.init + "' (use content or noise)");
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.content_layer) cfg.content_layer = *o.content_layer;
  cfg.validate(ex);
  return cfg;
}

// ---------------------------------------------------------------------------
// Manifest

RunManifest parse_manifest(const std::string& text, const std::string& base_dir) {
  const json m = parse_json(text, "manifest");
  enforce(m.is_object(), "manifest: expected a JSON object");
  RunManifest r;
  enforce(m.contains("content_image"), "manifest: missing content_image");
  r.content_image = resolve(base_dir, m["content_image"].get<std::string>());
  r.annotations = resolve(base_dir, m.value("annotations", std::string{}));
  if (m.contains("image_id")) r.image_id = m["image_id"].get<long long>();
  r.masks_dir = resolve(base_dir, m.value("masks_dir", std::string{}));
  enforce(!r.annotations.empty() || !r.masks_dir.empty(),
          "manifest: needs annotations or masks_dir");
  if (m.contains("selections")) {
    for (const auto& s : m["selections"]) {
      Selection sel;
      sel.category_id = s.at("category_id").get<int>();
      sel.style_image = resolve(base_dir, s.at("style_image").get<std::string>());
      r.selections.push_back(std::move(sel));
    }
  }
  if (m.contains("nst")) {
    const json& n = m["nst"];
    auto opt = [&](const char* k, auto& field) {
      using T = typename std::decay_t<decltype(field)>::value_type;
      if (n.contains(k)) field = n[k].get<T>();
    };
    opt("iterations", r.nst.iterations);
    opt("step_size", r.nst.step_size);
    opt("content_weight", r.nst.content_weight);
    opt("style_weight", r.nst.style_weight);
    opt("tv_weight", r.nst.tv_weight);
    opt("optimizer", r.nst.optimizer);
    opt("step_halving", r.nst.step_halving);
    opt("snapshot_interval", r.nst.snapshot_interval);
    opt("init", r.nst.init);
    opt("seed", r.nst.seed);
    opt("content_layer", r.nst.content_layer);
  }
  r.weights = resolve(base_dir, m.value("weights", std::string{}));
  r.detections_before = resolve(base_dir, m.value("detections_before", std::string{}));
  r.detections_after = resolve(base_dir, m.value("detections_after", std::string{}));
  r.target_size = m.value("target_size", 256);
  r.feather_radius = m.value("feather_radius", 0);
  enforce(m.contains("output_dir"), "manifest: missing output_dir");
  r.output_dir = resolve(base_dir, m["output_dir"].get<std::string>());
  enforce(r.target_size > 0, "manifest: target_size must be positive");
  enforce(r.feather_radius >= 0, "manifest: feather_radius must be >= 0");
  return r;
}

RunManifest load_manifest(const std::string& path) {
  return parse_manifest(read_text(path), fs::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

// Maps a mask into the preprocessed frame: used as-is at target size, or
// padded and resized like the content image when it matches the source size.
BinaryMask mask_to_target(const BinaryMask& m, int src_h, int src_w, int target) {
  if (m.height == target && m.width == target) return m;
  enforce(m.height == src_h && m.width == src_w, "mask is ", m.height, "x", m.width,
          "; expected ", target, "x", target, " or the content size ", src_h, "x", src_w);
  ImageTensor as_image(m.height, m.width);
  for (int i = 0; i < m.height; ++i)
    for (int j = 0; j < m.width; ++j)
      for (int c = 0; c < 3; ++c) as_image.at(i, j, c) = m.at(i, j) ? 1.0 : 0.0;
  const auto pre = preprocess(as_image, target);
  BinaryMask out(target, target);
  for (int i = 0; i < target; ++i)
    for (int j = 0; j < target; ++j) out.set(i, j, pre.image.at(i, j, 0) > 0.5);
  return out;
}

}  // namespace

RunOutcome run_pipeline(const RunManifest& manifest, std::ostream& log) {
  const ImageTensor content = png::read_rgb(manifest.content_image);
  const Preprocessed pre = preprocess(content, manifest.target_size);
  const int target = manifest.target_size;

  // Candidate masks per category, in the preprocessed frame.
  std::map<int, BinaryMask> available;
  long long image_id = manifest.image_id.value_or(0);
  if (!manifest.masks_dir.empty()) {
    for (const auto& entry : fs::directory_iterator(manifest.masks_dir)) {
      const std::string name = entry.path().filename().string();
      int cat = 0;
      char tail[8] = {0};
      if (std::sscanf(name.c_str(), "mask_%d.%4s", &cat, tail) == 2 && std::string(tail) == "png")
        available[cat] = mask_to_target(png::read_mask(entry.path().string()), content.height,
                                        content.width, target);
    }
  } else {
    const auto doc = parse_annotation_document(read_text(manifest.annotations));
    for (const auto& issue : validate_records(doc.records, CategoryTable::modanet_default()))
      if (issue.severity == AnnotationIssue::Severity::kError)
        throw ValidationError(issue.message, issue.annotation_id);
    std::set<long long> ids;
    for (const auto& r : doc.records) ids.insert(r.image_id);
    if (!manifest.image_id) {
      enforce(ids.size() <= 1, "manifest: annotation file covers ", ids.size(),
              " images; set image_id");
      if (!ids.empty()) image_id = *ids.begin();
    }
    std::map<int, std::vector<Polygon>> polys;
    for (const auto& r : doc.records) {
      if (r.image_id != image_id) continue;
      const AnnotationRecord mapped = pre.pad.map_record(r);
      auto& dst = polys[r.category_id];
      dst.insert(dst.end(), mapped.segmentation.begin(), mapped.segmentation.end());
    }
    for (const auto& [cat, ps] : polys) {
      std::vector<std::string> warnings;
      available[cat] = rasterize(ps, target, target, &warnings);
      for (const auto& w : warnings) log << "warning: category " << cat << ": " << w << "\n";
    }
  }

  for (const auto& sel : manifest.selections) {
    if (!available.count(sel.category_id)) {
      std::string list;
      for (const auto& [cat, m] : available) list += (list.empty() ? "" : ", ") + std::to_string(cat);
      throw DomainError(detail::concat("selected category ", sel.category_id,
                                       " is not present; available categories: [", list, "]"));
    }
  }

  ensure_dir(manifest.output_dir);
  const fs::path out_dir(manifest.output_dir);
  const nst::FeatureExtractor ex = load_or_reference(manifest.weights);
  const nst::NstConfig cfg = apply_overrides(ex, manifest.nst);

  RunOutcome outcome;
  outcome.preprocessed = pre.image;
  for (const auto& sel : manifest.selections)
    outcome.masks[sel.category_id] = available.at(sel.category_id);

  // Style transfer per selection; jobs write to disjoint files.
  std::vector<std::pair<int, std::future<ImageTensor>>> jobs;
  const int cap = thread_cap();
  auto job = [&](const Selection& sel) {
    const ImageTensor style = preprocess(png::read_rgb(sel.style_image), target).image;
    const std::string tag = "cat" + std::to_string(sel.category_id);
    auto result = run_nst_to_dir(pre.image, style, ex, cfg, (out_dir / ("nst_" + tag)).string(),
                                 (out_dir / ("loss_" + tag + ".csv")).string());
    return result.image;
  };
  std::size_t next = 0;
  while (next < manifest.selections.size()) {
    std::vector<std::pair<int, std::future<ImageTensor>>> batch;
    for (int k = 0; k < cap && next < manifest.selections.size(); ++k, ++next) {
      const Selection& sel = manifest.selections[next];
      batch.emplace_back(sel.category_id, std::async(std::launch::async, job, std::cref(sel)));
    }
    for (auto& [cat, fut] : batch) outcome.stylized[cat] = fut.get();
  }

  // Masks are applied in ascending category id; later ids win on overlap.
  ImageTensor current = pre.image;
  for (const auto& [cat, stylized] : outcome.stylized)
    current = composite({current, stylized, outcome.masks.at(cat), manifest.feather_radius});
  outcome.composite = current;

  png::write_rgb((out_dir / "preprocessed.png").string(), outcome.preprocessed);
  png::write_rgb((out_dir / "composite.png").string(), outcome.composite);
  for (const auto& [cat, m] : outcome.masks)
    png::write_mask((out_dir / ("mask_" + std::to_string(cat) + ".png")).string(), m);
  for (const auto& [cat, img] : outcome.stylized)
    png::write_rgb((out_dir / ("stylized_" + std::to_string(cat) + ".png")).string(), img);

  // Detection dumps for eval-asdr. External detector output is filtered to
  // the selected categories; otherwise the masks stand in as a detector
  // that reports every selected item with confidence 1.
  std::set<int> selected;
  for (const auto& sel : manifest.selections) selected.insert(sel.category_id);
  auto external = [&](const std::string& path) {
    std::vector<Detection> keep;
    for (auto& d : parse_detections(read_text(path), "", false))
      if (selected.count(d.category_id)) keep.push_back(std::move(d));
    return keep;
  };
  std::vector<Detection> stand_in;
  for (const auto& [cat, m] : outcome.masks)
    if (!m.empty()) stand_in.push_back({image_id, cat, bbox_from_mask(m), 1.0, std::nullopt});
  write_text((out_dir / "detections_before.json").string(),
             detections_to_json(manifest.detections_before.empty()
                                    ? stand_in
                                    : external(manifest.detections_before)));
  write_text((out_dir / "detections_after.json").string(),
             detections_to_json(manifest.detections_after.empty()
                                    ? stand_in
                                    : external(manifest.detections_after)));
  return outcome;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_validate(const std::string& annotations_path, const std::string& categories_path,
                 std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string text = read_text(annotations_path);
    const CategoryTable table = categories_path.empty() ? CategoryTable::modanet_default()
                                                        : CategoryTable::load(categories_path);
    AnnotationDocument doc;
    try {
      doc = parse_annotation_document(text);
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << "\n";
      return static_cast<int>(kDomainFailure);
    }
    int errors = 0;
    for (const auto& issue : validate_records(doc.records, table)) {
      const bool is_error = issue.severity == AnnotationIssue::Severity::kError;
      errors += is_error ? 1 : 0;
      err << (is_error ? "error: " : "warning: ") << issue.message << "\n";
    }
    if (errors > 0) {
      err << errors << " validation error(s)\n";
      return static_cast<int>(kDomainFailure);
    }
    out << doc.records.size() << " annotations, " << group_by_image(doc.records).size()
        << " images\n";
    return static_cast<int>(kOk);
  });
}

int cmd_rasterize(const std::string& annotations_path, long long image_id,
                  std::optional<int> category_id, int height, int width,
                  const std::string& out_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto doc = parse_annotation_document(read_text(annotations_path));
    if (height <= 0 || width <= 0) {
      for (const auto& im : doc.images)
        if (im.id == image_id) {
          height = im.height;
          width = im.width;
        }
    }
    enforce(height > 0 && width > 0, "no size for image ", image_id,
            "; pass --height/--width or include it in 'images'");
    std::vector<Polygon> polys;
    for (const auto& r : doc.records)
      if (r.image_id == image_id && (!category_id || r.category_id == *category_id))
        polys.insert(polys.end(), r.segmentation.begin(), r.segmentation.end());
    std::vector<std::string> warnings;
    const BinaryMask mask = rasterize(polys, height, width, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    png::write_mask(out_path, mask);
    out << mask.popcount() << " pixels set\n";
    return static_cast<int>(kOk);
  });
}

int cmd_eval_map(const std::string& gt_path, const std::string& pred_path,
                 const EvalMapOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto doc = parse_annotation_document(read_text(gt_path));
    const auto dets = parse_detections(read_text(pred_path),
                                       fs::path(pred_path).parent_path().string(), opts.mask_iou);
    const auto gts = ground_truth_items(doc, opts.mask_iou);
    const MapReport report = evaluate_map(gts, dets, opts.iou, opts.mask_iou);
    for (int c : report.excluded)
      err << "warning: predicted category " << c << " has no ground truth; skipped\n";

    json cats = json::array();
    for (const auto& c : report.categories)
      cats.push_back({{"category_id", c.category_id},
                      {"n_gt", c.n_gt},
                      {"n_det", c.n_det},
                      {"ap", std::stod(fixed(c.ap, 6))}});
    json j = {{"iou_mode", report.mask_iou ? "mask" : "box"},
              {"iou_threshold", report.iou_thresh},
              {"categories", cats},
              {"excluded_categories", report.excluded},
              {"excluded_note", "categories without ground-truth instances are left out of the mean"},
              {"map", std::stod(fixed(report.map, 6))}};
    if (!opts.out_dir.empty()) {
      ensure_dir(opts.out_dir);
      write_text((fs::path(opts.out_dir) / "report.json").string(), j.dump(2) + "\n");
      for (const auto& c : report.categories) {
        std::string csv = "rank,precision,recall\n";
        for (std::size_t k = 0; k < c.curve.precisions.size(); ++k)
          csv += std::to_string(k + 1) + "," + fixed(c.curve.precisions[k], 6) + "," +
                 fixed(c.curve.recalls[k], 6) + "\n";
        write_text(
            (fs::path(opts.out_dir) / ("pr_cat_" + std::to_string(c.category_id) + ".csv")).string(),
            csv);
      }
    }
    out << "mAP " << fixed(report.map, 2) << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_eval_asdr(const std::string& before_path, const std::string& after_path, double iou,
                  const std::string& report_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto before = parse_detections(read_text(before_path), "", false);
    const auto after = parse_detections(read_text(after_path), "", false);
    std::map<long long, std::vector<Detection>> b_by, a_by;
    for (const auto& d : before) b_by[d.image_id].push_back(d);
    for (const auto& d : after) a_by[d.image_id].push_back(d);
    std::vector<AsdrPair> pairs;
    for (const auto& [img, bs] : b_by) {
      const auto p = correspond_items(bs, a_by[img], iou);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
    const double value = asdr(pairs);
    if (!report_path.empty()) {
      json jp = json::array();
      for (const auto& p : pairs)
        jp.push_back({{"category_id", p.category_id},
                      {"s_before", p.s_before},
                      {"s_after", p.s_after}});
      write_text(report_path,
                 json{{"asdr", std::stod(fixed(value, 6))}, {"pairs", jp}}.dump(2) + "\n");
    }
    out << "ASDR " << fixed(value, 6) << " over " << pairs.size() << " items\n";
    return static_cast<int>(kOk);
  });
}

int cmd_style_transfer(const StyleTransferOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ImageTensor content = png::read_rgb(opts.content);
    ImageTensor style = png::read_rgb(opts.style);
    if (opts.resize > 0) {
      content = preprocess(content, opts.resize).image;
      style = preprocess(style, opts.resize).image;
    }
    const auto ex = load_or_reference(opts.weights);
    const auto cfg = apply_overrides(ex, opts.nst);
    ensure_dir(opts.out_dir);
    const fs::path dir(opts.out_dir);
    try {
      const auto result =
          run_nst_to_dir(content, style, ex, cfg, dir.string(), (dir / "loss.csv").string());
      png::write_rgb((dir / "final.png").string(), result.image);
      out << "iterations " << cfg.iterations << ", snapshots " << result.snapshots.size()
          << ", loss " << fixed(result.trajectory.front().total, 6) << " -> "
          << fixed(result.trajectory.back().total, 6) << "\n";
    } catch (const nst::NonFiniteLoss& e) {
      err << "error: " << e.what() << "; partial outputs kept in " << opts.out_dir << "\n";
      return static_cast<int>(kDomainFailure);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_composite(const CompositeOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    enforce(opts.stylized.empty() != opts.texture.empty(),
            "composite: pass exactly one of --stylized or --texture");
    const ImageTensor original = png::read_rgb(opts.original);
    const BinaryMask mask = png::read_mask(opts.mask);
    ImageTensor result;
    if (!opts.stylized.empty()) {
      result = composite({original, png::read_rgb(opts.stylized), mask, opts.feather_radius});
    } else {
      std::vector<std::string> warnings;
      result = copy_paste(original, png::read_rgb(opts.texture), mask, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << "\n";
    }
    png::write_rgb(opts.out, result);
    out << "wrote " << opts.out << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_run(const std::string& manifest_path, const std::string& masks_dir_override,
            std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunManifest m = load_manifest(manifest_path);
    if (!masks_dir_override.empty()) m.masks_dir = masks_dir_override;
    const auto outcome = run_pipeline(m, err);
    out << "composited " << outcome.stylized.size() << " item(s) into "
        << (fs::path(m.output_dir) / "composite.png").string() << "\n";
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// argv

namespace {

void add_nst_flags(CLI::App* cmd, NstOverrides& o) {
  cmd->add_option("--iterations", o.iterations, "Descent iterations");
  cmd->add_option("--step", o.step_size, "Step size");
  cmd->add_option("--content-weight", o.content_weight, "Content loss weight");
  cmd->add_option("--style-weight", o.style_weight, "Per-layer style loss weight");
  cmd->add_option("--tv-weight", o.tv_weight, "Total-variation weight");
  cmd->add_option("--optimizer", o.optimizer, "adam or gd");
  cmd->add_option("--step-halving", o.step_halving, "gd only: halve the step on loss increase");
  cmd->add_option("--snapshot-interval", o.snapshot_interval, "Iterations between snapshots");
  cmd->add_option("--init", o.init, "content or noise");
  cmd->add_option("--seed", o.seed, "Seed for noise initialization");
  cmd->add_option("--content-layer", o.content_layer, "Layer index for the content loss");
}

}  // namespace

int main_entry(int argc, char** argv) {
  CLI::App app{"fitroom: detection geometry, style transfer, evaluation and compositing"};
  app.require_subcommand(1);

  std::string ann, categories;
  auto* validate = app.add_subcommand("validate", "Parse and validate an annotation file");
  validate->add_option("annotations", ann, "Annotation JSON")->required();
  validate->add_option("--categories", categories, "Category table (id<TAB>name)");

  long long image_id = 0;
  std::optional<int> category;
  int height = 0, width = 0;
  std::string mask_out;
  auto* raster = app.add_subcommand("rasterize", "Rasterize an image's polygons to a 1-bit PNG");
  raster->add_option("annotations", ann, "Annotation JSON")->required();
  raster->add_option("--image-id", image_id, "Image id")->required();
  raster->add_option("--category", category, "Only this category");
  raster->add_option("--height", height, "Mask height (default: from 'images')");
  raster->add_option("--width", width, "Mask width (default: from 'images')");
  raster->add_option("--out", mask_out, "Output PNG")->required();

  std::string gt, pred;
  EvalMapOptions map_opts;
  auto* eval_map = app.add_subcommand("eval-map", "Per-category AP and mAP");
  eval_map->add_option("gt", gt, "Ground-truth annotation JSON")->required();
  eval_map->add_option("predictions", pred, "Prediction JSON array")->required();
  eval_map->add_option("--iou", map_opts.iou, "IoU threshold")->capture_default_str();
  eval_map->add_flag("--mask-iou", map_opts.mask_iou, "Match on mask IoU instead of boxes");
  eval_map->add_option("--out-dir", map_opts.out_dir, "Write report.json and PR CSVs here");

  std::string before, after, asdr_report;
  double asdr_iou = 0.5;
  auto* eval_asdr = app.add_subcommand("eval-asdr", "Average score decay rate");
  eval_asdr->add_option("before", before, "Detections on the original images")->required();
  eval_asdr->add_option("after", after, "Detections on the restyled images")->required();
  eval_asdr->add_option("--iou", asdr_iou, "Pairing IoU threshold")->capture_default_str();
  eval_asdr->add_option("--report", asdr_report, "Write per-item JSON report");

  StyleTransferOptions st;
  auto* style = app.add_subcommand("style-transfer", "Optimize pixels toward a style");
  style->add_option("--content", st.content, "Content PNG")->required();
  style->add_option("--style", st.style, "Style PNG")->required();
  style->add_option("--out-dir", st.out_dir, "Output directory")->required();
  style->add_option("--weights", st.weights, "Extractor weight file");
  style->add_option("--resize", st.resize, "Pad+resize both images to N x N first");
  add_nst_flags(style, st.nst);

  CompositeOptions co;
  auto* comp = app.add_subcommand("composite", "Merge stylized pixels under a mask");
  comp->add_option("--original", co.original, "Original PNG")->required();
  comp->add_option("--stylized", co.stylized, "Stylized PNG");
  comp->add_option("--texture", co.texture, "Texture PNG (copy-paste baseline)");
  comp->add_option("--mask", co.mask, "Mask PNG")->required();
  comp->add_option("--feather", co.feather_radius, "Feather passes (0 = hard mask)");
  comp->add_option("--out", co.out, "Output PNG")->required();

  std::string manifest, masks_dir;
  auto* run = app.add_subcommand("run", "End-to-end restyling of selected fashion items");
  run->add_option("manifest", manifest, "Run manifest JSON")->required();
  run->add_option("--masks-dir", masks_dir, "Directory of mask_<category_id>.png files");

  std::string extractor_out;
  std::uint64_t extractor_seed = 20190521;
  auto* export_ex =
      app.add_subcommand("export-extractor", "Write the reference extractor weight file");
  export_ex->add_option("--out", extractor_out, "Output path")->required();
  export_ex->add_option("--seed", extractor_seed, "Weight seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kDomainFailure;
  }

  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  if (*validate) return cmd_validate(ann, categories, out, err);
  if (*raster) return cmd_rasterize(ann, image_id, category, height, width, mask_out, out, err);
  if (*eval_map) return cmd_eval_map(gt, pred, map_opts, out, err);
  if (*eval_asdr) return cmd_eval_asdr(before, after, asdr_iou, asdr_report, out, err);
  if (*style) return cmd_style_transfer(st, out, err);
  if (*comp) return cmd_composite(co, out, err);
  if (*run) return cmd_run(manifest, masks_dir, out, err);
  if (*export_ex)
    return guarded(err, [&] {
      nst::save_extractor(nst::reference_extractor(extractor_seed), extractor_out);
      out << "wrote " << extractor_out << "\n";
      return static_cast<int>(kOk);
    });
  return kDomainFailure;
}

}  // namespace fitroom::cli
