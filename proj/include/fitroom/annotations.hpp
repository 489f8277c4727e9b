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

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fitroom/error.hpp"
#include "fitroom/geometry.hpp"
#include "fitroom/image.hpp"

namespace fitroom {

// Flat [x0, y0, x1, y1, ...] outline in pixel units.
struct Polygon {
  std::vector<double> coords;

  std::size_t vertex_count() const { return coords.size() / 2; }
  double x(std::size_t k) const { return coords[2 * k]; }
  double y(std::size_t k) const { return coords[2 * k + 1]; }

  // Unsigned shoelace area.
  double area() const {
    const std::size_t n = vertex_count();
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t l = (k + 1) % n;
      acc += x(k) * y(l) - x(l) * y(k);
    }
    return std::abs(acc) / 2.0;
  }

  bool operator==(const Polygon&) const = default;
};

// One labeled item of a ModaNet/COCO-style annotation file.
struct AnnotationRecord {
  long long image_id = 0;
  long long annotation_id = 0;
  BoxXYWH bbox;
  int category_id = 0;
  int iscrowd = 0;
  std::vector<Polygon> segmentation;

  bool operator==(const AnnotationRecord&) const = default;
};

// Optional per-image metadata from a COCO "images" array.
struct ImageInfo {
  long long id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
};

struct AnnotationDocument {
  std::vector<AnnotationRecord> records;
  std::vector<ImageInfo> images;
};

// ---------------------------------------------------------------------------
// Category table

class CategoryTable {
 public:
  // 13 ids. Only id 2 ("belt") has an anchored name; the rest are
  // placeholders until a table file supplies real names.
  static CategoryTable modanet_default() {
    CategoryTable t;
    for (int id = 1; id <= 13; ++id) t.names_[id] = "category_" + std::to_string(id);
    t.names_[2] = "belt";
    return t;
  }

  // Text lines of `id<TAB>name`; blank lines and lines starting with '#'
  // are skipped. Ids must be unique and contiguous from 1.
  static CategoryTable parse(std::string_view text) {
    CategoryTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      enforce(tab != std::string::npos, "category table line ", lineno, ": expected id<TAB>name");
      int id = 0;
      try {
        std::size_t used = 0;
        id = std::stoi(line.substr(0, tab), &used);
        enforce(used == tab, "category table line ", lineno, ": bad id");
      } catch (const std::logic_error&) {
        throw DomainError(detail::concat("category table line ", lineno, ": bad id"));
      }
      enforce(!t.names_.count(id), "category table line ", lineno, ": duplicate id ", id);
      t.names_[id] = line.substr(tab + 1);
    }
    enforce(!t.names_.empty(), "category table is empty");
    int expect = 1;
    for (const auto& [id, name] : t.names_) {
      enforce(id == expect, "category ids must be contiguous from 1; missing ", expect);
      ++expect;
    }
    return t;
  }

  static CategoryTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read category table '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  int count() const { return static_cast<int>(names_.size()); }
  bool contains(int id) const { return names_.count(id) != 0; }
  const std::string& name(int id) const {
    auto it = names_.find(id);
    enforce(it != names_.end(), "unknown category id ", id);
    return it->second;
  }
  const std::map<int, std::string>& entries() const { return names_; }

 private:
  std::map<int, std::string> names_;
};

// ---------------------------------------------------------------------------
// Parsing and validation

struct AnnotationIssue {
  enum class Severity { kWarning, kError };
  Severity severity = Severity::kError;
  long long annotation_id = 0;
  std::string message;
};

namespace detail {

inline std::size_t line_of(std::string_view text, std::size_t byte) {
  const std::size_t end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + end, '\n'));
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, long long id) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ValidationError(concat("annotation ", id, ": missing field '", key, "'"), id);
  return *it;
}

inline double number(const nlohmann::json& v, const char* what, long long id) {
  if (!v.is_number())
    throw ValidationError(concat("annotation ", id, ": ", what, " must be numeric"), id);
  return v.get<double>();
}

inline long long integer(const nlohmann::json& v, const char* what, long long id) {
  if (!v.is_number_integer()) {
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d) return static_cast<long long>(d);
    }
    throw ValidationError(concat("annotation ", id, ": ", what, " must be an integer"), id);
  }
  return v.get<long long>();
}

inline AnnotationRecord record_from_json(const nlohmann::json& a, std::size_t index) {
  if (!a.is_object())
    throw ValidationError(concat("annotation #", index, " is not an object"), -1);
  long long id = -1;
  if (auto it = a.find("id"); it != a.end()) id = integer(*it, "id", -1);
  AnnotationRecord r;
  r.annotation_id = integer(require(a, "id", id), "id", id);
  r.image_id = integer(require(a, "image_id", id), "image_id", id);
  r.category_id = static_cast<int>(integer(require(a, "category_id", id), "category_id", id));

  const nlohmann::json* crowd = nullptr;
  if (auto it = a.find("iscrowd"); it != a.end())
    crowd = &*it;
  else if (auto it2 = a.find("iscrowded"); it2 != a.end())
    crowd = &*it2;
  if (!crowd) throw ValidationError(concat("annotation ", id, ": missing field 'iscrowd'"), id);
  r.iscrowd = static_cast<int>(integer(*crowd, "iscrowd", id));

  const auto& bbox = require(a, "bbox", id);
  if (!bbox.is_array() || bbox.size() != 4)
    throw ValidationError(concat("annotation ", id, ": bbox must have 4 numbers"), id);
  r.bbox = {number(bbox[0], "bbox", id), number(bbox[1], "bbox", id), number(bbox[2], "bbox", id),
            number(bbox[3], "bbox", id)};

  const auto& seg = require(a, "segmentation", id);
  if (!seg.is_array())
    throw ValidationError(
        concat("annotation ", id, ": segmentation must be a list of polygons (RLE unsupported)"),
        id);
  for (const auto& poly : seg) {
    if (!poly.is_array())
      throw ValidationError(concat("annotation ", id, ": polygon must be a coordinate list"), id);
    Polygon p;
    p.coords.reserve(poly.size());
    for (const auto& v : poly) p.coords.push_back(number(v, "polygon coordinate", id));
    r.segmentation.push_back(std::move(p));
  }
  return r;
}

inline nlohmann::json number_json(double v) {
  if (std::floor(v) == v && std::abs(v) < 9.0e15) return static_cast<long long>(v);
  return v;
}

}  // namespace detail

// Structural parse only: syntax errors raise ParseError with the byte and
// line; missing or mistyped fields raise ValidationError. Accepts either a
// COCO document with an "annotations" array or a bare array.
inline AnnotationDocument parse_annotation_document(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = e.byte == 0 ? 0 : e.byte - 1;
    throw ParseError(detail::concat("annotation file: parse error at byte ", byte, " (line ",
                                    detail::line_of(text, byte), "): ", e.what()),
                     byte, detail::line_of(text, byte));
  }
  const nlohmann::json* arr = nullptr;
  if (doc.is_array()) {
    arr = &doc;
  } else if (doc.is_object() && doc.contains("annotations") && doc["annotations"].is_array()) {
    arr = &doc["annotations"];
  } else {
    throw ParseError("annotation file: no 'annotations' array", 0, 1);
  }
  AnnotationDocument out;
  out.records.reserve(arr->size());
  for (std::size_t i = 0; i < arr->size(); ++i)
    out.records.push_back(detail::record_from_json((*arr)[i], i));
  if (doc.is_object() && doc.contains("images") && doc["images"].is_array()) {
    for (const auto& im : doc["images"]) {
      ImageInfo info;
      info.id = im.value("id", 0LL);
      info.width = im.value("width", 0);
      info.height = im.value("height", 0);
      info.file_name = im.value("file_name", std::string{});
      out.images.push_back(std::move(info));
    }
  }
  return out;
}

// Tightest integer box containing the polygon vertices.
inline BoxXYWH polygon_bounds(const std::vector<Polygon>& polys) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (const auto& p : polys)
    for (std::size_t k = 0; k < p.vertex_count(); ++k) {
      x0 = std::min(x0, p.x(k));
      x1 = std::max(x1, p.x(k));
      y0 = std::min(y0, p.y(k));
      y1 = std::max(y1, p.y(k));
    }
  if (x0 > x1) return {};
  return {x0, y0, x1 - x0, y1 - y0};
}

// Checks every record invariant. Errors: non-positive bbox extent, odd or
// short polygons, negative/non-finite coordinates, unknown category, crowd
// flag outside {0,1}. A bbox that does not match its polygons' extent is
// only a warning.
inline std::vector<AnnotationIssue> validate_records(const std::vector<AnnotationRecord>& records,
                                                     const CategoryTable& table) {
  using Sev = AnnotationIssue::Severity;
  std::vector<AnnotationIssue> issues;
  auto err = [&](long long id, std::string msg) {
    issues.push_back({Sev::kError, id, "annotation " + std::to_string(id) + ": " + msg});
  };
  for (const auto& r : records) {
    if (!(r.bbox.w > 0 && r.bbox.h > 0))
      err(r.annotation_id, detail::concat("bbox width and height must be positive, got [", r.bbox.x,
                                          ", ", r.bbox.y, ", ", r.bbox.w, ", ", r.bbox.h, "]"));
    if (!table.contains(r.category_id))
      err(r.annotation_id, detail::concat("unknown category_id ", r.category_id));
    if (r.iscrowd != 0 && r.iscrowd != 1)
      err(r.annotation_id, detail::concat("iscrowd must be 0 or 1, got ", r.iscrowd));
    bool polys_ok = true;
    for (std::size_t p = 0; p < r.segmentation.size(); ++p) {
      const auto& c = r.segmentation[p].coords;
      if (c.size() % 2 != 0) {
        err(r.annotation_id, detail::concat("polygon ", p, " has odd coordinate count ", c.size()));
        polys_ok = false;
      } else if (c.size() < 6) {
        err(r.annotation_id,
            detail::concat("polygon ", p, " has ", c.size(), " coordinates; need at least 6"));
        polys_ok = false;
      }
      for (double v : c)
        if (!std::isfinite(v) || v < 0) {
          err(r.annotation_id, detail::concat("polygon ", p, " has invalid coordinate ", v));
          polys_ok = false;
          break;
        }
    }
    if (polys_ok && !r.segmentation.empty()) {
      const BoxXYWH b = polygon_bounds(r.segmentation);
      const double tol = 1.0;
      if (std::abs(b.x - r.bbox.x) > tol || std::abs(b.y - r.bbox.y) > tol ||
          std::abs(b.x + b.w - r.bbox.x - r.bbox.w) > tol ||
          std::abs(b.y + b.h - r.bbox.y - r.bbox.h) > tol)
        issues.push_back({Sev::kWarning, r.annotation_id,
                          detail::concat("annotation ", r.annotation_id,
                                         ": bbox does not tightly bound its polygons")});
    }
  }
  return issues;
}

// Parse + validate. Throws the first validation error.
inline std::vector<AnnotationRecord> parse_annotations(
    std::string_view text, const CategoryTable& table = CategoryTable::modanet_default()) {
  auto doc = parse_annotation_document(text);
  for (const auto& issue : validate_records(doc.records, table))
    if (issue.severity == AnnotationIssue::Severity::kError)
      throw ValidationError(issue.message, issue.annotation_id);
  return std::move(doc.records);
}

// Emits {"annotations": [...]} with the six record fields.
inline std::string serialize_annotations(const std::vector<AnnotationRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json seg = nlohmann::json::array();
    for (const auto& p : r.segmentation) {
      nlohmann::json coords = nlohmann::json::array();
      for (double v : p.coords) coords.push_back(detail::number_json(v));
      seg.push_back(std::move(coords));
    }
    arr.push_back({{"image_id", r.image_id},
                   {"id", r.annotation_id},
                   {"bbox",
                    {detail::number_json(r.bbox.x), detail::number_json(r.bbox.y),
                     detail::number_json(r.bbox.w), detail::number_json(r.bbox.h)}},
                   {"category_id", r.category_id},
                   {"iscrowd", r.iscrowd},
                   {"segmentation", std::move(seg)}});
  }
  return nlohmann::json{{"annotations", std::move(arr)}}.dump();
}

inline std::map<long long, std::vector<std::size_t>> group_by_image(
    const std::vector<AnnotationRecord>& records) {
  std::map<long long, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].image_id].push_back(i);
  return groups;
}

// ---------------------------------------------------------------------------
// Rasterization

// Pixel (i, j) is set when its center (j + 0.5, i + 0.5) is inside any of
// the polygons under the even-odd rule. Zero-area polygons contribute
// nothing and append a warning.
inline BinaryMask rasterize(const std::vector<Polygon>& polygons, int height, int width,
                            std::vector<std::string>* warnings = nullptr) {
  BinaryMask mask(height, width);
  std::vector<double> xs;
  for (std::size_t p = 0; p < polygons.size(); ++p) {
    const Polygon& poly = polygons[p];
    enforce(poly.coords.size() % 2 == 0 && poly.coords.size() >= 6, "polygon ", p,
            " needs an even count of at least 6 coordinates");
    if (poly.area() == 0.0) {
      if (warnings) warnings->push_back(detail::concat("polygon ", p, " is degenerate (zero area)"));
      continue;
    }
    const std::size_t n = poly.vertex_count();
    for (int i = 0; i < height; ++i) {
      const double yc = i + 0.5;
      xs.clear();
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t l = (k + 1) % n;
        const double ya = poly.y(k), yb = poly.y(l);
        if ((ya > yc) != (yb > yc))
          xs.push_back(poly.x(k) + (yc - ya) * (poly.x(l) - poly.x(k)) / (yb - ya));
      }
      std::sort(xs.begin(), xs.end());
      // Centers in [xs[2m], xs[2m+1]) have an odd number of crossings to the right.
      for (std::size_t m = 0; m + 1 < xs.size(); m += 2) {
        const double lo = std::ceil(xs[m] - 0.5);
        const double hi = std::ceil(xs[m + 1] - 0.5);
        const int j0 = static_cast<int>(std::clamp(lo, 0.0, static_cast<double>(width)));
        const int j1 = static_cast<int>(std::clamp(hi, 0.0, static_cast<double>(width)));
        for (int j = j0; j < j1; ++j) mask.set(i, j);
      }
    }
  }
  return mask;
}

inline BoxXYWH bbox_from_mask(const BinaryMask& mask) {
  int r0 = mask.height, r1 = -1, c0 = mask.width, c1 = -1;
  for (int i = 0; i < mask.height; ++i)
    for (int j = 0; j < mask.width; ++j)
      if (mask.at(i, j)) {
        r0 = std::min(r0, i);
        r1 = std::max(r1, i);
        c0 = std::min(c0, j);
        c1 = std::max(c1, j);
      }
  enforce(r1 >= 0, "empty mask");
  return {static_cast<double>(c0), static_cast<double>(r0), static_cast<double>(c1 - c0 + 1),
          static_cast<double>(r1 - r0 + 1)};
}

// ---------------------------------------------------------------------------
// Preprocessing and augmentation

// How preprocess() mapped the source frame: output = (input + pad) * scale.
struct PadRecord {
  int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
  int padded_size = 0;
  int target = 0;
  double scale = 1.0;

  std::pair<double, double> map_point(double x, double y) const {
    return {(x + pad_left) * scale, (y + pad_top) * scale};
  }

  AnnotationRecord map_record(const AnnotationRecord& r) const {
    AnnotationRecord out = r;
    auto [x, y] = map_point(r.bbox.x, r.bbox.y);
    out.bbox = {x, y, r.bbox.w * scale, r.bbox.h * scale};
    for (auto& p : out.segmentation)
      for (std::size_t k = 0; k + 1 < p.coords.size(); k += 2) {
        auto [px, py] = map_point(p.coords[k], p.coords[k + 1]);
        p.coords[k] = px;
        p.coords[k + 1] = py;
      }
    return out;
  }
};

struct Preprocessed {
  ImageTensor image;
  PadRecord pad;
};

// Zero-pads the short axis to a square (odd remainder to bottom/right),
// then bilinearly resizes to target x target.
inline Preprocessed preprocess(const ImageTensor& image, int target = 256) {
  enforce(image.height > 0 && image.width > 0, "preprocess: zero-dimension image");
  enforce(!image.normalized(), "preprocess expects an unnormalized image");
  enforce(target > 0, "preprocess: target must be positive");
  PadRecord pad;
  const int side = std::max(image.height, image.width);
  const int dh = side - image.height, dw = side - image.width;
  pad.pad_top = dh / 2;
  pad.pad_bottom = dh - pad.pad_top;
  pad.pad_left = dw / 2;
  pad.pad_right = dw - pad.pad_left;
  pad.padded_size = side;
  pad.target = target;
  pad.scale = static_cast<double>(target) / side;

  ImageTensor square(side, side, 0.0);
  for (int i = 0; i < image.height; ++i)
    for (int j = 0; j < image.width; ++j)
      for (int c = 0; c < ImageTensor::kChannels; ++c)
        square.at(i + pad.pad_top, j + pad.pad_left, c) = image.at(i, j, c);
  if (side == target) return {std::move(square), pad};
  return {resize_image(square, target, target), pad};
}

inline ImageTensor normalize_channels(const ImageTensor& image, const std::array<double, 3>& mean,
                                      const std::array<double, 3>& std) {
  enforce(!image.normalized(), "image is already normalized");
  for (int c = 0; c < 3; ++c)
    enforce(std[c] > 0, "normalization std must be positive, got ", std[c], " for channel ", c);
  ImageTensor out = image;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const int c = static_cast<int>(k % 3);
    out.values[k] = (image.values[k] - mean[c]) / std[c];
  }
  out.normalization = ChannelStats{mean, std};
  return out;
}

struct Flipped {
  ImageTensor image;
  std::vector<AnnotationRecord> records;
};

// Mirrors columns; bbox x -> W - x - w, polygon x -> W - x.
inline Flipped hflip(const ImageTensor& image, const std::vector<AnnotationRecord>& records) {
  Flipped out{image, records};
  const int w = image.width;
  for (int i = 0; i < image.height; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < ImageTensor::kChannels; ++c)
        out.image.at(i, j, c) = image.at(i, w - 1 - j, c);
  const double W = static_cast<double>(w);
  for (auto& r : out.records) {
    r.bbox.x = W - r.bbox.x - r.bbox.w;
    for (auto& p : r.segmentation)
      for (std::size_t k = 0; k < p.coords.size(); k += 2) p.coords[k] = W - p.coords[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset splits

struct DatasetSplit {
  std::vector<long long> train, val, test;
};

// Deterministic across platforms: Fisher-Yates driven by mt19937_64 with
// rejection sampling (std::shuffle and the std distributions are not
// specified bit-for-bit).
inline DatasetSplit split_dataset(std::vector<long long> image_ids, std::size_t n_train,
                                  std::size_t n_val, std::size_t n_test, std::uint64_t seed) {
  enforce(n_train + n_val + n_test <= image_ids.size(), "split asks for ", n_train + n_val + n_test,
          " images but only ", image_ids.size(), " are available");
  std::sort(image_ids.begin(), image_ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = image_ids.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do draw = rng();
    while (draw >= limit);
    std::swap(image_ids[i - 1], image_ids[draw % bound]);
  }
  DatasetSplit s;
  auto it = image_ids.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  s.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
  it += static_cast<std::ptrdiff_t>(n_val);
  s.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
  return s;
}

}  // namespace fitroom
