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

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fitroom/fitroom.hpp"

namespace fitroom::cli {

// Process exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kDomainFailure = 1, kIoFailure = 2 };

// Reads a whole file; IoError when unreadable.
std::string read_text(const std::string& path);

// Prediction / detection array entries: {image_id, category_id, bbox,
// score, optional mask_png}. mask_png paths are resolved against base_dir.
std::vector<Detection> parse_detections(const std::string& text, const std::string& base_dir,
                                        bool load_masks);
std::string detections_to_json(const std::vector<Detection>& dets);

// Overrides applied on top of nst::default_config(). Unset fields keep defaults.
struct NstOverrides {
  std::optional<int> iterations;
  std::optional<double> step_size;
  std::optional<double> content_weight;
  std::optional<double> style_weight;  // applied to every style layer
  std::optional<double> tv_weight;
  std::optional<std::string> optimizer;  // "adam" | "gd"
  std::optional<bool> step_halving;
  std::optional<int> snapshot_interval;
  std::optional<std::string> init;  // "content" | "noise"
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> content_layer;
};

nst::NstConfig apply_overrides(const nst::FeatureExtractor& ex, const NstOverrides& o);

struct Selection {
  int category_id = 0;
  std::string style_image;
};

// Parsed form of a run manifest. Relative paths are resolved against the
// manifest's directory by load_manifest().
struct RunManifest {
  std::string content_image;
  std::string annotations;           // annotation file, or empty when masks_dir is used
  std::optional<long long> image_id;  // required with annotations if the file has several images
  std::string masks_dir;             // mask_<category_id>.png files
  std::vector<Selection> selections;
  NstOverrides nst;
  std::string weights;               // extractor file; reference extractor when empty
  std::string detections_before;     // optional external detector dumps
  std::string detections_after;
  int target_size = 256;
  int feather_radius = 0;
  std::string output_dir;
};

RunManifest parse_manifest(const std::string& text, const std::string& base_dir);
RunManifest load_manifest(const std::string& path);

struct RunOutcome {
  ImageTensor preprocessed;
  ImageTensor composite;
  std::map<int, BinaryMask> masks;  // per selected category, target frame
  std::map<int, ImageTensor> stylized;
};

// The end-to-end pipeline behind `run`. Throws on failure.
RunOutcome run_pipeline(const RunManifest& manifest, std::ostream& log);

// Subcommand bodies. Each returns an ExitCode and reports to out/err.
int cmd_validate(const std::string& annotations_path, const std::string& categories_path,
                 std::ostream& out, std::ostream& err);
int cmd_rasterize(const std::string& annotations_path, long long image_id,
                  std::optional<int> category_id, int height, int width,
                  const std::string& out_path, std::ostream& out, std::ostream& err);

struct EvalMapOptions {
  double iou = 0.5;
  bool mask_iou = false;
  std::string out_dir;
};
int cmd_eval_map(const std::string& gt_path, const std::string& pred_path,
                 const EvalMapOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval_asdr(const std::string& before_path, const std::string& after_path, double iou,
                  const std::string& report_path, std::ostream& out, std::ostream& err);

struct StyleTransferOptions {
  std::string content;
  std::string style;
  std::string out_dir;
  std::string weights;
  int resize = 0;  // 0 keeps the content size; style is resized to match
  NstOverrides nst;
};
int cmd_style_transfer(const StyleTransferOptions& opts, std::ostream& out, std::ostream& err);

struct CompositeOptions {
  std::string original;
  std::string stylized;
  std::string texture;  // copy-paste baseline when set
  std::string mask;
  int feather_radius = 0;
  std::string out;
};
int cmd_composite(const CompositeOptions& opts, std::ostream& out, std::ostream& err);

int cmd_run(const std::string& manifest_path, const std::string& masks_dir_override,
            std::ostream& out, std::ostream& err);

// argv entry point used by the `fitroom` binary.
int main_entry(int argc, char** argv);

}  // namespace fitroom::cli
