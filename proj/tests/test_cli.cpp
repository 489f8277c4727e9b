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

#include <filesystem>
#include <sstream>

#include "commands.hpp"
#include "fitroom/fitroom.hpp"
#include "fixtures.hpp"

namespace fitroom::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fitroom_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

constexpr const char* kValid = R"({"images": [{"id": 5, "width": 32, "height": 24}],
 "annotations": [
  {"image_id": 5, "id": 1, "bbox": [2, 2, 10, 8], "category_id": 1, "iscrowd": 0,
   "segmentation": [[2, 2, 12, 2, 12, 10, 2, 10]]},
  {"image_id": 5, "id": 2, "bbox": [14, 4, 6, 6], "category_id": 2, "iscrowd": 0,
   "segmentation": [[14, 4, 20, 4, 20, 10, 14, 10]]},
  {"image_id": 6, "id": 3, "bbox": [0, 0, 4, 4], "category_id": 2, "iscrowd": 0,
   "segmentation": [[0, 0, 4, 0, 4, 4, 0, 4]]}]})";

TEST_F(CliTest, ValidateReportsCounts) {
  fixture::write_file(path("a.json"), kValid);
  EXPECT_EQ(cmd_validate(path("a.json"), "", out_, err_), kOk);
  EXPECT_EQ(out_.str(), "3 annotations, 2 images\n");
}

TEST_F(CliTest, ValidateOddPolygonAndMissingFile) {
  fixture::write_file(path("bad.json"),
                      R"([{"image_id":1,"id":77,"bbox":[0,0,5,5],"category_id":1,"iscrowd":0,
                           "segmentation":[[0,0,5,0,5]]}])");
  EXPECT_EQ(cmd_validate(path("bad.json"), "", out_, err_), kDomainFailure);
  EXPECT_NE(err_.str().find("annotation 77"), std::string::npos);
  EXPECT_EQ(cmd_validate(path("nope.json"), "", out_, err_), kIoFailure);
  fixture::write_file(path("syntax.json"), "[{");
  EXPECT_EQ(cmd_validate(path("syntax.json"), "", out_, err_), kDomainFailure);
}

TEST_F(CliTest, RasterizeUsesImageSize) {
  fixture::write_file(path("a.json"), kValid);
  EXPECT_EQ(cmd_rasterize(path("a.json"), 5, 1, 0, 0, path("m.png"), out_, err_), kOk);
  const auto m = png::read_mask(path("m.png"));
  EXPECT_EQ(m.height, 24);
  EXPECT_EQ(m.width, 32);
  EXPECT_EQ(m.popcount(), 80u);
  EXPECT_EQ(cmd_rasterize(path("a.json"), 99, std::nullopt, 0, 0, path("x.png"), out_, err_),
            kDomainFailure);
}

TEST_F(CliTest, EvalMapPerfectAndEmpty) {
  fixture::write_file(path("gt.json"), kValid);
  fixture::write_file(path("perfect.json"), R"([
    {"image_id": 5, "category_id": 1, "bbox": [2, 2, 10, 8], "score": 1.0},
    {"image_id": 5, "category_id": 2, "bbox": [14, 4, 6, 6], "score": 1.0},
    {"image_id": 6, "category_id": 2, "bbox": [0, 0, 4, 4], "score": 1.0},
    {"image_id": 6, "category_id": 9, "bbox": [0, 0, 4, 4], "score": 0.5}])");
  fixture::write_file(path("empty.json"), "[]");
  EvalMapOptions opts;
  opts.out_dir = path("report");
  EXPECT_EQ(cmd_eval_map(path("gt.json"), path("perfect.json"), opts, out_, err_), kOk);
  EXPECT_EQ(out_.str(), "mAP 1.00\n");
  EXPECT_NE(err_.str().find("category 9"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("report/report.json")));
  EXPECT_TRUE(fs::exists(path("report/pr_cat_2.csv")));
  out_.str("");
  EXPECT_EQ(cmd_eval_map(path("gt.json"), path("empty.json"), {}, out_, err_), kOk);
  EXPECT_EQ(out_.str(), "mAP 0.00\n");
}

TEST_F(CliTest, EvalMapHandComputed) {
  // Category 1: one gt, detections [FP 0.9, TP 0.8] -> p=[0,0.5], r=[0,1]
  // -> AP = 0.5. Category 2: two gts, one TP -> AP = 0.5. mAP 0.50.
  fixture::write_file(path("gt.json"), kValid);
  fixture::write_file(path("pred.json"), R"([
    {"image_id": 5, "category_id": 1, "bbox": [20, 14, 10, 8], "score": 0.9},
    {"image_id": 5, "category_id": 1, "bbox": [2, 2, 10, 8], "score": 0.8},
    {"image_id": 5, "category_id": 2, "bbox": [14, 4, 6, 6], "score": 0.7}])");
  EXPECT_EQ(cmd_eval_map(path("gt.json"), path("pred.json"), {}, out_, err_), kOk);
  EXPECT_EQ(out_.str(), "mAP 0.50\n");
}

TEST_F(CliTest, EvalMapMaskMode) {
  fixture::write_file(path("gt.json"), kValid);
  BinaryMask m(24, 32);
  for (int i = 2; i < 10; ++i)
    for (int j = 2; j < 12; ++j) m.set(i, j);
  png::write_mask(path("m1.png"), m);
  fixture::write_file(path("pred.json"), R"([
    {"image_id": 5, "category_id": 1, "bbox": [2, 2, 10, 8], "score": 0.9, "mask_png": "m1.png"}])");
  EvalMapOptions opts;
  opts.mask_iou = true;
  // Category 2 has two gts on two images; image 6 lacks a size entry.
  EXPECT_EQ(cmd_eval_map(path("gt.json"), path("pred.json"), opts, out_, err_), kDomainFailure);
}

TEST_F(CliTest, EvalAsdr) {
  fixture::write_file(path("b.json"), R"([
    {"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 0.8},
    {"image_id": 1, "category_id": 2, "bbox": [20, 0, 10, 10], "score": 0.5}])");
  fixture::write_file(path("a.json"), R"([
    {"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 0.6}])");
  EXPECT_EQ(cmd_eval_asdr(path("b.json"), path("a.json"), 0.5, path("r.json"), out_, err_), kOk);
  EXPECT_EQ(out_.str(), "ASDR 0.625000 over 2 items\n");
  EXPECT_TRUE(fs::exists(path("r.json")));
}

TEST_F(CliTest, StyleTransferSnapshotsAndDeterminism) {
  png::write_rgb(path("c.png"), fixture::portrait(16, 16, 0));
  png::write_rgb(path("s.png"), fixture::texture(16, 16, 0));
  StyleTransferOptions o;
  o.content = path("c.png");
  o.style = path("s.png");
  o.out_dir = path("one");
  o.nst.iterations = 1;
  EXPECT_EQ(cmd_style_transfer(o, out_, err_), kOk);
  int snaps = 0;
  for (const auto& e : fs::directory_iterator(path("one")))
    snaps += e.path().filename().string().rfind("snap_", 0) == 0;
  EXPECT_EQ(snaps, 1);
  EXPECT_TRUE(fs::exists(path("one/snap_000001.png")));

  o.nst.iterations = 12;
  o.nst.init = "noise";
  o.nst.seed = 3;
  o.out_dir = path("a");
  EXPECT_EQ(cmd_style_transfer(o, out_, err_), kOk);
  o.out_dir = path("b");
  EXPECT_EQ(cmd_style_transfer(o, out_, err_), kOk);
  EXPECT_EQ(read_text(path("a/final.png")), read_text(path("b/final.png")));
  EXPECT_EQ(read_text(path("a/loss.csv")), read_text(path("b/loss.csv")));
  EXPECT_EQ(read_text(path("a/loss.csv")).substr(0, 27), "iter,total,content,style,tv");

  o.nst.optimizer = "sgd";
  EXPECT_EQ(cmd_style_transfer(o, out_, err_), kDomainFailure);
  o.nst.optimizer.reset();
  o.content = path("missing.png");
  EXPECT_EQ(cmd_style_transfer(o, out_, err_), kIoFailure);
}

TEST_F(CliTest, StyleTransferNonFiniteKeepsPartialOutput) {
  png::write_rgb(path("c.png"), fixture::portrait(8, 8, 0));
  png::write_rgb(path("s.png"), fixture::texture(8, 8, 0));
  StyleTransferOptions o;
  o.content = path("c.png");
  o.style = path("s.png");
  o.out_dir = path("inf");
  o.nst.tv_weight = std::numeric_limits<double>::infinity();
  EXPECT_EQ(cmd_style_transfer(o, out_, err_), kDomainFailure);
  EXPECT_TRUE(fs::exists(path("inf/loss.csv")));
}

TEST_F(CliTest, CompositeModes) {
  const auto o = fixture::random_image(6, 6, 1), s = fixture::random_image(6, 6, 2);
  png::write_rgb(path("o.png"), o);
  png::write_rgb(path("s.png"), s);
  BinaryMask m(6, 6);
  m.set(2, 2);
  png::write_mask(path("m.png"), m);
  CompositeOptions c;
  c.original = path("o.png");
  c.stylized = path("s.png");
  c.mask = path("m.png");
  c.out = path("out.png");
  EXPECT_EQ(cmd_composite(c, out_, err_), kOk);
  const auto got = png::read_rgb(path("out.png"));
  const auto orig = png::read_rgb(path("o.png")), sty = png::read_rgb(path("s.png"));
  EXPECT_EQ(got.at(2, 2, 0), sty.at(2, 2, 0));
  EXPECT_EQ(got.at(0, 0, 0), orig.at(0, 0, 0));
  c.texture = path("s.png");
  EXPECT_EQ(cmd_composite(c, out_, err_), kDomainFailure);
  c.stylized.clear();
  EXPECT_EQ(cmd_composite(c, out_, err_), kOk);
}

TEST_F(CliTest, RunNoSelectionReturnsPreprocessed) {
  const auto f = fixture::write_run_fixture(dir_, 0, 3);
  auto m = load_manifest(f.manifest.string());
  m.selections.clear();
  std::ostringstream log;
  const auto r = run_pipeline(m, log);
  EXPECT_EQ(r.composite.values, r.preprocessed.values);
  EXPECT_EQ(read_text(path("out/composite.png")), read_text(path("out/preprocessed.png")));
}

TEST_F(CliTest, RunZeroWeightsIsIdentity) {
  const auto f = fixture::write_run_fixture(dir_, 1, 4);
  auto m = load_manifest(f.manifest.string());
  m.nst.content_weight = 0;
  m.nst.style_weight = 0;
  m.nst.tv_weight = 0;
  std::ostringstream log;
  const auto r = run_pipeline(m, log);
  EXPECT_EQ(r.composite.values, r.preprocessed.values);
}

TEST_F(CliTest, RunTwoCategoriesAndOutputs) {
  const auto f = fixture::write_run_fixture(dir_, 2, 6);
  std::ostringstream log;
  const auto r = run_pipeline(load_manifest(f.manifest.string()), log);
  ASSERT_EQ(r.masks.size(), 2u);
  const auto both = mask_union(r.masks.at(1), r.masks.at(2));
  for (int i = 0; i < both.height; ++i)
    for (int j = 0; j < both.width; ++j)
      if (!both.at(i, j)) {
        for (int c = 0; c < 3; ++c) ASSERT_EQ(r.composite.at(i, j, c), r.preprocessed.at(i, j, c));
      }
  // Category 2 is applied last and wins where the masks overlap.
  for (int i = 0; i < both.height; ++i)
    for (int j = 0; j < both.width; ++j)
      if (r.masks.at(2).at(i, j)) {
        ASSERT_EQ(r.composite.at(i, j, 0), r.stylized.at(2).at(i, j, 0));
      }
  for (const char* name : {"composite.png", "preprocessed.png", "mask_1.png", "mask_2.png",
                           "stylized_1.png", "stylized_2.png", "detections_before.json",
                           "detections_after.json", "loss_cat1.csv", "nst_cat2/snap_000005.png"})
    EXPECT_TRUE(fs::exists(path(std::string("out/") + name))) << name;
  std::ostringstream o2, e2;
  EXPECT_EQ(cmd_eval_asdr(path("out/detections_before.json"), path("out/detections_after.json"),
                          0.5, "", o2, e2),
            kOk);
  EXPECT_EQ(o2.str(), "ASDR 0.000000 over 2 items\n");
}

TEST_F(CliTest, RunMissingCategoryListsAvailable) {
  const auto f = fixture::write_run_fixture(dir_, 0, 2);
  std::string text = read_text(f.manifest.string());
  text.replace(text.find("\"category_id\": 2"), 16, "\"category_id\": 11");
  fixture::write_file(f.manifest, text);
  EXPECT_EQ(cmd_run(f.manifest.string(), "", out_, err_), kDomainFailure);
  EXPECT_NE(err_.str().find("available categories: [1, 2, 7]"), std::string::npos) << err_.str();
}

TEST_F(CliTest, RunWithMasksDir) {
  const auto f = fixture::write_run_fixture(dir_, 0, 2);
  fs::create_directories(path("masks"));
  BinaryMask m1(64, 64), m2(64, 64);
  for (int i = 10; i < 30; ++i)
    for (int j = 5; j < 20; ++j) m1.set(i, j);
  for (int i = 40; i < 50; ++i)
    for (int j = 30; j < 60; ++j) m2.set(i, j);
  png::write_mask(path("masks/mask_1.png"), m1);
  png::write_mask(path("masks/mask_2.png"), m2);
  EXPECT_EQ(cmd_run(f.manifest.string(), path("masks"), out_, err_), kOk) << err_.str();
  EXPECT_EQ(png::read_mask(path("out/mask_1.png")).bits, m1.bits);
}

TEST_F(CliTest, ArgvDispatch) {
  fixture::write_file(path("a.json"), kValid);
  const std::string a = path("a.json");
  std::vector<std::string> args{"fitroom", "validate", a};
  std::vector<char*> argv;
  for (auto& s : args) argv.push_back(s.data());
  EXPECT_EQ(main_entry(static_cast<int>(argv.size()), argv.data()), kOk);
  std::vector<std::string> bad{"fitroom", "frobnicate"};
  std::vector<char*> bargv;
  for (auto& s : bad) bargv.push_back(s.data());
  EXPECT_EQ(main_entry(static_cast<int>(bargv.size()), bargv.data()), kDomainFailure);
}

}  // namespace
}  // namespace fitroom::cli
