// Copyright 2026 The BlockSplat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "blocksplat/config.hpp"
#include "blocksplat/image_io.hpp"
#include "blocksplat/ply_io.hpp"
#include "blocksplat/pipeline.hpp"
#include "oracles.hpp"

using namespace blocksplat;
namespace fs = std::filesystem;

namespace {

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("config parsing resolves paths and rejects unknown keys") {
  oracle::TempDir tmp("cfg");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 50);
  const PipelineConfig cfg = LoadPipelineConfig(tmp.path() / "c.toml");
  CHECK(cfg.paths.sfm_dir == fs::absolute(tmp.path()) / "sfm");
  CHECK(cfg.paths.output_dir == fs::absolute(tmp.path()) / "out");
  CHECK(cfg.partition.block_point_threshold == 60);
  REQUIRE(cfg.partition.roi.has_value());
  CHECK(*cfg.partition.roi == Rect{-1, -1, 1, 1});
  CHECK(cfg.partition.up_axis == UpAxis::kPosY);
  CHECK(cfg.train.iterations == 50);
  CHECK(cfg.holdout_every == 6);

  CHECK(CodeOf([&] { ParsePipelineConfig("[train]\nbogus = 1\n", tmp.path()); }) ==
        ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParsePipelineConfig("[nope]\n", tmp.path()); }) ==
        ErrorCode::kConfig);
  CHECK(CodeOf([&] {
          ParsePipelineConfig("[partition]\nroi = [1, 1, 0, 0]\n", tmp.path());
        }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { ParsePipelineConfig("[train\n", tmp.path()); }) ==
        ErrorCode::kConfig);
  CHECK(CodeOf([&] {
          ParsePipelineConfig("[pipeline]\nparallel_workers = 0\n", tmp.path());
        }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { LoadPipelineConfig(tmp.path() / "missing.toml"); }) ==
        ErrorCode::kConfig);
}

TEST_CASE("overrides and serialization round-trip") {
  oracle::TempDir tmp("cfg_rt");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 50);
  const PipelineConfig cfg = LoadPipelineConfig(tmp.path() / "c.toml");
  const PipelineConfig o = WithOverride(cfg, "train.iterations", "7");
  CHECK(o.train.iterations == 7);
  CHECK(WithOverride(cfg, "partition.up_axis", "+z").partition.up_axis ==
        UpAxis::kPosZ);
  CHECK(!WithOverride(cfg, "partition.roi", "auto").partition.roi.has_value());
  CHECK_THROWS_AS(WithOverride(cfg, "train.nothing", "1"), Error);
  CHECK_THROWS_AS(WithOverride(cfg, "iterations", "1"), Error);

  const std::string text = PipelineConfigToToml(o);
  const PipelineConfig back = ParsePipelineConfig(text, "/");
  CHECK(PipelineConfigToToml(back) == text);
  CHECK(back.train.iterations == 7);
  CHECK(back.paths.image_dir == o.paths.image_dir);
}

TEST_CASE("held-out split takes every k-th view from the first") {
  SparseModel m;
  for (int id : {3, 5, 8, 9, 10, 12, 20}) m.views[id].view_id = id;
  CHECK(HeldOutViewIds(m, 3) == std::vector<int>{3, 9, 20});
  CHECK(TrainingViewIds(m, 3) == std::vector<int>{5, 8, 10, 12});
  CHECK(HeldOutViewIds(m, 0).empty());
  CHECK(TrainingViewIds(m, 0).size() == 7);
}

TEST_CASE("pose files") {
  oracle::TempDir tmp("poses");
  std::ofstream(tmp.path() / "empty.txt") << "# nothing\n\n";
  CHECK(ParsePoseFile(tmp.path() / "empty.txt").empty());
  std::ofstream(tmp.path() / "one.txt")
      << "# name w h fx fy cx cy qw qx qy qz tx ty tz\n"
         "cam_a 32 24 30 30 15.5 11.5 1 0 0 0 0 0 4\n";
  const auto cams = ParsePoseFile(tmp.path() / "one.txt");
  REQUIRE(cams.size() == 1);
  CHECK(cams[0].name == "cam_a");
  CHECK(cams[0].cam.width == 32);
  CHECK(cams[0].pose.translation == Vec3(0, 0, 4));
  std::ofstream(tmp.path() / "bad.txt") << "cam_a 32 24 30 30\n";
  CHECK(CodeOf([&] { ParsePoseFile(tmp.path() / "bad.txt"); }) ==
        ErrorCode::kInvalidArgument);
  std::ofstream(tmp.path() / "long.txt")
      << "cam_a 32 24 30 30 15.5 11.5 1 0 0 0 0 0 4 9\n";
  CHECK(CodeOf([&] { ParsePoseFile(tmp.path() / "long.txt"); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("stages run end to end and reproduce their artifacts") {
  oracle::TempDir tmp("stages");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 4);
  Pipeline p(LoadPipelineConfig(tmp.path() / "c.toml"));
  p.RunSynth();
  const fs::path out = tmp.path() / "out";

  const PartitionSummary sum = p.RunPartition();
  CHECK(sum.n_blocks >= 2);
  const BlockPlan plan = p.LoadPlan();
  int leaf_points = 0;
  for (const auto& b : plan.blocks) leaf_points += b.point_count;
  CHECK(leaf_points == sum.points_in_roi);
  const std::string plan_bytes = Slurp(out / "blockplan.json");
  p.RunPartition();
  CHECK(Slurp(out / "blockplan.json") == plan_bytes);
  CHECK(fs::exists(out / "config.toml"));
  // Held-out views never supervise a block.
  for (const auto& b : plan.blocks) {
    for (int v : b.assigned_view_ids) CHECK((v - 1) % 6 != 0);
  }

  for (const auto& b : plan.blocks) p.RunOptimizeBlock(b.block_id);
  CHECK(fs::exists(out / "block_0" / "point_cloud.ply"));
  CHECK(fs::exists(out / "block_0" / "aux_point_cloud.ply"));
  std::ifstream log(out / "block_0" / "train_log.jsonl");
  int lines = 0;
  for (std::string l; std::getline(log, l); ++lines) {
    const auto j = nlohmann::json::parse(l);
    CHECK(j.contains("loss"));
    CHECK(j.contains("iteration"));
  }
  CHECK(lines == 4);
  CHECK(CodeOf([&] { p.RunOptimizeBlock(99); }) == ErrorCode::kInvalidArgument);

  const SceneModel scene = p.RunMerge();
  CHECK(scene.gaussians.size() > 0);
  const std::string merged = Slurp(out / "scene" / "point_cloud.ply");
  fs::remove_all(out / "scene");
  p.RunMerge();
  CHECK(Slurp(out / "scene" / "point_cloud.ply") == merged);

  const auto renders = p.RunRender(std::nullopt);
  CHECK(renders.size() == 4);
  for (const auto& r : renders) CHECK(fs::exists(r));

  const EvalReport rep = p.RunEval();
  CHECK(rep.views.size() == 4);
  const std::string report = Slurp(out / "eval_report.json");
  const auto j = nlohmann::json::parse(report);
  CHECK(j["views"].size() == 4);
  for (const auto& v : j["views"]) {
    CHECK(v.contains("psnr"));
    CHECK(v.contains("ssim"));
    CHECK(v.contains("name"));
  }
  p.RunEval();
  CHECK(Slurp(out / "eval_report.json") == report);
}

TEST_CASE("downsampled training reads full-resolution priors") {
  oracle::TempDir tmp("downsample");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 2);
  auto cfg = LoadPipelineConfig(tmp.path() / "c.toml");
  Pipeline full(cfg);
  full.RunSynth();
  const BlockPlan plan = [&] {
    full.RunPartition();
    return full.LoadPlan();
  }();
  Pipeline half(WithOverride(cfg, "pipeline.image_downsample", "2"));
  CHECK_NOTHROW(half.RunOptimizeBlock(plan.blocks.front().block_id));
  CHECK(fs::exists(tmp.path() / "out" / "block_0" / "point_cloud.ply"));
}

TEST_CASE("a large point threshold gives one block") {
  oracle::TempDir tmp("one_block");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 1);
  auto cfg = LoadPipelineConfig(tmp.path() / "c.toml");
  cfg = WithOverride(cfg, "partition.block_point_threshold", "100000");
  Pipeline p(cfg);
  p.RunSynth();
  CHECK(p.RunPartition().n_blocks == 1);
}

TEST_CASE("evaluating a scene against its own renders hits the cap") {
  oracle::TempDir tmp("self_eval");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 1);
  Pipeline p(LoadPipelineConfig(tmp.path() / "c.toml"));
  p.RunSynth();
  // An empty scene renders black; make the held-out images black too.
  fs::create_directories(tmp.path() / "out" / "scene");
  WritePly(GaussianSet{}, tmp.path() / "out" / "scene" / "point_cloud.ply");
  const SparseModel model = ParseSparseModel(tmp.path() / "sfm");
  for (int id : HeldOutViewIds(model, 6)) {
    const auto& v = model.views.at(id);
    const auto& k = model.cameras.at(v.intrinsics_id);
    WritePng8(tmp.path() / "images" / v.image_path, Image(k.width, k.height, 3));
  }
  const EvalReport rep = p.RunEval();
  REQUIRE(rep.views.size() == 4);
  for (const auto& v : rep.views) {
    CHECK(v.psnr == 100.0);
    CHECK(v.ssim == doctest::Approx(1.0));
  }
}

TEST_CASE("stages report missing inputs") {
  oracle::TempDir tmp("missing");
  oracle::WriteDemoConfig(tmp.path() / "c.toml", 1);
  Pipeline p(LoadPipelineConfig(tmp.path() / "c.toml"));
  CHECK_THROWS_AS(p.RunPartition(), Error);
  p.RunSynth();
  CHECK_THROWS_AS(p.LoadPlan(), Error);
  CHECK_THROWS_AS(p.RunMerge(), Error);
}
