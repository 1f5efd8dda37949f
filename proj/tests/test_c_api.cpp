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

// Exercises the shared library through its C header only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "blocksplat/blocksplat.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() /
          ("bs_capi_" + std::to_string(std::rand()) + "_" +
           std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

void WriteConfig(const fs::path& path, int iterations) {
  std::ofstream out(path);
  out << "[paths]\nsfm_dir = \"sfm\"\nimage_dir = \"images\"\n"
         "depth_dir = \"depths\"\noutput_dir = \"out\"\n"
         "[partition]\nblock_point_threshold = 60\nroi = [-1.0, -1.0, 1.0, 1.0]\n"
         "up_axis = \"+y\"\n"
         "[train]\niterations = "
      << iterations << "\ndensify_start = " << iterations + 1
      << "\n[eval]\nholdout_every = 6\n";
}

bs_camera FrontCamera(int size) {
  bs_camera c{};
  c.width = size;
  c.height = size;
  c.fx = c.fy = 30.0 * size / 32.0;
  c.cx = c.cy = size / 2.0;
  c.qvec[0] = 1.0;
  c.tvec[2] = 4.0;
  return c;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(bs_version()) > 0);
  CHECK(std::string(bs_status_name(BS_OK)) == "ok");
  CHECK(std::string(bs_status_name(BS_ERR_PLAN_MISMATCH)).size() > 0);
  CHECK(std::string(bs_status_name(static_cast<bs_status>(12345))).size() > 0);
}

TEST_CASE("argument checks") {
  bs_pipeline* p = nullptr;
  CHECK(bs_pipeline_open(nullptr, &p) == BS_ERR_INVALID_ARGUMENT);
  CHECK(bs_pipeline_open("/nonexistent/blocksplat.toml", &p) == BS_ERR_CONFIG);
  CHECK(p == nullptr);
  CHECK(std::strlen(bs_last_error()) > 0);
  CHECK(bs_pipeline_synth(nullptr) == BS_ERR_INVALID_ARGUMENT);
  bs_pipeline_close(nullptr);

  bs_gaussians* g = nullptr;
  CHECK(bs_gaussians_read_ply("/nonexistent.ply", &g) != BS_OK);
  CHECK(g == nullptr);
  CHECK(bs_gaussians_count(nullptr) == 0);
  double out = 0.0;
  CHECK(bs_psnr(nullptr, nullptr, 3, &out) == BS_ERR_INVALID_ARGUMENT);
}

TEST_CASE("psnr") {
  const std::vector<float> a(12, 0.5f), b(12, 0.6f);
  double out = 0.0;
  REQUIRE(bs_psnr(a.data(), b.data(), a.size(), &out) == BS_OK);
  CHECK(out == doctest::Approx(20.0).epsilon(1e-5));
  REQUIRE(bs_psnr(a.data(), a.data(), a.size(), &out) == BS_OK);
  CHECK(out == 100.0);
}

TEST_CASE("pipeline through the C interface") {
  Scratch tmp;
  WriteConfig(tmp.dir / "c.toml", 3);
  bs_pipeline* p = nullptr;
  REQUIRE(bs_pipeline_open((tmp.dir / "c.toml").c_str(), &p) == BS_OK);
  CHECK(bs_pipeline_set(p, "train.bogus", "1") == BS_ERR_CONFIG);
  CHECK(bs_pipeline_set(p, "pipeline.parallel_workers", "3") == BS_OK);
  int workers = 0;
  REQUIRE(bs_pipeline_parallel_workers(p, &workers) == BS_OK);
  CHECK(workers == 3);

  REQUIRE(bs_pipeline_synth(p) == BS_OK);
  bs_partition_summary sum{};
  REQUIRE(bs_pipeline_partition(p, &sum) == BS_OK);
  CHECK(sum.n_blocks >= 2);

  size_t count = 0;
  REQUIRE(bs_pipeline_block_ids(p, nullptr, 0, &count) == BS_OK);
  CHECK(count == static_cast<size_t>(sum.n_blocks));
  std::vector<int> ids(count);
  REQUIRE(bs_pipeline_block_ids(p, ids.data(), ids.size(), &count) == BS_OK);
  for (int id : ids) REQUIRE(bs_pipeline_optimize_block(p, id) == BS_OK);
  CHECK(bs_pipeline_optimize_block(p, 1000) == BS_ERR_INVALID_ARGUMENT);
  CHECK(std::string(bs_last_error()).find("1000") != std::string::npos);

  size_t n_prims = 0;
  REQUIRE(bs_pipeline_merge(p, &n_prims) == BS_OK);
  CHECK(n_prims > 0);
  size_t written = 0;
  REQUIRE(bs_pipeline_render(p, nullptr, &written) == BS_OK);
  CHECK(written == 4);
  bs_eval_summary ev{};
  REQUIRE(bs_pipeline_eval(p, &ev) == BS_OK);
  CHECK(ev.n_views == 4);
  CHECK(std::isfinite(ev.mean_psnr));
  CHECK(ev.mean_ssim <= 1.0);
  bs_pipeline_close(p);

  bs_gaussians* g = nullptr;
  const fs::path ply = tmp.dir / "out" / "scene" / "point_cloud.ply";
  REQUIRE(bs_gaussians_read_ply(ply.c_str(), &g) == BS_OK);
  CHECK(bs_gaussians_count(g) == n_prims);
  const fs::path copy = tmp.dir / "copy.ply";
  REQUIRE(bs_gaussians_write_ply(g, copy.c_str()) == BS_OK);
  CHECK(fs::file_size(copy) == fs::file_size(ply));

  const bs_camera cam = FrontCamera(32);
  const float bg[3] = {0.f, 0.f, 0.f};
  std::vector<float> rgb(32 * 32 * 3), depth(32 * 32), alpha(32 * 32);
  REQUIRE(bs_render(g, &cam, bg, rgb.data(), depth.data(), alpha.data()) ==
          BS_OK);
  for (float a : alpha) {
    CHECK(a >= 0.f);
    CHECK(a <= 1.f);
  }
  // Depth and alpha outputs are optional.
  CHECK(bs_render(g, &cam, bg, rgb.data(), nullptr, nullptr) == BS_OK);
  bs_camera bad = cam;
  bad.width = 0;
  CHECK(bs_render(g, &bad, bg, rgb.data(), nullptr, nullptr) ==
        BS_ERR_INVALID_ARGUMENT);
  bs_gaussians_free(g);
}
