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

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "blocksplat/gaussians.hpp"
#include "blocksplat/ply_io.hpp"
#include "oracles.hpp"

using namespace blocksplat;
namespace fs = std::filesystem;

namespace {

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

SparsePoint Point(int64_t id, const Vec3& pos, std::set<int> views) {
  SparsePoint p;
  p.point_id = id;
  p.position = pos;
  p.color = Vec3(0.2, 0.4, 0.6);
  p.observing_view_ids = std::move(views);
  return p;
}

// Block [0,1]x[0,1] with identity alignment; view 1 assigned, view 2 not.
struct InitFixture {
  SparseModel model;
  BlockPlan plan;
  Block block;
  InitFixture() {
    block.block_id = 0;
    block.bounds = Rect{0, 0, 1, 1};
    block.assigned_view_ids = {1};
    plan.roi = Rect{-5, -5, 5, 5};
    plan.blocks = {block};
    for (int v : {1, 2}) {
      ViewRecord r;
      r.view_id = v;
      model.views[v] = r;
    }
  }
  void Add(const SparsePoint& p) {
    model.points[p.point_id] = p;
    for (int v : p.observing_view_ids) {
      model.views[v].visible_point_ids.insert(p.point_id);
    }
  }
};

}  // namespace

TEST_CASE("init splits block and auxiliary points") {
  InitFixture f;
  for (int i = 0; i < 6; ++i) {
    f.Add(Point(i, Vec3(0.1 + 0.15 * i, 0.0, 0.5), {1}));
  }
  for (int i = 0; i < 4; ++i) {
    f.Add(Point(10 + i, Vec3(2.0 + i, 0.0, 0.5), {1, 2}));
  }
  f.Add(Point(20, Vec3(-3.0, 0.0, 0.5), {2}));  // seen only by view 2
  const auto s = InitBlockGaussians(f.model, f.block, f.plan);
  CHECK(s.block.size() == 6);
  CHECK(s.auxiliary.size() == 4);
  for (const auto& p : s.auxiliary.positions) CHECK(p.x() >= 2.0);
  CHECK(s.membership(5) == Membership::kBlock);
  CHECK(s.membership(6) == Membership::kAux);
  CHECK(s.block.opacity(0) == doctest::Approx(kInitialOpacity));
  CHECK(s.block.rotations[0] == Vec4(1, 0, 0, 0));
  CHECK(s.block.colors[0] == Vec3(0.2, 0.4, 0.6));
  // Scale from the three nearest neighbors of the first point: 0.15, 0.3,
  // 0.45 along x.
  const double rms = std::sqrt((0.15 * 0.15 + 0.3 * 0.3 + 0.45 * 0.45) / 3.0);
  CHECK(std::exp(s.block.log_scales[0].x()) == doctest::Approx(rms));
  CHECK(s.block.log_scales[0].x() == s.block.log_scales[0].z());
}

TEST_CASE("an isolated point falls back to 1% of the block diagonal") {
  InitFixture f;
  f.Add(Point(0, Vec3(0.5, 0.0, 0.5), {1}));
  const auto s = InitBlockGaussians(f.model, f.block, f.plan);
  REQUIRE(s.block.size() == 1);
  CHECK(std::exp(s.block.log_scales[0].x()) ==
        doctest::Approx(0.01 * std::sqrt(2.0)));
}

TEST_CASE("init errors") {
  InitFixture f;
  f.Add(Point(0, Vec3(3.0, 0.0, 0.5), {1}));
  try {
    InitBlockGaussians(f.model, f.block, f.plan);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyBlock);
  }
  f.block.assigned_view_ids.clear();
  try {
    InitBlockGaussians(f.model, f.block, f.plan);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoViews);
  }
}

TEST_CASE("crop keeps inside primitives in order") {
  std::mt19937_64 rng(3);
  GaussianSet all;
  const std::vector<Vec3> pos = {
      {0.5, 9, 0.5}, {2, 0, 0}, {0.1, 0, 0.9}, {-1, 0, 0.5}, {0.9, -4, 0.1},
      {1.0, 0, 1.0}, {0.3, 0, 0.3}, {0.5, 0, 1.5}, {0.0, 0, 0.0}, {0.7, 1, 0.2}};
  for (const auto& p : pos) {
    all.push_back(p, Vec4(1, 0, 0, 0), Vec3::Zero(), 0.0, Vec3::Zero());
  }
  const GaussianSet c = CropToBounds(all, Rect{0, 0, 1, 1});
  REQUIRE(c.size() == 7);
  CHECK(c.positions[0] == pos[0]);
  CHECK(c.positions[1] == pos[2]);
  CHECK(c.positions[6] == pos[9]);
  CHECK(CropToBounds(all, Rect{-100, -100, 100, 100}) == all);
  CHECK(CropToBounds(all, Rect{50, 50, 60, 60}).empty());
}

TEST_CASE("crop distributes over concatenation") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const GaussianSet a = oracle::RandomScene(rng, 30, 2.0);
    const GaussianSet b = oracle::RandomScene(rng, 17, 2.0);
    const Rect r{-0.5, -0.2, 0.8, 0.4};
    const Mat3 rot = Eigen::AngleAxisd(0.3 * trial, Vec3::UnitY()).toRotationMatrix();
    CHECK(CropToBounds(Concat({a, b}), r, rot) ==
          Concat({CropToBounds(a, r, rot), CropToBounds(b, r, rot)}));
  }
}

TEST_CASE("PLY round trip is byte-stable on the second write") {
  std::mt19937_64 rng(21);
  const GaussianSet g = oracle::RandomScene(rng, 40);
  oracle::TempDir tmp("ply");
  WritePly(g, tmp.path() / "a.ply");
  const GaussianSet r1 = ReadPly(tmp.path() / "a.ply");
  REQUIRE(r1.size() == g.size());
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK((r1.positions[i] - g.positions[i]).norm() < 1e-6);
    CHECK((r1.colors[i] - g.colors[i]).norm() < 1e-6);
    CHECK((r1.rotations[i] - g.rotations[i]).norm() < 1e-6);
    CHECK(std::abs(r1.opacity_logits[i] - g.opacity_logits[i]) < 1e-6);
  }
  WritePly(r1, tmp.path() / "b.ply");
  const GaussianSet r2 = ReadPly(tmp.path() / "b.ply");
  WritePly(r2, tmp.path() / "c.ply");
  CHECK(Slurp(tmp.path() / "b.ply") == Slurp(tmp.path() / "c.ply"));
  CHECK(r1 == r2);
}

TEST_CASE("PLY reader skips extra properties and reports bad files") {
  oracle::TempDir tmp("ply_bad");
  const std::vector<std::string> names = {
      "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "f_rest_0", "opacity",
      "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};
  std::string header = "ply\nformat binary_little_endian 1.0\n"
                       "comment extra\nelement vertex 2\n";
  for (const auto& n : names) header += "property float " + n + "\n";
  header += "end_header\n";
  std::string body;
  for (int v = 0; v < 2; ++v) {
    for (size_t k = 0; k < names.size(); ++k) {
      const float f = names[k] == "rot_0" ? 1.0f : 0.25f * (v + 1);
      body.append(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
  std::ofstream(tmp.path() / "extra.ply", std::ios::binary) << header << body;
  const GaussianSet g = ReadPly(tmp.path() / "extra.ply");
  REQUIRE(g.size() == 2);
  CHECK(g.positions[1].x() == doctest::Approx(0.5));
  CHECK(g.colors[0].x() == doctest::Approx(0.25 * kShC0 + 0.5));

  std::ofstream(tmp.path() / "short.ply", std::ios::binary)
      << header << body.substr(0, body.size() - 3);
  try {
    ReadPly(tmp.path() / "short.ply");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruncatedFile);
  }

  std::string missing = header;
  missing.replace(missing.find("property float opacity\n"),
                  std::strlen("property float opacity\n"), "");
  std::ofstream(tmp.path() / "missing.ply", std::ios::binary)
      << missing << body;
  try {
    ReadPly(tmp.path() / "missing.ply");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownAttribute);
  }
  CHECK_THROWS_AS(ReadPly(tmp.path() / "absent.ply"), Error);
}

TEST_CASE("sigmoid and logit invert each other") {
  for (double p : {0.005, 0.1, 0.5, 0.9, 0.995}) {
    CHECK(Sigmoid(Logit(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}
