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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "blocksplat/renderer.hpp"
#include "oracles.hpp"

using namespace blocksplat;

namespace {

CameraIntrinsics SmallCamera() { return CameraIntrinsics{16, 16, 20, 20, 8, 8}; }

// Primitive on the optical axis of the identity pose.
void AddOnAxis(GaussianSet& s, double depth, double opacity, double color,
               double scale = 0.05) {
  const double logit = opacity >= 1.0 ? 60.0 : Logit(opacity);
  s.push_back(Vec3(0, 0, depth), Vec4(1, 0, 0, 0),
              Vec3::Constant(std::log(scale)), logit, Vec3::Constant(color));
}

double MaxAbsDiff(const Image& a, const Image& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("projection of an on-axis isotropic primitive") {
  const CameraIntrinsics cam = SmallCamera();
  GaussianSet s;
  AddOnAxis(s, 4.0, 0.5, 1.0, 0.2);
  const auto p = Project(s, cam, Pose{});
  REQUIRE(p[0].visible);
  CHECK(p[0].mean2d.x() == doctest::Approx(cam.cx));
  CHECK(p[0].mean2d.y() == doctest::Approx(cam.cy));
  const double expect = std::pow(cam.fx * 0.2 / 4.0, 2) + 0.3;
  CHECK(p[0].cov2d(0, 0) == doctest::Approx(expect));
  CHECK(p[0].cov2d(1, 1) == doctest::Approx(expect));
  CHECK(std::abs(p[0].cov2d(0, 1)) < 1e-12);
  CHECK(p[0].depth_cam == 4.0);
}

TEST_CASE("primitives behind the camera are culled") {
  GaussianSet s;
  AddOnAxis(s, -1.0, 0.9, 1.0);
  AddOnAxis(s, 0.005, 0.9, 1.0);
  const auto p = Project(s, SmallCamera(), Pose{});
  CHECK_FALSE(p[0].visible);
  CHECK_FALSE(p[1].visible);
  const auto v = Render(s, SmallCamera(), Pose{});
  for (double a : v.accum_alpha.data) CHECK(a == 0.0);
}

TEST_CASE("empty set renders the background") {
  const Vec3 bg(0.1, 0.2, 0.3);
  const auto v = Render(GaussianSet{}, SmallCamera(), Pose{}, bg);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(v.color.at(x, y, c) == bg[c]);
      CHECK(v.depth.at(x, y) == 0.0);
      CHECK(v.accum_alpha.at(x, y) == 0.0);
    }
  }
}

TEST_CASE("single primitive at its center pixel") {
  GaussianSet s;
  AddOnAxis(s, 4.0, 0.8, 1.0);
  const auto v = Render(s, SmallCamera(), Pose{});
  for (int c = 0; c < 3; ++c) CHECK(v.color.at(8, 8, c) == doctest::Approx(0.8));
  CHECK(v.depth.at(8, 8) == doctest::Approx(3.2));
  CHECK(v.accum_alpha.at(8, 8) == doctest::Approx(0.8));
}

TEST_CASE("two stacked primitives, the back one clamped to 0.99") {
  GaussianSet s;
  AddOnAxis(s, 6.0, 1.0, 0.0);  // stored first, composited second
  AddOnAxis(s, 2.0, 0.5, 1.0);
  const auto v = Render(s, SmallCamera(), Pose{});
  CHECK(v.color.at(8, 8, 0) == doctest::Approx(0.5));
  // 0.5 * 2 + 0.5 * 0.99 * 6: the back alpha saturates at 0.99, not 1.
  CHECK(v.depth.at(8, 8) == doctest::Approx(3.97));
  CHECK(v.accum_alpha.at(8, 8) == doctest::Approx(1.0 - 0.5 * 0.01));
}

TEST_CASE("traversal stops before transmittance drops below 1e-4") {
  GaussianSet s;
  for (int i = 0; i < 4; ++i) AddOnAxis(s, 2.0 + i, 1.0, 0.25 * i);
  const auto v = Render(s, SmallCamera(), Pose{});
  // After two saturated layers T = 1e-4; a third would leave 1e-6.
  const double expect = 0.99 * 0.0 + 0.01 * 0.99 * 0.25;
  CHECK(v.color.at(8, 8, 0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(v.accum_alpha.at(8, 8) == doctest::Approx(1.0 - 1e-4));
}

TEST_CASE("tiled renderer matches the oracles on random scenes") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 64);
  const auto cam = oracle::TestCamera(32);
  for (int scene = 0; scene < 20; ++scene) {
    const GaussianSet s = oracle::RandomScene(rng, count(rng), 1.2);
    const Vec3 bg(0.2, 0.0, 0.7);
    const auto fast = Render(s, cam, oracle::TestPose(), bg);
    const auto slow = RenderOracle({&s}, cam, oracle::TestPose(), bg);
    const auto plan = oracle::FreezeDecisions(s, cam, oracle::TestPose());
    const auto naive = oracle::RenderFrozen(s, plan, cam, oracle::TestPose(), bg);
    CHECK(MaxAbsDiff(fast.color, slow.color) <= 1e-5);
    CHECK(MaxAbsDiff(fast.depth, slow.depth) <= 1e-5);
    CHECK(MaxAbsDiff(fast.color, naive.color) <= 1e-5);
    CHECK(MaxAbsDiff(fast.depth, naive.depth) <= 1e-5);
    CHECK(MaxAbsDiff(fast.accum_alpha, naive.alpha) <= 1e-5);
  }
}

TEST_CASE("accumulated alpha is one minus the product of transmittances") {
  std::mt19937_64 rng(8);
  const auto cam = oracle::TestCamera(24);
  const GaussianSet s = oracle::RandomScene(rng, 40);
  const auto v = Render(s, cam, oracle::TestPose());
  const auto splats = oracle::ProjectNaive(s, cam, oracle::TestPose());
  const auto plan = oracle::FreezeDecisions(s, cam, oracle::TestPose());
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const size_t p = static_cast<size_t>(y) * cam.width + x;
      double t = 1.0;
      for (size_t k = 0; k < plan.order[p].size(); ++k) {
        const auto& g = splats[plan.order[p][k]];
        const double dx = g.mean.x() - x, dy = g.mean.y() - y;
        const double a = std::min(
            0.99, g.opacity * std::exp(-0.5 * (g.a * dx * dx + 2 * g.b * dx * dy +
                                               g.c * dy * dy)));
        t *= 1.0 - a;
      }
      const double acc = v.accum_alpha.at(x, y);
      CHECK(acc == doctest::Approx(1.0 - t).epsilon(1e-12));
      CHECK(acc >= 0.0);
      CHECK(acc <= 1.0);
    }
  }
}

TEST_CASE("rendering is deterministic and storage-order invariant") {
  std::mt19937_64 rng(12);
  const auto cam = oracle::TestCamera(32);
  const GaussianSet s = oracle::RandomScene(rng, 50);
  const auto a = Render(s, cam, oracle::TestPose());
  const auto b = Render(s, cam, oracle::TestPose());
  CHECK(a.color.data == b.color.data);
  CHECK(a.depth.data == b.depth.data);

  std::vector<size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto c = Render(s.select(perm), cam, oracle::TestPose());
  // Depths are distinct, so the compositing order is unchanged.
  CHECK(c.color.data == a.color.data);
  CHECK(c.depth.data == a.depth.data);

  // Splitting across sets is the same as concatenation.
  const GaussianSet head = s.select({0, 1, 2, 3, 4});
  std::vector<size_t> rest(s.size() - 5);
  std::iota(rest.begin(), rest.end(), 5);
  const GaussianSet tail = s.select(rest);
  const auto d = Render(SetList{&head, &tail}, cam, oracle::TestPose());
  CHECK(d.color.data == a.color.data);
}

TEST_CASE("equal depths break ties by global index") {
  GaussianSet s;
  AddOnAxis(s, 3.0, 0.6, 1.0);
  AddOnAxis(s, 3.0, 0.6, 0.0);
  const auto v = Render(s, SmallCamera(), Pose{});
  CHECK(v.color.at(8, 8, 0) == doctest::Approx(0.6));
  GaussianSet swapped = s.select({1, 0});
  const auto w = Render(swapped, SmallCamera(), Pose{});
  CHECK(w.color.at(8, 8, 0) == doctest::Approx(0.4 * 0.6));
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(2);
  const auto cam = oracle::TestCamera(32);
  const GaussianSet s = oracle::RandomScene(rng, 8);
  const auto v = Render(s, cam, oracle::TestPose());
  const Image zc(32, 32, 3), zd(32, 32, 1);
  const auto b = RenderBackward(v, zc, &zd, {&s}, cam, oracle::TestPose());
  const auto& g = b.grads[0];
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(g.positions[i].norm() == 0.0);
    CHECK(g.rotations[i].norm() == 0.0);
    CHECK(g.log_scales[i].norm() == 0.0);
    CHECK(g.colors[i].norm() == 0.0);
    CHECK(g.opacity_logits[i] == 0.0);
  }
}

TEST_CASE("color gradient at the center pixel equals alpha") {
  GaussianSet s;
  AddOnAxis(s, 4.0, 0.8, 0.5);
  const auto cam = SmallCamera();
  const auto v = Render(s, cam, Pose{});
  Image dc(16, 16, 3);
  for (int c = 0; c < 3; ++c) dc.at(8, 8, c) = 1.0;
  const auto b = RenderBackward(v, dc, nullptr, {&s}, cam, Pose{});
  for (int c = 0; c < 3; ++c) {
    CHECK(b.grads[0].colors[0][c] == doctest::Approx(0.8));
  }
  CHECK(b.hit[0][0] == 1);
}

TEST_CASE("backward argument errors") {
  GaussianSet s;
  AddOnAxis(s, 4.0, 0.8, 0.5);
  const auto cam = SmallCamera();
  RenderedView bare;
  bare.color = Image(16, 16, 3);
  try {
    RenderBackward(bare, Image(16, 16, 3), nullptr, {&s}, cam, Pose{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingForwardState);
  }
  const auto v = Render(s, cam, Pose{});
  try {
    RenderBackward(v, Image(8, 16, 3), nullptr, {&s}, cam, Pose{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(99);
  const auto cam = oracle::TestCamera(32);
  for (int scene = 0; scene < 3; ++scene) {
    const GaussianSet s = oracle::RandomScene(rng, 8);
    const auto stats = oracle::CheckLossGradients(
        s, cam, oracle::TestPose(), Vec3(0.1, 0.3, 0.2), rng, 1e-4, 1e-3, 1e-6);
    CHECK(stats.checked == 8 * 14);
    CHECK_MESSAGE(stats.failed == 0, stats.worst);
  }
}
