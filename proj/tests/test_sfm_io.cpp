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
#include <random>

#include "blocksplat/image_io.hpp"
#include "blocksplat/sfm_io.hpp"
#include "oracles.hpp"

using namespace blocksplat;
namespace fs = std::filesystem;

namespace {

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

// One camera, two images, three points seen by both.
void WriteMinimal(const fs::path& dir) {
  fs::create_directories(dir);
  WriteText(dir / "cameras.txt", "1 PINHOLE 8 6 10 10 4 3\n");
  WriteText(dir / "images.txt",
            "# comment\n"
            "1 1 0 0 0 0 0 0 1 a.png\n"
            "1 1 1 2 2 2 3 3 3\n"
            "2 1 0 0 0 1 0 0 1 b.png\n"
            "1 1 1 2 2 2 3 3 3\n");
  WriteText(dir / "points3D.txt",
            "1 0 0 5 255 0 0 0.1 1 0 2 0\n"
            "2 1 0 5 0 255 0 0.1 1 1 2 1\n"
            "3 0 1 5 0 0 255 0.1 1 2 2 2\n");
}

SparseModel RandomModel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SparseModel m;
  m.cameras[1] = CameraIntrinsics{64, 48, 50.5, 51.25, 31.5, 23.5};
  m.cameras[3] = CameraIntrinsics{32, 32, 20, 20, 16, 16};
  for (int v = 1; v <= 5; ++v) {
    ViewRecord r;
    r.view_id = v * 2;
    r.intrinsics_id = v % 2 ? 1 : 3;
    r.pose.rotation =
        Eigen::Quaterniond(Vec4(u(rng), u(rng), u(rng), u(rng)).normalized())
            .toRotationMatrix();
    r.pose.translation = Vec3(u(rng), u(rng), u(rng)) * 3.0;
    r.image_path = "img_" + std::to_string(v) + ".png";
    m.views[r.view_id] = r;
  }
  for (int64_t p = 0; p < 40; ++p) {
    SparsePoint sp;
    sp.point_id = 100 + p * 7;
    sp.position = Vec3(u(rng), u(rng), u(rng)) * 10.0;
    sp.color = Vec3(std::lround((u(rng) + 1) * 127.5),
                    std::lround((u(rng) + 1) * 127.5),
                    std::lround((u(rng) + 1) * 127.5)) / 255.0;
    // Every point keeps a non-empty track; view 2 always observes.
    for (auto& [vid, view] : m.views) {
      if (vid == 2 || u(rng) > 0.0) {
        sp.observing_view_ids.insert(vid);
        view.visible_point_ids.insert(sp.point_id);
      }
    }
    m.points[sp.point_id] = sp;
  }
  return m;
}

void RequireSameModel(const SparseModel& a, const SparseModel& b) {
  REQUIRE(a.cameras.size() == b.cameras.size());
  for (const auto& [id, k] : a.cameras) {
    const auto& o = b.cameras.at(id);
    CHECK(k.width == o.width);
    CHECK(k.height == o.height);
    CHECK(k.fx == doctest::Approx(o.fx).epsilon(1e-6));
    CHECK(k.fy == doctest::Approx(o.fy).epsilon(1e-6));
    CHECK(k.cx == doctest::Approx(o.cx).epsilon(1e-6));
    CHECK(k.cy == doctest::Approx(o.cy).epsilon(1e-6));
  }
  REQUIRE(a.views.size() == b.views.size());
  for (const auto& [id, v] : a.views) {
    const auto& o = b.views.at(id);
    CHECK(v.intrinsics_id == o.intrinsics_id);
    CHECK(v.image_path == o.image_path);
    CHECK(v.visible_point_ids == o.visible_point_ids);
    CHECK((v.pose.rotation - o.pose.rotation).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((v.pose.translation - o.pose.translation).cwiseAbs().maxCoeff() <=
          1e-6);
  }
  REQUIRE(a.points.size() == b.points.size());
  for (const auto& [id, p] : a.points) {
    const auto& o = b.points.at(id);
    CHECK((p.position - o.position).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((p.color - o.color).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(p.observing_view_ids == o.observing_view_ids);
  }
}

}  // namespace

TEST_CASE("minimal text model parses with symmetric visibility") {
  oracle::TempDir tmp("sfm_min");
  WriteMinimal(tmp.path());
  const SparseModel m = ParseSparseModel(tmp.path());
  CHECK(m.views.size() == 2);
  CHECK(m.points.size() == 3);
  CHECK_NOTHROW(m.CheckVisibilitySymmetry());
  for (const auto& [id, p] : m.points) {
    CHECK(p.observing_view_ids == std::set<int>{1, 2});
  }
  CHECK(m.views.at(1).visible_point_ids == std::set<int64_t>{1, 2, 3});
  CHECK(m.points.at(1).color.x() == doctest::Approx(1.0));
}

TEST_CASE("track naming an unknown view is a visibility asymmetry") {
  oracle::TempDir tmp("sfm_asym");
  WriteMinimal(tmp.path());
  WriteText(tmp.path() / "points3D.txt",
            "1 0 0 5 255 0 0 0.1 1 0 2 0 7 0\n"
            "2 1 0 5 0 255 0 0.1 1 1 2 1\n"
            "3 0 1 5 0 0 255 0.1 1 2 2 2\n");
  try {
    ParseSparseModel(tmp.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kVisibilityAsymmetry);
  }
}

TEST_CASE("unsupported camera model is rejected") {
  oracle::TempDir tmp("sfm_cam");
  WriteMinimal(tmp.path());
  WriteText(tmp.path() / "cameras.txt", "1 OPENCV 8 6 10 10 4 3 0 0 0 0\n");
  try {
    ParseSparseModel(tmp.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedCameraModel);
  }
}

TEST_CASE("malformed record and missing file") {
  oracle::TempDir tmp("sfm_bad");
  WriteMinimal(tmp.path());
  WriteText(tmp.path() / "images.txt", "1 1 0 0 zero 0 0 0 1 a.png\n\n");
  CHECK_THROWS_AS(ParseSparseModel(tmp.path()), Error);
  fs::remove(tmp.path() / "images.txt");
  CHECK_THROWS_AS(ParseSparseModel(tmp.path(), SfmFormat::kText), Error);
}

TEST_CASE("simple pinhole shares the focal length") {
  oracle::TempDir tmp("sfm_simple");
  WriteMinimal(tmp.path());
  WriteText(tmp.path() / "cameras.txt", "1 SIMPLE_PINHOLE 8 6 12 4 3\n");
  const auto m = ParseSparseModel(tmp.path());
  CHECK(m.cameras.at(1).fx == 12.0);
  CHECK(m.cameras.at(1).fy == 12.0);
}

TEST_CASE("binary and text exports agree and round-trip") {
  std::mt19937_64 rng(11);
  const SparseModel model = RandomModel(rng);
  oracle::TempDir tmp("sfm_rt");
  oracle::WriteColmapText(model, tmp.path() / "ref_text");
  WriteSparseModel(model, tmp.path() / "bin", SfmFormat::kBinary);
  WriteSparseModel(model, tmp.path() / "text", SfmFormat::kText);
  const auto from_ref = ParseSparseModel(tmp.path() / "ref_text");
  const auto from_bin = ParseSparseModel(tmp.path() / "bin");
  const auto from_text = ParseSparseModel(tmp.path() / "text");
  RequireSameModel(model, from_ref);
  RequireSameModel(from_ref, from_bin);
  RequireSameModel(from_ref, from_text);
}

TEST_CASE("record order does not matter") {
  std::mt19937_64 rng(5);
  const SparseModel model = RandomModel(rng);
  oracle::TempDir tmp("sfm_order");
  oracle::WriteColmapText(model, tmp.path() / "a");
  // Reverse the point lines.
  std::ifstream in(tmp.path() / "a" / "points3D.txt");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  fs::create_directories(tmp.path() / "b");
  fs::copy(tmp.path() / "a" / "cameras.txt", tmp.path() / "b");
  fs::copy(tmp.path() / "a" / "images.txt", tmp.path() / "b");
  std::ofstream out(tmp.path() / "b" / "points3D.txt");
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) out << *it << '\n';
  out.close();
  RequireSameModel(ParseSparseModel(tmp.path() / "a"),
                   ParseSparseModel(tmp.path() / "b"));
}

TEST_CASE("depth priors from PFM and 16-bit PNG") {
  oracle::TempDir tmp("sfm_depth");
  ViewRecord view;
  view.view_id = 3;
  const CameraIntrinsics cam{4, 3, 5, 5, 2, 1.5};

  Image constant(4, 3, 1, 5.0);
  WritePfm(tmp.path() / "c.pfm", constant);
  const auto p = LoadDepthPrior(tmp.path() / "c.pfm", view, cam);
  CHECK(p.view_id == 3);
  for (double v : p.depth.data) CHECK(v == 5.0);

  Image holed = constant;
  holed.at(1, 2) = 0.0;
  WritePfm(tmp.path() / "h.pfm", holed);
  const auto q = LoadDepthPrior(tmp.path() / "h.pfm", view, cam);
  CHECK_FALSE(q.valid(1, 2));
  CHECK(q.valid(0, 0));
  CHECK(q.depth.at(3, 2) == 5.0);

  Image raw(4, 3, 1, 1000.0);
  WritePng16Gray(tmp.path() / "d.png", raw);
  std::ofstream(tmp.path() / "d.json") << R"({"scale": 0.01})";
  const auto r = LoadDepthPrior(tmp.path() / "d.png", view, cam);
  for (double v : r.depth.data) CHECK(v == doctest::Approx(10.0));

  CHECK_THROWS_AS(LoadDepthPrior(tmp.path() / "none.pfm", view, cam), Error);
  const CameraIntrinsics other{5, 3, 5, 5, 2, 1.5};
  try {
    LoadDepthPrior(tmp.path() / "c.pfm", view, other);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("quaternion helpers invert each other") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int i = 0; i < 50; ++i) {
    const Vec4 q = Vec4(n(rng), n(rng), n(rng), n(rng)).normalized();
    const Mat3 r = QuaternionToRotation(q);
    CHECK((QuaternionToRotation(RotationToQuaternion(r)) - r)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}
