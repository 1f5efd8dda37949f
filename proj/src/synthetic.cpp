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

#include "blocksplat/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "blocksplat/renderer.hpp"

namespace blocksplat {
namespace {

constexpr double kVisibilityMargin = 0.25;

}  // namespace

Pose LookAt(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 up(0.0, 1.0, 0.0);
  const Vec3 down = (-up + up.dot(forward) * forward).normalized();
  const Vec3 right = down.cross(forward);
  Pose p;
  p.rotation.row(0) = right.transpose();
  p.rotation.row(1) = down.transpose();
  p.rotation.row(2) = forward.transpose();
  p.translation = -p.rotation * eye;
  return p;
}

std::vector<ProbeRay> AirspaceProbeRays() {
  std::vector<ProbeRay> rays;
  for (double y : {1.5, 1.75}) {
    for (int k = 0; k < 4; ++k) {
      const double a = k * M_PI / 4.0;
      const Vec3 dir(std::cos(a), 0.0, std::sin(a));
      rays.push_back({Vec3(0.0, y, 0.0) - 1.5 * dir, dir, 3.0});
    }
  }
  return rays;
}

SyntheticScene GenerateSyntheticScene(const SyntheticConfig& cfg) {
  if (cfg.n_gaussians < 1 || cfg.n_views < 1 || cfg.width < 1 ||
      cfg.height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic scene sizes must be >= 1");
  }
  SyntheticScene scene;
  scene.seed = cfg.seed;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int n_dense =
      static_cast<int>(std::llround(cfg.dense_fraction * cfg.n_gaussians));
  for (int i = 0; i < cfg.n_gaussians; ++i) {
    const double x = i < n_dense ? -unit(rng) : unit(rng);
    const Vec3 pos(x, unit(rng), 2.0 * unit(rng) - 1.0);
    Vec4 q(normal(rng), normal(rng), normal(rng), normal(rng));
    q.normalize();
    if (q[0] < 0) q = -q;
    Vec3 log_scale;
    for (int a = 0; a < 3; ++a) {
      log_scale[a] = std::log(0.06) + unit(rng) * (std::log(0.14) - std::log(0.06));
    }
    const double opacity = 0.6 + 0.35 * unit(rng);
    const Vec3 color(0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng),
                     0.1 + 0.8 * unit(rng));
    scene.gaussians.push_back(pos, q, log_scale, Logit(opacity), color);
  }

  const double f = cfg.focal * cfg.width / 64.0;
  scene.cam = {cfg.width, cfg.height, f, f, 0.5 * (cfg.width - 1),
               0.5 * (cfg.height - 1)};
  scene.model.cameras[1] = scene.cam;
  for (int v = 0; v < cfg.n_views; ++v) {
    const double theta = 2.0 * M_PI * v / cfg.n_views;
    const Vec3 dir(std::cos(theta), 0.0, std::sin(theta));
    const Vec3 eye = cfg.ring_radius * dir + Vec3(0, cfg.camera_height, 0);
    const Vec3 target = cfg.target_offset * dir + Vec3(0, 0.3, 0);
    scene.poses.push_back(LookAt(eye, target));
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03d.png", v);
    scene.names.push_back(name);
  }

  for (int v = 0; v < cfg.n_views; ++v) {
    const RenderedView rv = RenderOracle({&scene.gaussians}, scene.cam,
                                         scene.poses[v], Vec3::Zero());
    Image prior(cfg.width, cfg.height, 1);
    for (size_t i = 0; i < prior.data.size(); ++i) {
      const double a = rv.accum_alpha.data[i];
      if (a >= 0.5) prior.data[i] = cfg.prior_scale * rv.depth.data[i] / a;
    }
    scene.images.push_back(rv.color);
    scene.depths.push_back(rv.depth);
    scene.priors.push_back(std::move(prior));
  }

  // Sparse "SfM": generating centers that land in the frame and are not
  // hidden behind the rendered surface.
  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    SparsePoint p;
    p.point_id = static_cast<int64_t>(i) + 1;
    p.position = scene.gaussians.positions[i];
    p.color = scene.gaussians.colors[i];
    for (int v = 0; v < cfg.n_views; ++v) {
      const Pose& pose = scene.poses[v];
      const Vec3 c = pose.rotation * p.position + pose.translation;
      if (c.z() <= kNearPlane) continue;
      const double px = std::round(scene.cam.fx * c.x() / c.z() + scene.cam.cx);
      const double py = std::round(scene.cam.fy * c.y() / c.z() + scene.cam.cy);
      if (px < 0 || py < 0 || px > cfg.width - 1 || py > cfg.height - 1) continue;
      const int ix = static_cast<int>(px), iy = static_cast<int>(py);
      const double surface = scene.priors[v].at(ix, iy) / cfg.prior_scale;
      if (surface > 0.0 && c.z() > surface + kVisibilityMargin) continue;
      p.observing_view_ids.insert(v + 1);
    }
    if (p.observing_view_ids.empty()) continue;
    scene.model.points[p.point_id] = p;
  }
  for (int v = 0; v < cfg.n_views; ++v) {
    ViewRecord rec;
    rec.view_id = v + 1;
    rec.intrinsics_id = 1;
    rec.pose = scene.poses[v];
    rec.image_path = scene.names[v];
    for (const auto& [id, p] : scene.model.points) {
      if (p.observing_view_ids.count(v + 1)) rec.visible_point_ids.insert(id);
    }
    scene.model.views[rec.view_id] = rec;
  }
  return scene;
}

}  // namespace blocksplat
