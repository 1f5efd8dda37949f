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
//
// CPU splatting rasterizer.
//
// Pixel (x, y) is sampled at continuous image coordinate (x, y). Each pixel
// composites its primitives front to back in order of camera-space depth,
// ties broken by global index (earlier sets first, then storage order):
//
//   alpha_i = min(0.99, o_i * exp(-0.5 d^T cov2d^-1 d))   skipped if < 1/255
//   C = sum_i c_i alpha_i T_i + T_final * background
//   D = sum_i d_i alpha_i T_i
//
// Traversal stops before a contribution that would drop the transmittance
// below 1e-4. The depth buffer is not normalized by accumulated alpha.

#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "blocksplat/common.hpp"
#include "blocksplat/gaussians.hpp"
#include "blocksplat/sfm_io.hpp"

namespace blocksplat {

constexpr double kNearPlane = 0.01;
constexpr double kCovarianceDilation = 0.3;
constexpr double kMaxAlpha = 0.99;
constexpr double kMinAlpha = 1.0 / 255.0;
constexpr double kMinTransmittance = 1e-4;

struct ProjectedGaussian {
  bool visible = false;  // false when culled by the near plane
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double depth_cam = 0.0;
  Vec3 color = Vec3::Zero();
  double base_opacity = 0.0;
  // Inverse covariance (a, b, c) for [[a, b], [b, c]].
  Vec3 conic = Vec3::Zero();
  // Exponents below this give alpha safely under the skip threshold.
  double power_cutoff = 0.0;
};

// Projects every primitive; culled ones keep their slot with visible=false.
std::vector<ProjectedGaussian> Project(const GaussianSet& set,
                                       const CameraIntrinsics& cam,
                                       const Pose& pose);

// Unclamped alpha of a projected primitive at pixel (px, py).
inline double RawAlpha(const ProjectedGaussian& g, double px, double py) {
  const double dx = g.mean2d.x() - px;
  const double dy = g.mean2d.y() - py;
  const double power = -0.5 * (g.conic[0] * dx * dx + g.conic[2] * dy * dy) -
                       g.conic[1] * dx * dy;
  return g.base_opacity * std::exp(power);
}

struct ForwardState;

struct RenderedView {
  Image color;        // H x W x 3
  Image depth;        // H x W x 1
  Image accum_alpha;  // H x W x 1
  std::shared_ptr<const ForwardState> forward;
};

using SetList = std::vector<const GaussianSet*>;

RenderedView Render(const SetList& sets, const CameraIntrinsics& cam,
                    const Pose& pose, const Vec3& background = Vec3::Zero());
RenderedView Render(const GaussianSet& set, const CameraIntrinsics& cam,
                    const Pose& pose, const Vec3& background = Vec3::Zero());

// Per-pixel full sort over every primitive, no tiling or bounding boxes.
// Same contract as Render; used as a test oracle.
RenderedView RenderOracle(const SetList& sets, const CameraIntrinsics& cam,
                          const Pose& pose,
                          const Vec3& background = Vec3::Zero());

// Gradients in the same column layout as GaussianSet.
struct GradientSet {
  std::vector<Vec3> positions;
  std::vector<Vec4> rotations;
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<Vec3> colors;

  explicit GradientSet(size_t n = 0) { resize(n); }
  size_t size() const { return positions.size(); }
  void resize(size_t n);
  void set_zero();
  void add_scaled(const GradientSet& other, double scale);
  bool all_finite() const;
};

struct BackwardResult {
  std::vector<GradientSet> grads;  // one per input set
  // Norm of the loss gradient w.r.t. the projected mean in NDC units, and
  // whether the primitive touched any pixel. One vector per input set.
  std::vector<std::vector<double>> mean2d_grad_norm;
  std::vector<std::vector<uint8_t>> hit;
};

// Exact gradient of sum(d_color * C) + sum(d_depth * D). d_depth may be null.
BackwardResult RenderBackward(const RenderedView& view, const Image& d_color,
                              const Image* d_depth, const SetList& sets,
                              const CameraIntrinsics& cam, const Pose& pose);

}  // namespace blocksplat
