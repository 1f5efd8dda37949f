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
// Image-space losses and their gradients w.r.t. the rendered buffers.

#pragma once

#include <vector>

#include "blocksplat/common.hpp"
#include "blocksplat/sfm_io.hpp"
#include "blocksplat/ssim.hpp"

namespace blocksplat {

struct LossConfig {
  double lambda_ssim = 0.2;
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double pseudo_disparity = 2.0;  // pixels
  double alpha_mask_threshold = 0.5;

  void Validate() const;
  SsimOptions ssim() const { return {ssim_window, ssim_sigma}; }
};

struct LossResult {
  double value = 0.0;
  Image grad;          // d(value)/d(input buffer); zeros when empty
  bool empty = false;  // no valid pixel contributed
};

// (1 - lambda) * L1 + lambda * (1 - SSIM).
LossResult PhotometricLoss(const Image& rendered, const Image& gt,
                           const LossConfig& cfg);

// Inverse-depth L1 after median-ratio scale alignment of the prior. Valid
// pixels need a prior sample, positive rendered depth and enough alpha.
// The gradient is w.r.t. rendered_depth.
LossResult DepthPriorLoss(const Image& rendered_depth, const DepthPrior& prior,
                          const Image& accum_alpha, const LossConfig& cfg);

struct PseudoViewSpec {
  CameraIntrinsics k_ref;
  Pose ref;
  CameraIntrinsics k_pse;
  Pose pse;
  Vec3 delta_t = Vec3::Zero();
  double median_depth = 0.0;
};

// Shifts the reference extrinsic translation by
// [median_depth * disparity / fx, 0, 0]; K and R are shared.
PseudoViewSpec MakePseudoView(const CameraIntrinsics& cam, const Pose& ref,
                              const Image& ref_depth, const LossConfig& cfg);

struct WarpResult {
  Image warped;               // reference frame, defined where mask is set
  std::vector<uint8_t> mask;  // per reference pixel
  // Pseudo pixel index written to each reference pixel, -1 if none.
  std::vector<int> source;
  // Continuous reference coordinates of every pseudo pixel; NaN if dropped.
  std::vector<Vec2> correspondence;
  int pse_width = 0;
  int pse_height = 0;
};

// Back-projects every pseudo pixel with positive depth, moves it into the
// reference camera and scatters it to the nearest pixel. Collisions keep
// the sample nearest the reference camera.
WarpResult WarpPseudoToRef(const Image& pse_color, const Image& pse_depth,
                           const PseudoViewSpec& spec);

// Masked L1 between reference ground truth and the warped image. The
// gradient is w.r.t. the pseudo-view color image; geometry is held fixed.
LossResult PseudoViewLoss(const Image& gt_ref, const WarpResult& warp);

double Median(std::vector<double> values);

}  // namespace blocksplat
