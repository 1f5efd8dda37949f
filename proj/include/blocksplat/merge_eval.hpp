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
// Block merging and image-quality metrics.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "blocksplat/gaussians.hpp"
#include "blocksplat/scene_partition.hpp"

namespace blocksplat {

struct SceneModel {
  GaussianSet gaussians;
  std::vector<int> provenance;  // block id per primitive
};

struct OptimizedBlock {
  int block_id = 0;
  BlockGaussianState state;
};

// Drops auxiliary primitives, crops block primitives to their block bounds
// and concatenates in block id order. Blocks must belong to the plan.
SceneModel MergeBlocks(std::vector<OptimizedBlock> blocks,
                       const BlockPlan& plan);

constexpr double kPsnrCap = 100.0;

// 10 log10(1 / MSE) for images in [0, 1], capped at kPsnrCap.
double Psnr(const Image& a, const Image& b);

// Mean SSIM with the training-loss kernel.
double SsimMetric(const Image& a, const Image& b);

struct ViewMetrics {
  int view_id = 0;
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double render_seconds = 0.0;
};

void FinalizeMeans(EvalReport& report);

struct ProbeRay {
  Vec3 origin;
  Vec3 direction;  // unit length
  double length = 0.0;
};

// Sum over rays and primitives of o_i * exp(-q_i / 2), q_i being the
// smallest squared Mahalanobis distance from the primitive to the segment.
double OpacityAlongRays(const GaussianSet& set,
                        const std::vector<ProbeRay>& rays);

}  // namespace blocksplat
