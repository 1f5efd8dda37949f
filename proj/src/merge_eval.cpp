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

#include "blocksplat/merge_eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "blocksplat/ssim.hpp"

namespace blocksplat {

SceneModel MergeBlocks(std::vector<OptimizedBlock> blocks,
                       const BlockPlan& plan) {
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& a, const auto& b) { return a.block_id < b.block_id; });
  std::set<int> seen;
  SceneModel scene;
  for (const auto& ob : blocks) {
    if (!seen.insert(ob.block_id).second) {
      throw Error(ErrorCode::kPlanMismatch,
                  "block " + std::to_string(ob.block_id) + " given twice");
    }
    const Block& pb = plan.block(ob.block_id);
    if (!(pb.bounds == ob.state.block_bounds)) {
      throw Error(ErrorCode::kPlanMismatch,
                  "block " + std::to_string(ob.block_id) +
                      " bounds differ from the plan");
    }
    const GaussianSet kept =
        CropToBounds(ob.state.block, pb.bounds, plan.alignment);
    for (size_t i = 0; i < kept.size(); ++i) {
      scene.gaussians.append_from(kept, i);
      scene.provenance.push_back(ob.block_id);
    }
  }
  return scene;
}

double Psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kDimensionMismatch, "PSNR inputs differ in shape");
  }
  if (a.empty()) return kPsnrCap;
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::clamp(10.0 * std::log10(1.0 / mse), 0.0, kPsnrCap);
}

double SsimMetric(const Image& a, const Image& b) { return Ssim(a, b); }

void FinalizeMeans(EvalReport& report) {
  report.mean_psnr = report.mean_ssim = 0.0;
  if (report.views.empty()) return;
  for (const auto& v : report.views) {
    report.mean_psnr += v.psnr;
    report.mean_ssim += v.ssim;
  }
  report.mean_psnr /= static_cast<double>(report.views.size());
  report.mean_ssim /= static_cast<double>(report.views.size());
}

double OpacityAlongRays(const GaussianSet& set,
                        const std::vector<ProbeRay>& rays) {
  double total = 0.0;
  for (size_t i = 0; i < set.size(); ++i) {
    const Vec4 q = set.rotations[i].normalized();
    const Mat3 rot = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
    const Vec3 inv_var = (-2.0 * set.log_scales[i]).array().exp();
    const Mat3 precision = rot * inv_var.asDiagonal() * rot.transpose();
    for (const auto& ray : rays) {
      // q(t) = (o + t d - mu)^T P (o + t d - mu), minimized on [0, length].
      const Vec3 r = ray.origin - set.positions[i];
      const double a = ray.direction.dot(precision * ray.direction);
      const double b = ray.direction.dot(precision * r);
      const double t = std::clamp(a > 0.0 ? -b / a : 0.0, 0.0, ray.length);
      const Vec3 d = r + t * ray.direction;
      total += set.opacity(i) * std::exp(-0.5 * d.dot(precision * d));
    }
  }
  return total;
}

}  // namespace blocksplat
