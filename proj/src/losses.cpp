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

#include "blocksplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blocksplat {
namespace {

double Sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

void LossConfig::Validate() const {
  if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0)) {
    throw Error(ErrorCode::kConfig, "lambda_ssim must lie in [0, 1]");
  }
  if (!(pseudo_disparity > 0.0)) {
    throw Error(ErrorCode::kConfig, "pseudo_disparity must be positive");
  }
  if (ssim_window < 1 || ssim_window % 2 == 0 || !(ssim_sigma > 0.0)) {
    throw Error(ErrorCode::kConfig, "SSIM window must be odd, sigma positive");
  }
}

double Median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

LossResult PhotometricLoss(const Image& rendered, const Image& gt,
                           const LossConfig& cfg) {
  if (!rendered.same_shape(gt)) {
    throw Error(ErrorCode::kDimensionMismatch, "rendered and gt differ");
  }
  LossResult out;
  out.grad = Image(rendered.width, rendered.height, rendered.channels);
  if (rendered.empty()) {
    out.empty = true;
    return out;
  }
  const double n = static_cast<double>(rendered.data.size());
  double l1 = 0.0;
  for (size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - gt.data[i];
    l1 += std::abs(d);
    out.grad.data[i] = (1.0 - cfg.lambda_ssim) * Sign(d) / n;
  }
  l1 /= n;
  out.value = (1.0 - cfg.lambda_ssim) * l1;
  if (cfg.lambda_ssim > 0.0) {
    Image g_ssim;
    const double s = Ssim(rendered, gt, cfg.ssim(), &g_ssim);
    out.value += cfg.lambda_ssim * (1.0 - s);
    for (size_t i = 0; i < g_ssim.data.size(); ++i) {
      out.grad.data[i] -= cfg.lambda_ssim * g_ssim.data[i];
    }
  }
  return out;
}

LossResult DepthPriorLoss(const Image& rendered_depth, const DepthPrior& prior,
                          const Image& accum_alpha, const LossConfig& cfg) {
  const int w = rendered_depth.width, h = rendered_depth.height;
  if (prior.depth.width != w || prior.depth.height != h ||
      !accum_alpha.same_shape(rendered_depth)) {
    throw Error(ErrorCode::kDimensionMismatch, "depth prior size");
  }
  LossResult out;
  out.grad = Image(w, h, 1);
  std::vector<size_t> valid;
  std::vector<double> ratio;
  for (size_t i = 0; i < rendered_depth.data.size(); ++i) {
    const double dr = rendered_depth.data[i], de = prior.depth.data[i];
    if (de > 0.0 && std::isfinite(de) && dr > 0.0 &&
        accum_alpha.data[i] >= cfg.alpha_mask_threshold) {
      valid.push_back(i);
      ratio.push_back(de / dr);  // (1/dr) / (1/de)
    }
  }
  if (valid.empty()) {
    out.empty = true;
    return out;
  }
  const double scale = Median(ratio);
  const double n = static_cast<double>(valid.size());
  double d_scale = 0.0;
  for (size_t k = 0; k < valid.size(); ++k) {
    const size_t i = valid[k];
    const double dr = rendered_depth.data[i], de = prior.depth.data[i];
    const double e = scale / de - 1.0 / dr;
    out.value += std::abs(e);
    out.grad.data[i] += Sign(e) / (dr * dr) / n;
    d_scale += Sign(e) / de / n;
  }
  out.value /= n;

  // The aligned scale is the median ratio; route its gradient through the
  // middle element(s).
  std::vector<size_t> order(ratio.size());
  for (size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return ratio[a] != ratio[b] ? ratio[a] < ratio[b] : a < b;
  });
  std::vector<size_t> mids;
  const size_t m = order.size() / 2;
  if (order.size() % 2 == 1) {
    mids = {order[m]};
  } else {
    mids = {order[m - 1], order[m]};
  }
  const double share = d_scale / static_cast<double>(mids.size());
  for (size_t k : mids) {
    const size_t i = valid[k];
    const double dr = rendered_depth.data[i], de = prior.depth.data[i];
    out.grad.data[i] += share * (-de / (dr * dr));
  }
  return out;
}

PseudoViewSpec MakePseudoView(const CameraIntrinsics& cam, const Pose& ref,
                              const Image& ref_depth, const LossConfig& cfg) {
  std::vector<double> positive;
  for (double d : ref_depth.data) {
    if (d > 0.0 && std::isfinite(d)) positive.push_back(d);
  }
  if (positive.empty()) {
    throw Error(ErrorCode::kEmptyDepth, "reference depth has no positive pixel");
  }
  PseudoViewSpec spec;
  spec.k_ref = spec.k_pse = cam;
  spec.ref = ref;
  spec.median_depth = Median(std::move(positive));
  spec.delta_t = Vec3(spec.median_depth * cfg.pseudo_disparity / cam.fx, 0, 0);
  spec.pse.rotation = ref.rotation;
  spec.pse.translation = ref.translation + spec.delta_t;
  return spec;
}

WarpResult WarpPseudoToRef(const Image& pse_color, const Image& pse_depth,
                           const PseudoViewSpec& spec) {
  const int pw = pse_color.width, ph = pse_color.height;
  if (pse_depth.width != pw || pse_depth.height != ph) {
    throw Error(ErrorCode::kDimensionMismatch, "pseudo depth size");
  }
  const int rw = spec.k_ref.width, rh = spec.k_ref.height;
  WarpResult out;
  out.pse_width = pw;
  out.pse_height = ph;
  out.warped = Image(rw, rh, pse_color.channels);
  out.mask.assign(static_cast<size_t>(rw) * rh, 0);
  out.source.assign(out.mask.size(), -1);
  out.correspondence.assign(static_cast<size_t>(pw) * ph,
                            Vec2::Constant(std::numeric_limits<double>::quiet_NaN()));
  std::vector<double> zbuf(out.mask.size(),
                           std::numeric_limits<double>::infinity());
  const CameraIntrinsics& kp = spec.k_pse;
  const CameraIntrinsics& kr = spec.k_ref;
  // Pseudo camera to reference camera: x_ref = R_r R_p^T (x_p - t_p) + t_r.
  const Mat3 rot = spec.ref.rotation * spec.pse.rotation.transpose();
  const Vec3 trans = spec.ref.translation - rot * spec.pse.translation;
  for (int v = 0; v < ph; ++v) {
    for (int u = 0; u < pw; ++u) {
      const double z = pse_depth.at(u, v);
      if (!(z > 0.0) || !std::isfinite(z)) continue;
      const Vec3 p_pse(z * (u - kp.cx) / kp.fx, z * (v - kp.cy) / kp.fy, z);
      const Vec3 p_ref = rot * p_pse + trans;
      if (!(p_ref.z() > 0.0)) continue;
      const double x = kr.fx * p_ref.x() / p_ref.z() + kr.cx;
      const double y = kr.fy * p_ref.y() / p_ref.z() + kr.cy;
      const double xr = std::round(x), yr = std::round(y);
      if (xr < 0 || yr < 0 || xr > rw - 1 || yr > rh - 1) continue;
      const int src = v * pw + u;
      out.correspondence[src] = Vec2(x, y);
      const size_t dst = static_cast<size_t>(yr) * rw + static_cast<size_t>(xr);
      if (p_ref.z() < zbuf[dst]) {
        zbuf[dst] = p_ref.z();
        out.source[dst] = src;
      }
    }
  }
  for (size_t dst = 0; dst < out.source.size(); ++dst) {
    const int src = out.source[dst];
    if (src < 0) continue;
    out.mask[dst] = 1;
    for (int c = 0; c < pse_color.channels; ++c) {
      out.warped.data[dst * pse_color.channels + c] =
          pse_color.data[static_cast<size_t>(src) * pse_color.channels + c];
    }
  }
  return out;
}

LossResult PseudoViewLoss(const Image& gt_ref, const WarpResult& warp) {
  if (!gt_ref.same_shape(warp.warped)) {
    throw Error(ErrorCode::kDimensionMismatch, "pseudo loss: gt vs warp");
  }
  const int ch = gt_ref.channels;
  LossResult out;
  out.grad = Image(warp.pse_width, warp.pse_height, ch);
  size_t count = 0;
  for (uint8_t m : warp.mask) count += m;
  if (count == 0) {
    out.empty = true;
    return out;
  }
  const double n = static_cast<double>(count) * ch;
  for (size_t dst = 0; dst < warp.mask.size(); ++dst) {
    if (!warp.mask[dst]) continue;
    const size_t src = static_cast<size_t>(warp.source[dst]);
    for (int c = 0; c < ch; ++c) {
      const double d = warp.warped.data[dst * ch + c] - gt_ref.data[dst * ch + c];
      out.value += std::abs(d);
      out.grad.data[src * ch + c] += Sign(d) / n;
    }
  }
  out.value /= n;
  return out;
}

}  // namespace blocksplat
