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

#include "blocksplat/renderer.hpp"

#include <algorithm>
#include <numeric>

namespace blocksplat {

struct ForwardState {
  int width = 0;
  int height = 0;
  Vec3 background = Vec3::Zero();
  std::vector<size_t> set_sizes;
  std::vector<ProjectedGaussian> projected;  // global index order
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<int>> tile_lists;  // depth-sorted global indices
  std::vector<int> n_contrib;                // per pixel, tile-list prefix
  std::vector<double> final_transmittance;   // per pixel
};

namespace {

constexpr int kTileSize = 16;

Mat3 UnitQuaternionToRotation(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// Intermediate quantities shared by projection and its adjoint.
struct Geometry {
  Vec4 unit_q;
  double q_norm;
  Mat3 rot;
  Vec3 scale;
  Mat3 m;       // rot * diag(scale)
  Mat3 cov3d;
  Vec3 p_cam;
  Eigen::Matrix<double, 2, 3> jac;
  Eigen::Matrix<double, 2, 3> t;  // jac * W
  Mat2 cov2d;
};

Geometry ComputeGeometry(const GaussianSet& set, size_t i,
                         const CameraIntrinsics& cam, const Pose& pose) {
  Geometry g;
  g.q_norm = set.rotations[i].norm();
  g.unit_q = set.rotations[i] / g.q_norm;
  g.rot = UnitQuaternionToRotation(g.unit_q);
  g.scale = set.log_scales[i].array().exp();
  g.m = g.rot * g.scale.asDiagonal();
  g.cov3d = g.m * g.m.transpose();
  g.p_cam = pose.rotation * set.positions[i] + pose.translation;
  const double x = g.p_cam.x(), y = g.p_cam.y(), z = g.p_cam.z();
  g.jac << cam.fx / z, 0.0, -cam.fx * x / (z * z),
           0.0, cam.fy / z, -cam.fy * y / (z * z);
  g.t = g.jac * pose.rotation;
  g.cov2d = g.t * g.cov3d * g.t.transpose() +
            kCovarianceDilation * Mat2::Identity();
  return g;
}

ProjectedGaussian ProjectOne(const GaussianSet& set, size_t i,
                             const CameraIntrinsics& cam, const Pose& pose) {
  ProjectedGaussian out;
  const Vec3 p_cam = pose.rotation * set.positions[i] + pose.translation;
  if (!(p_cam.z() > kNearPlane)) return out;
  const Geometry g = ComputeGeometry(set, i, cam, pose);
  out.visible = true;
  out.depth_cam = g.p_cam.z();
  out.mean2d = Vec2(cam.fx * g.p_cam.x() / g.p_cam.z() + cam.cx,
                    cam.fy * g.p_cam.y() / g.p_cam.z() + cam.cy);
  out.cov2d = g.cov2d;
  const double det = g.cov2d.determinant();
  out.conic = Vec3(g.cov2d(1, 1) / det, -g.cov2d(0, 1) / det,
                   g.cov2d(0, 0) / det);
  out.color = set.colors[i];
  out.base_opacity = set.opacity(i);
  out.power_cutoff = std::log(kMinAlpha / out.base_opacity) - 1e-6;
  return out;
}

std::vector<ProjectedGaussian> ProjectAll(const SetList& sets,
                                          const CameraIntrinsics& cam,
                                          const Pose& pose,
                                          std::vector<size_t>* sizes) {
  std::vector<ProjectedGaussian> all;
  for (const GaussianSet* s : sets) {
    auto p = Project(*s, cam, pose);
    if (sizes) sizes->push_back(s->size());
    all.insert(all.end(), p.begin(), p.end());
  }
  return all;
}

// Visible indices sorted by (depth, global index).
std::vector<int> DepthOrder(const std::vector<ProjectedGaussian>& projected) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(projected.size()); ++i) {
    if (projected[i].visible) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (projected[a].depth_cam != projected[b].depth_cam) {
      return projected[a].depth_cam < projected[b].depth_cam;
    }
    return a < b;
  });
  return order;
}

RenderedView AllocateView(int w, int h, const Vec3& background) {
  RenderedView v;
  v.color = Image(w, h, 3);
  v.depth = Image(w, h, 1);
  v.accum_alpha = Image(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) v.color.at(x, y, c) = background[c];
    }
  }
  return v;
}

// Front-to-back compositing over an ordered candidate list. Returns the
// prefix length that was traversed up to the last included contribution.
int CompositePixel(const std::vector<ProjectedGaussian>& projected,
                   const std::vector<int>& candidates, int x, int y,
                   const Vec3& background, RenderedView& view,
                   double* final_t) {
  double t = 1.0;
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  int last = 0;
  const int n = static_cast<int>(candidates.size());
  for (int k = 0; k < n; ++k) {
    const ProjectedGaussian& g = projected[candidates[k]];
    const double dx = g.mean2d.x() - x;
    const double dy = g.mean2d.y() - y;
    const double power = -0.5 * (g.conic[0] * dx * dx + g.conic[2] * dy * dy) -
                         g.conic[1] * dx * dy;
    if (power < g.power_cutoff) continue;
    const double alpha = std::min(kMaxAlpha, g.base_opacity * std::exp(power));
    if (alpha < kMinAlpha) continue;
    const double next_t = t * (1.0 - alpha);
    if (next_t < kMinTransmittance) break;
    color += g.color * (alpha * t);
    depth += g.depth_cam * (alpha * t);
    t = next_t;
    last = k + 1;
  }
  for (int c = 0; c < 3; ++c) {
    view.color.at(x, y, c) = color[c] + t * background[c];
  }
  view.depth.at(x, y) = depth;
  view.accum_alpha.at(x, y) = 1.0 - t;
  if (final_t) *final_t = t;
  return last;
}

// Quaternion-to-rotation adjoint: gradient w.r.t. the unit quaternion.
Vec4 RotationAdjoint(const Vec4& q, const Mat3& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 d;
  d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) -
              y * g(2, 0) + x * g(2, 1));
  d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) -
              w * g(1, 2) + z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
  d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) +
              z * g(1, 2) - w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
  d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
              2 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  return d;
}

}  // namespace

std::vector<ProjectedGaussian> Project(const GaussianSet& set,
                                       const CameraIntrinsics& cam,
                                       const Pose& pose) {
  std::vector<ProjectedGaussian> out(set.size());
  for (size_t i = 0; i < set.size(); ++i) out[i] = ProjectOne(set, i, cam, pose);
  return out;
}

RenderedView Render(const SetList& sets, const CameraIntrinsics& cam,
                    const Pose& pose, const Vec3& background) {
  auto state = std::make_shared<ForwardState>();
  const int w = cam.width, h = cam.height;
  state->width = w;
  state->height = h;
  state->background = background;
  state->projected = ProjectAll(sets, cam, pose, &state->set_sizes);
  state->tiles_x = (w + kTileSize - 1) / kTileSize;
  state->tiles_y = (h + kTileSize - 1) / kTileSize;
  state->tile_lists.assign(
      static_cast<size_t>(state->tiles_x) * state->tiles_y, {});

  // Bin primitives into tiles by the bounding box of the ellipse where
  // alpha can reach the skip threshold, padded by one pixel.
  for (int idx : DepthOrder(state->projected)) {
    const ProjectedGaussian& g = state->projected[idx];
    if (g.base_opacity < kMinAlpha) continue;
    const double q_max = 2.0 * std::log(255.0 * g.base_opacity);
    const double ex = std::sqrt(std::max(0.0, q_max * g.cov2d(0, 0))) + 1.0;
    const double ey = std::sqrt(std::max(0.0, q_max * g.cov2d(1, 1))) + 1.0;
    const double fx0 = std::ceil(g.mean2d.x() - ex);
    const double fx1 = std::floor(g.mean2d.x() + ex);
    const double fy0 = std::ceil(g.mean2d.y() - ey);
    const double fy1 = std::floor(g.mean2d.y() + ey);
    if (fx1 < 0 || fy1 < 0 || fx0 > w - 1 || fy0 > h - 1) continue;
    const int x0 = static_cast<int>(std::max(0.0, fx0)) / kTileSize;
    const int x1 = static_cast<int>(std::min<double>(w - 1, fx1)) / kTileSize;
    const int y0 = static_cast<int>(std::max(0.0, fy0)) / kTileSize;
    const int y1 = static_cast<int>(std::min<double>(h - 1, fy1)) / kTileSize;
    for (int ty = y0; ty <= y1; ++ty) {
      for (int tx = x0; tx <= x1; ++tx) {
        state->tile_lists[ty * state->tiles_x + tx].push_back(idx);
      }
    }
  }

  RenderedView view = AllocateView(w, h, background);
  state->n_contrib.assign(static_cast<size_t>(w) * h, 0);
  state->final_transmittance.assign(static_cast<size_t>(w) * h, 1.0);
  for (int ty = 0; ty < state->tiles_y; ++ty) {
    for (int tx = 0; tx < state->tiles_x; ++tx) {
      const auto& list = state->tile_lists[ty * state->tiles_x + tx];
      const int ye = std::min(h, (ty + 1) * kTileSize);
      const int xe = std::min(w, (tx + 1) * kTileSize);
      for (int y = ty * kTileSize; y < ye; ++y) {
        for (int x = tx * kTileSize; x < xe; ++x) {
          const size_t p = static_cast<size_t>(y) * w + x;
          state->n_contrib[p] =
              CompositePixel(state->projected, list, x, y, background, view,
                             &state->final_transmittance[p]);
        }
      }
    }
  }
  view.forward = std::move(state);
  return view;
}

RenderedView Render(const GaussianSet& set, const CameraIntrinsics& cam,
                    const Pose& pose, const Vec3& background) {
  return Render(SetList{&set}, cam, pose, background);
}

RenderedView RenderOracle(const SetList& sets, const CameraIntrinsics& cam,
                          const Pose& pose, const Vec3& background) {
  const auto projected = ProjectAll(sets, cam, pose, nullptr);
  RenderedView view = AllocateView(cam.width, cam.height, background);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      std::vector<int> order;
      for (int i = 0; i < static_cast<int>(projected.size()); ++i) {
        if (projected[i].visible) order.push_back(i);
      }
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return projected[a].depth_cam < projected[b].depth_cam;
      });
      double t = 1.0;
      Vec3 color = Vec3::Zero();
      double depth = 0.0;
      for (int idx : order) {
        const ProjectedGaussian& g = projected[idx];
        const double alpha = std::min(kMaxAlpha, RawAlpha(g, x, y));
        if (alpha < kMinAlpha) continue;
        if (t * (1.0 - alpha) < kMinTransmittance) break;
        color += g.color * (alpha * t);
        depth += g.depth_cam * (alpha * t);
        t *= 1.0 - alpha;
      }
      for (int c = 0; c < 3; ++c) {
        view.color.at(x, y, c) = color[c] + t * background[c];
      }
      view.depth.at(x, y) = depth;
      view.accum_alpha.at(x, y) = 1.0 - t;
    }
  }
  return view;
}

void GradientSet::resize(size_t n) {
  positions.assign(n, Vec3::Zero());
  rotations.assign(n, Vec4::Zero());
  log_scales.assign(n, Vec3::Zero());
  opacity_logits.assign(n, 0.0);
  colors.assign(n, Vec3::Zero());
}

void GradientSet::set_zero() { resize(size()); }

void GradientSet::add_scaled(const GradientSet& o, double s) {
  for (size_t i = 0; i < size(); ++i) {
    positions[i] += s * o.positions[i];
    rotations[i] += s * o.rotations[i];
    log_scales[i] += s * o.log_scales[i];
    opacity_logits[i] += s * o.opacity_logits[i];
    colors[i] += s * o.colors[i];
  }
}

bool GradientSet::all_finite() const {
  for (size_t i = 0; i < size(); ++i) {
    if (!positions[i].allFinite() || !rotations[i].allFinite() ||
        !log_scales[i].allFinite() || !std::isfinite(opacity_logits[i]) ||
        !colors[i].allFinite()) {
      return false;
    }
  }
  return true;
}

BackwardResult RenderBackward(const RenderedView& view, const Image& d_color,
                              const Image* d_depth, const SetList& sets,
                              const CameraIntrinsics& cam, const Pose& pose) {
  if (!view.forward) {
    throw Error(ErrorCode::kMissingForwardState,
                "render_backward needs the view returned by Render");
  }
  const ForwardState& st = *view.forward;
  if (sets.size() != st.set_sizes.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "set list differs from forward");
  }
  for (size_t s = 0; s < sets.size(); ++s) {
    if (sets[s]->size() != st.set_sizes[s]) {
      throw Error(ErrorCode::kDimensionMismatch, "set size differs from forward");
    }
  }
  if (d_color.width != st.width || d_color.height != st.height ||
      d_color.channels != 3 ||
      (d_depth && (d_depth->width != st.width ||
                   d_depth->height != st.height || d_depth->channels != 1))) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient image size");
  }

  const size_t n = st.projected.size();
  std::vector<Vec2> g_mean(n, Vec2::Zero());
  std::vector<Vec3> g_conic(n, Vec3::Zero());  // d/da, d/db, d/dc
  std::vector<double> g_opacity(n, 0.0);
  std::vector<Vec3> g_color(n, Vec3::Zero());
  std::vector<double> g_depth(n, 0.0);
  std::vector<uint8_t> hit(n, 0);

  const int w = st.width, h = st.height;
  for (int ty = 0; ty < st.tiles_y; ++ty) {
    for (int tx = 0; tx < st.tiles_x; ++tx) {
      const auto& list = st.tile_lists[ty * st.tiles_x + tx];
      const int ye = std::min(h, (ty + 1) * kTileSize);
      const int xe = std::min(w, (tx + 1) * kTileSize);
      for (int y = ty * kTileSize; y < ye; ++y) {
        for (int x = tx * kTileSize; x < xe; ++x) {
          const size_t p = static_cast<size_t>(y) * w + x;
          const Vec3 dc(d_color.at(x, y, 0), d_color.at(x, y, 1),
                        d_color.at(x, y, 2));
          const double dd = d_depth ? d_depth->at(x, y) : 0.0;
          double t = st.final_transmittance[p];
          // Everything composited behind the current primitive.
          Vec3 behind_color = t * st.background;
          double behind_depth = 0.0;
          for (int k = st.n_contrib[p] - 1; k >= 0; --k) {
            const int idx = list[k];
            const ProjectedGaussian& g = st.projected[idx];
            const double dx = g.mean2d.x() - x;
            const double dy = g.mean2d.y() - y;
            const double power =
                -0.5 * (g.conic[0] * dx * dx + g.conic[2] * dy * dy) -
                g.conic[1] * dx * dy;
            if (power < g.power_cutoff) continue;
            const double gauss = std::exp(power);
            const double raw = g.base_opacity * gauss;
            const double alpha = std::min(kMaxAlpha, raw);
            if (alpha < kMinAlpha) continue;
            t /= (1.0 - alpha);
            const double weight = alpha * t;
            hit[idx] = 1;
            g_color[idx] += weight * dc;
            g_depth[idx] += weight * dd;
            const double inv = 1.0 / (1.0 - alpha);
            const double d_alpha =
                dc.dot(t * g.color - behind_color * inv) +
                dd * (t * g.depth_cam - behind_depth * inv);
            behind_color += g.color * weight;
            behind_depth += g.depth_cam * weight;
            if (raw > kMaxAlpha) continue;  // clamped: locally constant
            g_opacity[idx] += d_alpha * gauss;
            const double d_power = d_alpha * raw;
            g_mean[idx] += d_power * Vec2(-(g.conic[0] * dx + g.conic[1] * dy),
                                          -(g.conic[1] * dx + g.conic[2] * dy));
            g_conic[idx] += d_power * Vec3(-0.5 * dx * dx, -dx * dy,
                                           -0.5 * dy * dy);
          }
        }
      }
    }
  }

  BackwardResult result;
  size_t offset = 0;
  for (size_t s = 0; s < sets.size(); ++s) {
    const GaussianSet& set = *sets[s];
    GradientSet grads(set.size());
    std::vector<double> norms(set.size(), 0.0);
    std::vector<uint8_t> hits(set.size(), 0);
    for (size_t i = 0; i < set.size(); ++i) {
      const size_t idx = offset + i;
      const ProjectedGaussian& pg = st.projected[idx];
      if (!pg.visible || !hit[idx]) continue;
      hits[i] = 1;
      const Geometry geo = ComputeGeometry(set, i, cam, pose);
      const double x = geo.p_cam.x(), y = geo.p_cam.y(), z = geo.p_cam.z();

      grads.colors[i] = g_color[idx];
      const double o = pg.base_opacity;
      grads.opacity_logits[i] = g_opacity[idx] * o * (1.0 - o);

      // Conic (inverse covariance) to 2D covariance.
      Mat2 q;
      q << pg.conic[0], pg.conic[1], pg.conic[1], pg.conic[2];
      Mat2 g_q;
      g_q << g_conic[idx][0], 0.5 * g_conic[idx][1], 0.5 * g_conic[idx][1],
          g_conic[idx][2];
      const Mat2 g_cov2d = -q * g_q * q;

      // cov2d = T cov3d T^T + dilation, T = J W.
      const Mat3 g_cov3d = geo.t.transpose() * g_cov2d * geo.t;
      const Eigen::Matrix<double, 2, 3> g_t = 2.0 * g_cov2d * geo.t * geo.cov3d;
      const Eigen::Matrix<double, 2, 3> g_j = g_t * pose.rotation.transpose();

      Vec3 g_pcam = Vec3::Zero();
      const Vec2& gm = g_mean[idx];
      g_pcam.x() += gm.x() * cam.fx / z;
      g_pcam.y() += gm.y() * cam.fy / z;
      g_pcam.z() += -gm.x() * cam.fx * x / (z * z) - gm.y() * cam.fy * y / (z * z);
      g_pcam.x() += g_j(0, 2) * (-cam.fx / (z * z));
      g_pcam.y() += g_j(1, 2) * (-cam.fy / (z * z));
      g_pcam.z() += g_j(0, 0) * (-cam.fx / (z * z)) +
                    g_j(0, 2) * (2.0 * cam.fx * x / (z * z * z)) +
                    g_j(1, 1) * (-cam.fy / (z * z)) +
                    g_j(1, 2) * (2.0 * cam.fy * y / (z * z * z));
      g_pcam.z() += g_depth[idx];
      grads.positions[i] = pose.rotation.transpose() * g_pcam;

      // cov3d = M M^T, M = R diag(s).
      const Mat3 g_m = 2.0 * g_cov3d * geo.m;
      Vec3 g_scale;
      for (int j = 0; j < 3; ++j) g_scale[j] = g_m.col(j).dot(geo.rot.col(j));
      grads.log_scales[i] = g_scale.cwiseProduct(geo.scale);
      const Mat3 g_rot = g_m * geo.scale.asDiagonal();
      const Vec4 g_unit = RotationAdjoint(geo.unit_q, g_rot);
      grads.rotations[i] =
          (g_unit - geo.unit_q * geo.unit_q.dot(g_unit)) / geo.q_norm;

      norms[i] = Vec2(gm.x() * 0.5 * w, gm.y() * 0.5 * h).norm();
    }
    result.grads.push_back(std::move(grads));
    result.mean2d_grad_norm.push_back(std::move(norms));
    result.hit.push_back(std::move(hits));
    offset += set.size();
  }
  return result;
}

}  // namespace blocksplat
