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

#include "blocksplat/block_opt.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace blocksplat {
namespace {

// First and second moments in the parameter column layout.
struct Moments {
  GradientSet m;
  GradientSet v;

  void resize(size_t n) {
    m.resize(n);
    v.resize(n);
  }
  void remap(const std::vector<int>& origin) {
    GradientSet nm(origin.size()), nv(origin.size());
    for (size_t i = 0; i < origin.size(); ++i) {
      if (origin[i] < 0) continue;
      const size_t o = static_cast<size_t>(origin[i]);
      nm.positions[i] = m.positions[o];
      nm.rotations[i] = m.rotations[o];
      nm.log_scales[i] = m.log_scales[o];
      nm.opacity_logits[i] = m.opacity_logits[o];
      nm.colors[i] = m.colors[o];
      nv.positions[i] = v.positions[o];
      nv.rotations[i] = v.rotations[o];
      nv.log_scales[i] = v.log_scales[o];
      nv.opacity_logits[i] = v.opacity_logits[o];
      nv.colors[i] = v.colors[o];
    }
    m = std::move(nm);
    v = std::move(nv);
  }
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

struct StepRates {
  double position, color, opacity, scale, rotation;
};

template <typename T>
void AdamUpdate(T& param, const T& grad, T& m, T& v, double lr, double bc1,
                double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const T m_hat = m / bc1;
  const T v_hat = v / bc2;
  param -= lr * m_hat.cwiseQuotient(
                    (v_hat.array().sqrt() + kAdamEps).matrix());
}

void AdamUpdate(double& param, double grad, double& m, double& v, double lr,
                double bc1, double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
  param -= lr * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
}

void AdamStep(GaussianSet& set, const GradientSet& g, Moments& mom,
              const StepRates& lr, int step) {
  const double bc1 = 1.0 - std::pow(kBeta1, step);
  const double bc2 = 1.0 - std::pow(kBeta2, step);
  for (size_t i = 0; i < set.size(); ++i) {
    AdamUpdate(set.positions[i], g.positions[i], mom.m.positions[i],
               mom.v.positions[i], lr.position, bc1, bc2);
    AdamUpdate(set.rotations[i], g.rotations[i], mom.m.rotations[i],
               mom.v.rotations[i], lr.rotation, bc1, bc2);
    AdamUpdate(set.log_scales[i], g.log_scales[i], mom.m.log_scales[i],
               mom.v.log_scales[i], lr.scale, bc1, bc2);
    AdamUpdate(set.opacity_logits[i], g.opacity_logits[i],
               mom.m.opacity_logits[i], mom.v.opacity_logits[i], lr.opacity,
               bc1, bc2);
    AdamUpdate(set.colors[i], g.colors[i], mom.m.colors[i], mom.v.colors[i],
               lr.color, bc1, bc2);
  }
}

double PositionRate(int step, const TrainConfig& cfg) {
  const double r = cfg.iterations > 0
                       ? std::clamp(static_cast<double>(step) / cfg.iterations,
                                    0.0, 1.0)
                       : 0.0;
  return std::exp((1.0 - r) * std::log(cfg.lr.position_init) +
                  r * std::log(cfg.lr.position_final)) *
         cfg.position_lr_scale;
}

Mat3 RotationOf(const Vec4& q) {
  const Vec4 u = q.normalized();
  return Eigen::Quaterniond(u[0], u[1], u[2], u[3]).toRotationMatrix();
}

// Batch of distinct view indices via a partial Fisher-Yates shuffle.
std::vector<size_t> DrawBatch(size_t n_views, int batch, std::mt19937_64& rng) {
  std::vector<size_t> idx(n_views);
  std::iota(idx.begin(), idx.end(), 0);
  const size_t b = std::min(n_views, static_cast<size_t>(batch));
  for (size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<size_t> pick(i, n_views - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(b);
  return idx;
}

}  // namespace

void TrainConfig::Validate() const {
  if (iterations < 0) throw Error(ErrorCode::kConfig, "iterations < 0");
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (densify_interval < 1) {
    throw Error(ErrorCode::kConfig, "densify_interval must be >= 1");
  }
  if (!(pseudo_start_fraction >= 0.0 && pseudo_start_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "pseudo_start_fraction must lie in [0, 1]");
  }
  if (!(lr.position_init > 0 && lr.position_final > 0 && position_lr_scale > 0)) {
    throw Error(ErrorCode::kConfig, "position learning rates must be positive");
  }
}

int TrainConfig::pseudo_start() const {
  const int start = static_cast<int>(std::llround(pseudo_start_fraction * iterations));
  return std::clamp(start, 1, std::max(1, iterations));
}

int TrainConfig::densify_stop_iteration() const {
  return densify_stop >= 0 ? densify_stop : iterations / 2;
}

ScheduleWeights ScheduleWeightsAt(int t, const TrainConfig& cfg) {
  ScheduleWeights w;
  const int total = cfg.iterations;
  if (total <= 0) return w;
  t = std::clamp(t, 0, total);
  w.depth_weight = std::pow(0.1, static_cast<double>(t) / total);
  const int start = cfg.pseudo_start();
  if (t < start) {
    w.pseudo_weight = 0.0;
  } else if (t >= total) {
    w.pseudo_weight = 1.0;
  } else {
    const double frac = static_cast<double>(t - start) / (total - start);
    w.pseudo_weight = std::pow(10.0, frac - 1.0);
  }
  return w;
}

ViewLoss EvaluateViewLoss(const RenderedView& rendered,
                          const TrainingView& view, double depth_weight,
                          const LossConfig& cfg) {
  ViewLoss out;
  const LossResult photo = PhotometricLoss(rendered.color, view.image, cfg);
  out.photometric = photo.value;
  out.d_color = photo.grad;
  out.d_depth = Image(rendered.depth.width, rendered.depth.height, 1);
  if (view.prior && depth_weight > 0.0) {
    const LossResult depth =
        DepthPriorLoss(rendered.depth, *view.prior, rendered.accum_alpha, cfg);
    out.depth = depth.value;
    for (size_t i = 0; i < depth.grad.data.size(); ++i) {
      out.d_depth.data[i] = depth_weight * depth.grad.data[i];
    }
  }
  return out;
}

DensifyResult DensifyAndPrune(BlockGaussianState& state,
                              const DensifyStats& stats,
                              const TrainConfig& cfg, std::mt19937_64& rng) {
  DensifyResult res;
  GaussianSet& blk = state.block;
  const size_t n0 = blk.size();
  const double split_limit = cfg.split_scale_threshold * state.block_bounds.diagonal();

  GaussianSet grown;
  std::vector<int> origin;
  grown.reserve(n0);
  std::vector<uint8_t> keep_parent(n0, 1);
  std::vector<std::pair<size_t, int>> extra;  // (parent, kind) 0 clone 1 split
  for (size_t i = 0; i < n0; ++i) {
    const bool has = i < stats.count.size() && stats.count[i] > 0;
    const double mean_grad = has ? stats.grad_sum[i] / stats.count[i] : 0.0;
    if (!(mean_grad > cfg.densify_grad_threshold)) continue;
    const double max_scale = blk.log_scales[i].array().exp().maxCoeff();
    if (max_scale > split_limit) {
      keep_parent[i] = 0;
      extra.emplace_back(i, 1);
      ++res.split;
    } else {
      extra.emplace_back(i, 0);
      ++res.cloned;
    }
  }
  for (size_t i = 0; i < n0; ++i) {
    if (!keep_parent[i]) continue;
    grown.append_from(blk, i);
    origin.push_back(static_cast<int>(i));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& [p, kind] : extra) {
    if (kind == 0) {
      grown.append_from(blk, p);
      origin.push_back(-1);
      continue;
    }
    const Vec3 scale = blk.log_scales[p].array().exp();
    const Mat3 rot = RotationOf(blk.rotations[p]);
    for (int k = 0; k < 2; ++k) {
      Vec3 sample;
      for (int a = 0; a < 3; ++a) sample[a] = normal(rng) * scale[a];
      grown.push_back(blk.positions[p] + rot * sample, blk.rotations[p],
                      blk.log_scales[p] - Vec3::Constant(std::log(1.6)),
                      blk.opacity_logits[p], blk.colors[p]);
      origin.push_back(-1);
    }
  }

  // Prune both sets by opacity.
  auto prune = [&](GaussianSet& set, std::vector<int>& org) {
    std::vector<size_t> keep;
    std::vector<int> new_org;
    for (size_t i = 0; i < set.size(); ++i) {
      if (set.opacity(i) < cfg.prune_opacity_threshold) {
        ++res.pruned;
        continue;
      }
      keep.push_back(i);
      new_org.push_back(org[i]);
    }
    set = set.select(keep);
    org = std::move(new_org);
  };
  prune(grown, origin);
  blk = std::move(grown);
  res.block_origin = std::move(origin);
  res.aux_origin.resize(state.auxiliary.size());
  std::iota(res.aux_origin.begin(), res.aux_origin.end(), 0);
  prune(state.auxiliary, res.aux_origin);
  return res;
}

OptimizeResult OptimizeBlock(BlockGaussianState state,
                             const std::vector<TrainingView>& views,
                             const TrainConfig& cfg,
                             const LossConfig& loss_cfg,
                             const StepCallback& on_step) {
  cfg.Validate();
  loss_cfg.Validate();
  if (views.empty()) throw Error(ErrorCode::kNoViews, "no training views");
  if (!cfg.use_aux) state.auxiliary = GaussianSet{};

  OptimizeResult out;
  std::mt19937_64 rng(cfg.rng_seed);
  Moments mom_b, mom_a;
  mom_b.resize(state.block.size());
  mom_a.resize(state.auxiliary.size());
  DensifyStats stats;
  stats.reset(state.block.size());
  const auto t0 = std::chrono::steady_clock::now();
  const int densify_stop = cfg.densify_stop_iteration();

  for (int it = 1; it <= cfg.iterations; ++it) {
    const ScheduleWeights w = ScheduleWeightsAt(it, cfg);
    const double depth_w = cfg.use_depth ? w.depth_weight : 0.0;
    const double pseudo_w = cfg.use_pseudo ? w.pseudo_weight : 0.0;
    const auto batch = DrawBatch(views.size(), cfg.batch_size, rng);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const SetList sets{&state.block, &state.auxiliary};

    GradientSet g_b(state.block.size()), g_a(state.auxiliary.size());
    TrainingLogEntry entry;
    entry.iteration = it;
    entry.depth_weight = depth_w;
    entry.pseudo_weight = pseudo_w;
    for (size_t k = 0; k < batch.size(); ++k) {
      const TrainingView& view = views[batch[k]];
      const RenderedView rv = Render(sets, view.cam, view.pose, cfg.background);
      const ViewLoss vl = EvaluateViewLoss(rv, view, depth_w, loss_cfg);
      entry.photometric += inv_b * vl.photometric;
      entry.depth += inv_b * vl.depth;
      const BackwardResult br =
          RenderBackward(rv, vl.d_color, &vl.d_depth, sets, view.cam, view.pose);
      g_b.add_scaled(br.grads[0], inv_b);
      g_a.add_scaled(br.grads[1], inv_b);
      for (size_t i = 0; i < state.block.size(); ++i) {
        if (!br.hit[0][i]) continue;
        // Per-view norm, before batch averaging.
        stats.grad_sum[i] += br.mean2d_grad_norm[0][i];
        stats.count[i] += 1;
      }

      if (k != 0 || pseudo_w <= 0.0) continue;
      // Geometric consistency through a pseudo view of the first member.
      bool has_depth = false;
      for (double d : rv.depth.data) has_depth = has_depth || d > 0.0;
      if (!has_depth) continue;
      const PseudoViewSpec spec =
          MakePseudoView(view.cam, view.pose, rv.depth, loss_cfg);
      const RenderedView pv = Render(sets, spec.k_pse, spec.pse, cfg.background);
      Image pse_depth = pv.depth;
      for (size_t i = 0; i < pse_depth.data.size(); ++i) {
        if (pv.accum_alpha.data[i] < loss_cfg.alpha_mask_threshold) {
          pse_depth.data[i] = 0.0;
        }
      }
      const WarpResult warp = WarpPseudoToRef(pv.color, pse_depth, spec);
      const LossResult lp = PseudoViewLoss(view.image, warp);
      if (lp.empty) continue;
      entry.pseudo = lp.value;
      Image d_pse = lp.grad;
      for (double& v : d_pse.data) v *= pseudo_w * inv_b;
      const BackwardResult pb =
          RenderBackward(pv, d_pse, nullptr, sets, spec.k_pse, spec.pse);
      g_b.add_scaled(pb.grads[0], 1.0);
      g_a.add_scaled(pb.grads[1], 1.0);
    }
    entry.loss = entry.photometric + depth_w * entry.depth +
                 pseudo_w * inv_b * entry.pseudo;
    if (!std::isfinite(entry.loss) || !g_b.all_finite() || !g_a.all_finite()) {
      throw DivergedLossError(it, state);
    }

    const StepRates rates{PositionRate(it, cfg), cfg.lr.color, cfg.lr.opacity,
                          cfg.lr.scale, cfg.lr.rotation};
    AdamStep(state.block, g_b, mom_b, rates, it);
    AdamStep(state.auxiliary, g_a, mom_a, rates, it);

    if (it >= cfg.densify_start && it <= densify_stop &&
        it % cfg.densify_interval == 0) {
      const DensifyResult dr = DensifyAndPrune(state, stats, cfg, rng);
      mom_b.remap(dr.block_origin);
      mom_a.remap(dr.aux_origin);
      stats.reset(state.block.size());
      spdlog::debug("iter {}: cloned {} split {} pruned {} -> {} block, {} aux",
                    it, dr.cloned, dr.split, dr.pruned, state.block.size(),
                    state.auxiliary.size());
    }
    if (cfg.opacity_reset_interval > 0 && it <= densify_stop &&
        it % cfg.opacity_reset_interval == 0) {
      const double cap = Logit(0.01);
      for (auto* set : {&state.block, &state.auxiliary}) {
        for (double& l : set->opacity_logits) l = std::min(l, cap);
      }
    }

    entry.n_block = state.block.size();
    entry.n_aux = state.auxiliary.size();
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (on_step) on_step(entry);
    out.log.entries.push_back(entry);
  }
  out.state = std::move(state);
  return out;
}

}  // namespace blocksplat
