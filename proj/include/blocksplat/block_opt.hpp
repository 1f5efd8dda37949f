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
// Per-block training: mini-batch gradient accumulation over the block's
// supervising views, Adam updates, block-only densification and pruning.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "blocksplat/gaussians.hpp"
#include "blocksplat/losses.hpp"
#include "blocksplat/renderer.hpp"
#include "blocksplat/sfm_io.hpp"

namespace blocksplat {

struct LearningRates {
  double position_init = 1.6e-4;
  double position_final = 1.6e-6;
  double color = 2.5e-3;
  double opacity = 5e-2;
  double scale = 5e-3;
  double rotation = 1e-3;
};

struct TrainConfig {
  int iterations = 3000;
  int batch_size = 4;
  int densify_interval = 200;
  int densify_start = 500;
  int densify_stop = -1;  // negative: half of iterations
  double densify_grad_threshold = 2e-4;
  double split_scale_threshold = 0.01;  // fraction of the block diagonal
  double prune_opacity_threshold = 0.005;
  int opacity_reset_interval = 0;  // 0 disables
  double pseudo_start_fraction = 0.25;
  LearningRates lr;
  // Multiplies the position rate; usually the camera extent of the block.
  double position_lr_scale = 1.0;
  uint64_t rng_seed = 0;
  Vec3 background = Vec3::Zero();
  // Ablation switches.
  bool use_aux = true;
  bool use_pseudo = true;
  bool use_depth = true;

  void Validate() const;
  int pseudo_start() const;
  int densify_stop_iteration() const;
};

struct ScheduleWeights {
  double depth_weight = 1.0;
  double pseudo_weight = 0.0;
};

// depth_weight decays log-linearly from 1.0 at t = 0 to 0.1 at t = T.
// pseudo_weight is 0 before pseudo_start, then rises log-linearly from
// 0.1 to 1.0 at t = T.
ScheduleWeights ScheduleWeightsAt(int t, const TrainConfig& cfg);

struct TrainingView {
  int view_id = 0;
  CameraIntrinsics cam;
  Pose pose;
  Image image;
  std::optional<DepthPrior> prior;
};

struct TrainingLogEntry {
  int iteration = 0;
  double loss = 0.0;
  double photometric = 0.0;
  double depth = 0.0;
  double pseudo = 0.0;
  double depth_weight = 0.0;
  double pseudo_weight = 0.0;
  size_t n_block = 0;
  size_t n_aux = 0;
  double wall_seconds = 0.0;
};

struct TrainingLog {
  std::vector<TrainingLogEntry> entries;
};

// Accumulated screen-space gradient norms of block primitives.
struct DensifyStats {
  std::vector<double> grad_sum;
  std::vector<int> count;

  void reset(size_t n) {
    grad_sum.assign(n, 0.0);
    count.assign(n, 0);
  }
};

struct DensifyResult {
  // Previous index of every surviving or new primitive, -1 for new ones.
  std::vector<int> block_origin;
  std::vector<int> aux_origin;
  size_t cloned = 0;
  size_t split = 0;
  size_t pruned = 0;
};

DensifyResult DensifyAndPrune(BlockGaussianState& state,
                              const DensifyStats& stats,
                              const TrainConfig& cfg, std::mt19937_64& rng);

class DivergedLossError : public Error {
 public:
  DivergedLossError(int iteration, BlockGaussianState snapshot)
      : Error(ErrorCode::kDivergedLoss,
              "non-finite loss at iteration " + std::to_string(iteration)),
        iteration_(iteration),
        snapshot_(std::move(snapshot)) {}
  int iteration() const { return iteration_; }
  const BlockGaussianState& snapshot() const { return snapshot_; }

 private:
  int iteration_;
  BlockGaussianState snapshot_;
};

struct OptimizeResult {
  BlockGaussianState state;
  TrainingLog log;
};

using StepCallback = std::function<void(const TrainingLogEntry&)>;

OptimizeResult OptimizeBlock(BlockGaussianState state,
                             const std::vector<TrainingView>& views,
                             const TrainConfig& cfg,
                             const LossConfig& loss_cfg,
                             const StepCallback& on_step = {});

// Loss terms and buffer gradients for one view, shared by the optimizer and
// gradient tests. Pseudo-view terms are not included.
struct ViewLoss {
  double photometric = 0.0;
  double depth = 0.0;
  Image d_color;
  Image d_depth;
};
ViewLoss EvaluateViewLoss(const RenderedView& rendered,
                          const TrainingView& view, double depth_weight,
                          const LossConfig& cfg);

}  // namespace blocksplat
