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
// Pipeline configuration, read from a TOML file:
//
//   [paths]      sfm_dir, image_dir, depth_dir, output_dir
//   [partition]  max_depth, block_point_threshold, assign_ratio_threshold,
//                roi ("auto" or [x0, z0, x1, z1]), up_axis
//   [train]      iterations, batch_size, densify_*, lr_*, seed, use_*...
//   [loss]       lambda_ssim, ssim_window, ssim_sigma, pseudo_disparity,
//                alpha_mask_threshold
//   [eval]       holdout_every
//   [pipeline]   parallel_workers, image_downsample, sfm_format
//   [synth]      n_gaussians, n_views, width, height, seed
//
// Relative paths resolve against the directory holding the config file.
// Unknown keys are rejected.

#pragma once

#include <filesystem>
#include <string>

#include "blocksplat/block_opt.hpp"
#include "blocksplat/losses.hpp"
#include "blocksplat/scene_partition.hpp"
#include "blocksplat/sfm_io.hpp"
#include "blocksplat/synthetic.hpp"

namespace blocksplat {

struct PathsConfig {
  std::filesystem::path sfm_dir;
  std::filesystem::path image_dir;
  std::filesystem::path depth_dir;  // empty: no depth priors
  std::filesystem::path output_dir;
};

struct PipelineConfig {
  PathsConfig paths;
  PartitionConfig partition;
  TrainConfig train;
  LossConfig loss;
  int holdout_every = 8;  // 0 disables the held-out split
  int parallel_workers = 1;
  int image_downsample = 1;
  SfmFormat sfm_format = SfmFormat::kAuto;
  SyntheticConfig synth;

  void Validate() const;
};

PipelineConfig ParsePipelineConfig(const std::string& text,
                                   const std::filesystem::path& base_dir);
PipelineConfig LoadPipelineConfig(const std::filesystem::path& path);

// Overrides "section.key" with a TOML value; bare words are taken as
// strings. The result is validated like a loaded file.
PipelineConfig WithOverride(const PipelineConfig& cfg, const std::string& key,
                            const std::string& value);

// Every effective value, in the same layout the loader accepts.
std::string PipelineConfigToToml(const PipelineConfig& cfg);

}  // namespace blocksplat
