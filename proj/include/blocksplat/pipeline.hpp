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
// File-based pipeline stages. Each stage reads only its inputs and the
// artifacts of earlier stages under paths.output_dir:
//
//   blockplan.json                      partition
//   block_<id>/point_cloud.ply          optimize (block primitives)
//   block_<id>/aux_point_cloud.ply      optimize (auxiliary primitives)
//   block_<id>/train_log.jsonl          optimize
//   scene/point_cloud.ply               merge
//   scene/provenance.json               merge
//   renders/<name>.png                  render
//   eval_report.json, eval_timing.json  eval

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "blocksplat/config.hpp"
#include "blocksplat/merge_eval.hpp"

namespace blocksplat {

struct PartitionSummary {
  int n_blocks = 0;
  double views_mean = 0.0;
  int views_max = 0;
  double points_mean = 0.0;
  int points_max = 0;
  int points_in_roi = 0;
  std::vector<int> flagged_blocks;
};

PartitionSummary SummarizePlan(const BlockPlan& plan);

// View ids in ascending order; every k-th one (starting with the first) is
// held out for evaluation. k = 0 holds out nothing.
std::vector<int> HeldOutViewIds(const SparseModel& model, int every);
std::vector<int> TrainingViewIds(const SparseModel& model, int every);

// One camera per line: NAME W H FX FY CX CY QW QX QY QZ TX TY TZ, with the
// quaternion and translation mapping world to camera. Blank lines and lines
// starting with '#' are ignored.
struct NamedCamera {
  std::string name;
  CameraIntrinsics cam;
  Pose pose;
};
std::vector<NamedCamera> ParsePoseFile(const std::filesystem::path& path);

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  const PipelineConfig& config() const { return cfg_; }

  // Writes a synthetic scene to the configured sfm/image/depth paths.
  void RunSynth();
  PartitionSummary RunPartition();
  BlockPlan LoadPlan() const;
  void RunOptimizeBlock(int block_id);
  SceneModel RunMerge();
  // Renders the held-out views, or the cameras of a pose file when given.
  std::vector<std::filesystem::path> RunRender(
      const std::optional<std::filesystem::path>& pose_file);
  EvalReport RunEval();

 private:
  const SparseModel& Model();
  Image LoadViewImage(const ViewRecord& view, const CameraIntrinsics& cam) const;
  // `full` is the on-disk camera, `cam` the training camera.
  std::optional<DepthPrior> LoadViewPrior(const ViewRecord& view,
                                          const CameraIntrinsics& full,
                                          const CameraIntrinsics& cam) const;
  CameraIntrinsics TrainingCamera(const ViewRecord& view);
  std::filesystem::path BlockDir(int block_id) const;

  PipelineConfig cfg_;
  std::optional<SparseModel> model_;
};

}  // namespace blocksplat
