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
// Content-aware scene partitioning. The sparse point cloud is rotated so the
// ground normal is +y, the x-z region of interest is bisected recursively
// along its longer edge while a node holds too many points, and each leaf
// receives the training views that see enough of its points.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blocksplat/common.hpp"
#include "blocksplat/sfm_io.hpp"

namespace blocksplat {

enum class UpAxis { kAuto, kPosX, kNegX, kPosY, kNegY, kPosZ, kNegZ };

UpAxis ParseUpAxis(const std::string& s);
std::string UpAxisName(UpAxis axis);

struct PartitionConfig {
  int max_depth = 8;
  int block_point_threshold = 1000;
  double assign_ratio_threshold = 0.3;
  std::optional<Rect> roi;  // empty means automatic
  UpAxis up_axis = UpAxis::kAuto;

  void Validate() const;
};

struct Block {
  int block_id = 0;
  Rect bounds;
  int depth = 0;
  int point_count = 0;
  std::vector<int> assigned_view_ids;  // ascending
};

struct SplitNode {
  int depth = 0;
  Rect bounds;
  int point_count = 0;
  // Leaves carry a block id; internal nodes carry a split.
  int block_id = -1;
  int axis = -1;         // 0 = x, 1 = z
  double coordinate = 0;
  int lower_child = -1;  // index into BlockPlan::tree
  int upper_child = -1;
};

struct ViewBlockScore {
  int view_id = 0;
  int block_id = 0;
  int in_block_count = 0;
  int total_visible = 0;
  double ratio = 0.0;
};

struct BlockPlan {
  Mat3 alignment = Mat3::Identity();  // world -> aligned frame
  Rect roi;
  std::vector<Block> blocks;          // ordered by block_id
  std::vector<SplitNode> tree;        // tree[0] is the root
  std::vector<int> flagged_blocks;    // blocks without any assigned view

  Vec2 Ground(const Vec3& world) const {
    const Vec3 a = alignment * world;
    return Vec2(a.x(), a.z());
  }
  // Leaf block id containing the ground point, or -1 outside the roi.
  int Locate(const Vec3& world) const;
  const Block& block(int id) const;
};

Mat3 EstimateAlignment(const SparseModel& model, const PartitionConfig& cfg);

Rect ComputeRoi(const SparseModel& model, const Mat3& alignment,
                const PartitionConfig& cfg);

// Builds the split tree and leaves. Views are not assigned yet.
BlockPlan Partition(const SparseModel& model, const PartitionConfig& cfg);

// Variant over already-aligned ground coordinates, used by Partition.
BlockPlan PartitionGround(const std::vector<Vec2>& ground, const Rect& roi,
                          const PartitionConfig& cfg);

// Fills assigned_view_ids for every leaf. Only views in candidate_view_ids
// are considered (all views when empty).
std::vector<ViewBlockScore> AssignViews(
    const SparseModel& model, BlockPlan& plan, const PartitionConfig& cfg,
    const std::vector<int>& candidate_view_ids = {});

nlohmann::json BlockPlanToJson(const BlockPlan& plan);
BlockPlan BlockPlanFromJson(const nlohmann::json& j);

}  // namespace blocksplat
