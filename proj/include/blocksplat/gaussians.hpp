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

#pragma once

#include <filesystem>
#include <vector>

#include "blocksplat/common.hpp"
#include "blocksplat/scene_partition.hpp"
#include "blocksplat/sfm_io.hpp"

namespace blocksplat {

// Columnar Gaussian primitives. Parameters are kept in their unconstrained
// domain: rotations are raw quaternions (w, x, y, z) normalized at render
// time, scales are logs, opacity is a logit. Color is the view-independent
// RGB value of the primitive.
struct GaussianSet {
  std::vector<Vec3> positions;
  std::vector<Vec4> rotations;
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<Vec3> colors;

  size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  void reserve(size_t n);
  void resize(size_t n);
  void push_back(const Vec3& position, const Vec4& rotation,
                 const Vec3& log_scale, double opacity_logit,
                 const Vec3& color);
  // Appends primitive i of other.
  void append_from(const GaussianSet& other, size_t i);
  GaussianSet select(const std::vector<size_t>& indices) const;

  double opacity(size_t i) const;
  bool operator==(const GaussianSet&) const = default;
};

double Sigmoid(double x);
double Logit(double p);

enum class Membership { kBlock, kAux };

struct BlockGaussianState {
  GaussianSet block;      // trainable primitives owned by the block
  GaussianSet auxiliary;  // out-of-block content seen by the block's views
  Rect block_bounds;
  Mat3 alignment = Mat3::Identity();

  Membership membership(size_t global_index) const {
    return global_index < block.size() ? Membership::kBlock : Membership::kAux;
  }
};

constexpr double kInitialOpacity = 0.1;
constexpr double kIsolatedScaleFraction = 0.01;

// Block primitives come from sparse points inside the block; auxiliary ones
// from points outside it that at least one assigned view observes.
BlockGaussianState InitBlockGaussians(const SparseModel& model,
                                      const Block& block,
                                      const BlockPlan& plan);

// Keeps primitives whose ground-plane projection lies in bounds.
GaussianSet CropToBounds(const GaussianSet& set, const Rect& bounds,
                         const Mat3& alignment = Mat3::Identity());

GaussianSet Concat(const std::vector<GaussianSet>& sets);

// Root mean square distance from each point to its k nearest other points
// (the usual splat initialization scale); 0 when a point has no neighbor.
std::vector<double> NeighborScale(const std::vector<Vec3>& points,
                                         int k);

}  // namespace blocksplat
