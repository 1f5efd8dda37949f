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
// Procedural test scene: a box of Gaussians seen by a ring of cameras, with
// a sparse model derived from the generating primitives.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blocksplat/gaussians.hpp"
#include "blocksplat/merge_eval.hpp"
#include "blocksplat/sfm_io.hpp"

namespace blocksplat {

struct SyntheticConfig {
  int n_gaussians = 150;
  int n_views = 24;
  int width = 64;
  int height = 64;
  uint64_t seed = 0;
  double dense_fraction = 0.75;  // share of primitives in the x < 0 half
  double ring_radius = 2.2;
  double camera_height = 1.6;
  double focal = 70.0;           // pixels, at 64 px width
  double target_offset = 0.45;   // look-at point shift toward the camera
  double prior_scale = 0.5;      // arbitrary factor applied to depth priors
};

struct SyntheticScene {
  GaussianSet gaussians;
  CameraIntrinsics cam;
  std::vector<Pose> poses;
  std::vector<std::string> names;
  std::vector<Image> images;
  std::vector<Image> depths;  // unnormalized render depth
  std::vector<Image> priors;  // normalized depth times prior_scale, 0 = none
  SparseModel model;
  uint64_t seed = 0;
};

// Box: x in [-1, 1], y in [0, 1], z in [-1, 1], y up.
SyntheticScene GenerateSyntheticScene(const SyntheticConfig& cfg);

// World-to-camera pose looking from eye toward target with +y up.
Pose LookAt(const Vec3& eye, const Vec3& target);

// Horizontal segments above the box, where the generator places nothing.
std::vector<ProbeRay> AirspaceProbeRays();

}  // namespace blocksplat
