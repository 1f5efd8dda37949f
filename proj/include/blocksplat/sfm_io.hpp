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
// Ingestion of COLMAP sparse reconstructions, training images and optional
// per-view depth priors. Only PINHOLE and SIMPLE_PINHOLE cameras are
// accepted; everything else must be undistorted upstream.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "blocksplat/common.hpp"

namespace blocksplat {

struct CameraIntrinsics {
  int width = 1;
  int height = 1;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  // Throws kInvalidArgument when the invariants do not hold.
  void Validate() const;
  CameraIntrinsics Downsampled(int factor) const;
  bool operator==(const CameraIntrinsics&) const = default;
};

struct ViewRecord {
  int view_id = 0;
  int intrinsics_id = 0;
  Pose pose;
  std::string image_path;
  std::set<int64_t> visible_point_ids;
};

struct SparsePoint {
  int64_t point_id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 color = Vec3::Zero();  // [0,1]^3
  std::set<int> observing_view_ids;
};

struct SparseModel {
  std::map<int, CameraIntrinsics> cameras;
  std::map<int, ViewRecord> views;
  std::map<int64_t, SparsePoint> points;

  const CameraIntrinsics& CameraFor(const ViewRecord& v) const;
  // Throws kVisibilityAsymmetry if view and point lists disagree.
  void CheckVisibilitySymmetry() const;
};

enum class SfmFormat { kAuto, kText, kBinary };

SparseModel ParseSparseModel(const std::filesystem::path& dir,
                             SfmFormat format = SfmFormat::kAuto);

// Reference exporter. Writes cameras/images/points3D in the given layout
// (kAuto is treated as kText). Every camera is written as PINHOLE.
void WriteSparseModel(const SparseModel& model,
                      const std::filesystem::path& dir, SfmFormat format);

// Quaternion (w, x, y, z) to rotation matrix, normalizing first.
Mat3 QuaternionToRotation(const Vec4& wxyz);
Vec4 RotationToQuaternion(const Mat3& rotation);

enum class DepthSource { kFile, kNone };

// Per-pixel depth; entries <= 0 mark invalid samples.
struct DepthPrior {
  int view_id = 0;
  Image depth;
  DepthSource source = DepthSource::kNone;

  bool valid(int x, int y) const { return depth.at(x, y) > 0.0; }
};

// Reads a PFM, or a 16-bit PNG whose sidecar `<stem>.json` holds
// {"scale": s}. Non-positive and non-finite samples become invalid.
DepthPrior LoadDepthPrior(const std::filesystem::path& path,
                          const ViewRecord& view,
                          const CameraIntrinsics& intrinsics);

}  // namespace blocksplat
