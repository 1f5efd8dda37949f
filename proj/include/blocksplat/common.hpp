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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace blocksplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kIo,
  kMissingFile,
  kMalformedRecord,
  kUnsupportedCameraModel,
  kVisibilityAsymmetry,
  kDimensionMismatch,
  kUnreadableFile,
  kDegenerateGeometry,
  kEmptyRoi,
  kEmptyBlock,
  kUnknownAttribute,
  kTruncatedFile,
  kMissingForwardState,
  kEmptyDepth,
  kNoViews,
  kDivergedLoss,
  kPlanMismatch,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Axis-aligned rectangle on the ground plane, in aligned (x, z) coordinates.
// Upper edges are always closed. A lower edge is closed only when it lies on
// the region-of-interest boundary, so sibling leaves never share a point.
struct Rect {
  double x0 = 0.0, z0 = 0.0, x1 = 0.0, z1 = 0.0;
  bool closed_x0 = true;
  bool closed_z0 = true;

  double width() const { return x1 - x0; }
  double depth() const { return z1 - z0; }
  double area() const { return width() * depth(); }
  double diagonal() const;
  bool contains(double x, double z) const {
    const bool in_x = (x > x0 || (closed_x0 && x == x0)) && x <= x1;
    const bool in_z = (z > z0 || (closed_z0 && z == z0)) && z <= z1;
    return in_x && in_z;
  }
  bool operator==(const Rect&) const = default;
};

// Dense row-major image with interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  size_t index(int x, int y, int c = 0) const {
    return (static_cast<size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool empty() const { return data.empty(); }
};

// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 center() const { return -rotation.transpose() * translation; }
};

}  // namespace blocksplat
