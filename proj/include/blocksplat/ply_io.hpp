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

#include "blocksplat/gaussians.hpp"

namespace blocksplat {

// Degree-0 spherical-harmonic basis constant used by splat viewers.
constexpr double kShC0 = 0.28209479177387814;

// Binary little-endian PLY with the usual splat vertex layout:
//   x y z nx ny nz f_dc_0..2 opacity scale_0..2 rot_0..3   (all float)
// f_dc stores (color - 0.5) / kShC0, opacity the logit, scale the log.
void WritePly(const GaussianSet& set, const std::filesystem::path& path);

// Reads the layout above. Extra vertex properties (e.g. f_rest_*) are
// skipped; any missing required property raises kUnknownAttribute.
GaussianSet ReadPly(const std::filesystem::path& path);

}  // namespace blocksplat
