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

#include "blocksplat/common.hpp"

namespace blocksplat {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

// Mean SSIM over pixels and channels. Local statistics use a separable
// Gaussian window with zero padding, so the map has the input's size.
// When grad_a is non-null it receives d(mean SSIM)/d(a).
double Ssim(const Image& a, const Image& b, const SsimOptions& opt = {},
            Image* grad_a = nullptr);

}  // namespace blocksplat
