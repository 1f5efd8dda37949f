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

#include "blocksplat/common.hpp"

namespace blocksplat {

// Loads an 8-bit PNG or JPEG as a 3-channel image with values in [0, 1].
// Values are divided by 255; no gamma conversion is applied.
Image LoadRgbImage(const std::filesystem::path& path);

// Writes a 1- or 3-channel image as 8-bit PNG, clamping to [0, 1].
void WritePng8(const std::filesystem::path& path, const Image& image);

// 16-bit single-channel PNG, raw integer sample values.
Image LoadPng16Gray(const std::filesystem::path& path);
void WritePng16Gray(const std::filesystem::path& path, const Image& raw);

// Single-channel PFM. Rows are stored bottom-to-top on disk; the returned
// image is top-to-bottom. Writes little-endian.
Image ReadPfm(const std::filesystem::path& path);
void WritePfm(const std::filesystem::path& path, const Image& image);

// Box-filter downsampling by an integer factor. Trailing rows/columns that do
// not fill a whole box are dropped.
Image Downsample(const Image& image, int factor);

}  // namespace blocksplat
