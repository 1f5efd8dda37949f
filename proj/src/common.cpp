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

#include "blocksplat/common.hpp"

#include <cmath>

namespace blocksplat {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfig: return "Config";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kUnsupportedCameraModel: return "UnsupportedCameraModel";
    case ErrorCode::kVisibilityAsymmetry: return "VisibilityAsymmetry";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnreadableFile: return "UnreadableFile";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kEmptyRoi: return "EmptyRoi";
    case ErrorCode::kEmptyBlock: return "EmptyBlock";
    case ErrorCode::kUnknownAttribute: return "UnknownAttribute";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kMissingForwardState: return "MissingForwardState";
    case ErrorCode::kEmptyDepth: return "EmptyDepth";
    case ErrorCode::kNoViews: return "NoViews";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kPlanMismatch: return "PlanMismatch";
  }
  return "Unknown";
}

double Rect::diagonal() const { return std::hypot(width(), depth()); }

}  // namespace blocksplat
