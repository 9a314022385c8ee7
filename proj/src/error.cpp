// Copyright 2026 The reid-audit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reid/error.hpp"

namespace reid {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDuplicateVideoId: return "DuplicateVideoId";
    case ErrorCode::kInvalidMetadata: return "InvalidMetadata";
    case ErrorCode::kShapeChainBroken: return "ShapeChainBroken";
    case ErrorCode::kNonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::kInsufficientVideos: return "InsufficientVideos";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyScoreList: return "EmptyScoreList";
    case ErrorCode::kDegenerateResample: return "DegenerateResample";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kEmptyTable: return "EmptyTable";
    case ErrorCode::kSpecMismatch: return "SpecMismatch";
    case ErrorCode::kAllVideosFiltered: return "AllVideosFiltered";
  }
  return "Unknown";
}

ErrorCategory error_category(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidConfig:
      return ErrorCategory::kConfig;
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kDegenerateResample:
      return ErrorCategory::kNumeric;
    default:
      return ErrorCategory::kData;
  }
}

}  // namespace reid
