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

#ifndef REID_ERROR_HPP_
#define REID_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace reid {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidConfig,
  kIoFailure,
  kMalformedHeader,
  kDimensionMismatch,
  kNonFiniteValue,
  kDuplicateVideoId,
  kInvalidMetadata,
  kShapeChainBroken,
  kNonFiniteWeight,
  kInsufficientVideos,
  kNonFiniteLoss,
  kEmptyScoreList,
  kDegenerateResample,
  kEmptyReference,
  kEmptyTable,
  kSpecMismatch,
  kAllVideosFiltered,
};

// Broad failure class; the CLI maps each onto a process exit code.
enum class ErrorCategory { kConfig, kData, kNumeric };

std::string_view error_code_name(ErrorCode code);
ErrorCategory error_category(ErrorCode code);

// Every module reports failures through this one exception type.
class AuditError : public std::runtime_error {
 public:
  AuditError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace reid

#endif  // REID_ERROR_HPP_
