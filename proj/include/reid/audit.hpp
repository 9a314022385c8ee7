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

// End-to-end audit: evaluation, P_max filtering, recall accounting and
// consistency over a train/test/synthetic trio, written as a report bundle.

#ifndef REID_AUDIT_HPP_
#define REID_AUDIT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reid/consistency.hpp"
#include "reid/privacy_filter.hpp"
#include "reid/similarity.hpp"

namespace reid {

std::string_view tool_version();

struct AuditConfig {
  // EMB1 files; the train, test and synthetic splits are taken from the
  // respective file by split tag, so one file may serve all three.
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::filesystem::path synthetic_path;
  Metric metric = Metric::kCorr;
  std::optional<std::filesystem::path> head_path;  // required for Pred
  double percentile = 95.0;
  Aggregation aggregation = Aggregation::kFirstVsFirst;
  std::uint64_t seed = 0;
  std::size_t bootstrap_resamples = 10000;
  std::size_t min_frames = kDefaultMinFrames;
  std::size_t max_offset = kDefaultMaxOffset;
  ConsistencyMode consistency_mode = ConsistencyMode::kAllPairs;
  std::filesystem::path out_dir;
  int workers = 0;  // not recorded: results do not depend on it

  // Throws InvalidConfig (bad values or missing input files).
  void check() const;
};

nlohmann::json to_json(const AuditConfig& config);
AuditConfig audit_config_from_json(const nlohmann::json& j);

// Artifact file names, in the order they are produced.
const std::vector<std::string>& audit_artifact_names();

struct AuditResult {
  std::vector<std::filesystem::path> artifacts;  // including manifest.json
  nlohmann::json manifest;
};

// Outputs are staged and moved into out_dir only when every stage
// succeeded; on error nothing new is left behind.
AuditResult run_audit(const AuditConfig& config);

// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

// UTC ISO-8601 time; SOURCE_DATE_EPOCH, when set, replaces the clock.
std::string utc_timestamp();

}  // namespace reid

#endif  // REID_AUDIT_HPP_
