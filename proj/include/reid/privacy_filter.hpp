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

// Privacy filtering of synthetic videos. P_max is a query video's highest
// aggregated similarity to any training video; the threshold is a
// nearest-rank percentile of P_max over real test videos, and synthetic
// videos scoring strictly above it are flagged as memorized.

#ifndef REID_PRIVACY_FILTER_HPP_
#define REID_PRIVACY_FILTER_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reid/embedding_store.hpp"
#include "reid/similarity.hpp"

namespace reid {

enum class Aggregation {
  // Query first frame vs each reference video's first frame.
  kFirstVsFirst,
  // Query first frame vs every frame of a reference video, averaged.
  kFirstVsAllMean,
};

std::string_view aggregation_name(Aggregation aggregation);
std::optional<Aggregation> parse_aggregation(std::string_view text);

struct PmaxRow {
  std::string query_id;
  double pmax = 0.0;
  std::string argmax_train_id;

  bool operator==(const PmaxRow&) const = default;
};

struct PmaxTable {
  std::vector<PmaxRow> rows;
  Aggregation aggregation = Aggregation::kFirstVsFirst;
  std::string reference;  // provenance of the reference dataset
  std::string spec;       // SimilaritySpec::description()
};

struct PmaxResult {
  double pmax = 0.0;
  std::string argmax_train_id;
};

// Ties on the maximum go to the lexicographically smallest train id.
PmaxResult pmax(const VideoEmbedding& query, const SplitView& train, const SimilaritySpec& spec,
                Aggregation aggregation);

PmaxTable pmax_all(const SplitView& queries, const SplitView& train, const SimilaritySpec& spec,
                   Aggregation aggregation, int workers = 0);

struct PrivacyThreshold {
  double value = 0.0;
  double percentile = 95.0;
  std::size_t calibration_size = 0;
  std::string spec;
  Aggregation aggregation = Aggregation::kFirstVsFirst;
};

// 1-indexed nearest rank ceil(percentile / 100 * n), clamped to [1, n].
std::size_t nearest_rank(double percentile, std::size_t n);

PrivacyThreshold calibrate_threshold(const PmaxTable& test_table, double percentile = 95.0);

struct PrivacyReport {
  PrivacyThreshold threshold;
  std::vector<std::string> flagged_ids;
  // The anonymized dataset: every synthetic id that was not flagged.
  std::vector<std::string> retained_ids;
  std::size_t n_synthetic = 0;
  double flagged_fraction = 0.0;
};

// Flags rows with pmax > threshold.value. Throws SpecMismatch when the table
// and threshold were computed with different specs or aggregations.
PrivacyReport apply_filter(const PmaxTable& synthetic_table, const PrivacyThreshold& threshold);

// `query_id,pmax,argmax_train_id,aggregation`, preceded by one `#` metadata
// line carrying the spec and reference labels.
void write_pmax_csv(const PmaxTable& table, const std::filesystem::path& path);
PmaxTable read_pmax_csv(const std::filesystem::path& path);

nlohmann::json to_json(const PrivacyThreshold& threshold);
PrivacyThreshold threshold_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PrivacyReport& report);

}  // namespace reid

#endif  // REID_PRIVACY_FILTER_HPP_
