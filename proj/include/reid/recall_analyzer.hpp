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

// Generator recall and memorization accounting over a synthetic P_max table:
// which training videos are the nearest neighbour of some synthetic video,
// which are reachable only through flagged videos, and subset selection.

#ifndef REID_RECALL_ANALYZER_HPP_
#define REID_RECALL_ANALYZER_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reid/embedding_store.hpp"
#include "reid/privacy_filter.hpp"
#include "reid/similarity.hpp"

namespace reid {

struct RecallReport {
  std::string spec;
  double threshold_value = 0.0;
  std::size_t n_train = 0;
  std::size_t n_synthetic = 0;

  std::vector<std::string> learned_ids;  // sorted
  std::size_t learned_count = 0;
  double learned_fraction = 0.0;  // of n_train

  std::size_t memorized_count = 0;
  double memorized_fraction = 0.0;  // of n_synthetic

  // Train ids whose every attributing synthetic video is memorized.
  std::vector<std::string> learned_but_memorized_ids;  // sorted
  std::size_t learned_but_memorized_count = 0;

  std::map<std::string, std::size_t> frequency;  // argmax histogram
  std::string max_frequency_id;  // ties go to the smallest id
  std::size_t max_frequency = 0;
};

// Throws SpecMismatch when table and threshold disagree, InvalidArgument if
// the table attributes more distinct train ids than n_train.
RecallReport analyze_recall(const PmaxTable& synthetic_table, const PrivacyThreshold& threshold,
                            std::size_t n_train);

enum class CoverageMode {
  // Fraction of train videos that are the argmax of at least one test video.
  kArgmaxMembership,
  // Fraction of test videos whose nearest first frame among train and the
  // other test videos belongs to train. Ties count as train.
  kNearestIsTrain,
};

std::string_view coverage_mode_name(CoverageMode mode);
std::optional<CoverageMode> parse_coverage_mode(std::string_view text);

// First-frame comparisons. Throws EmptyReference on an empty split.
double baseline_coverage(const SplitView& test, const SplitView& train, const SimilaritySpec& spec,
                         CoverageMode mode, int workers = 0);

// Up to k non-memorized synthetic ids per learned train id, highest pmax
// first, ties by id. Output is grouped by train id in sorted order.
std::vector<std::string> select_recall_subsets(const RecallReport& report,
                                               const PmaxTable& synthetic_table, std::size_t k);

// CSV `id,role,f0..f{D-1}` with role train_learned, train_unlearned or
// synthetic and the first frame's features.
void export_projection_table(const SplitView& train, const SplitView& synthetic,
                             const RecallReport& report, const std::filesystem::path& path);

// Counts and fractions with the 20 most frequent argmax ids.
nlohmann::json to_json(const RecallReport& report);

// `train_id,count`, one row per attributed train id, sorted by id.
std::string frequency_csv(const RecallReport& report);

}  // namespace reid

#endif  // REID_RECALL_ANALYZER_HPP_
