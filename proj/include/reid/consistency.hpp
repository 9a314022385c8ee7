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

// Temporal consistency of per-frame embeddings: mean pairwise frame score per
// video (MCC), first-frame curves and a cross-video baseline.

#ifndef REID_CONSISTENCY_HPP_
#define REID_CONSISTENCY_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reid/embedding_store.hpp"
#include "reid/similarity.hpp"

namespace reid {

enum class ConsistencyMode {
  // Mean over ordered frame pairs t != t'.
  kAllPairs,
  // Mean of score(first frame, frame t) over t >= 2.
  kFirstVsAll,
};

std::string_view consistency_mode_name(ConsistencyMode mode);
std::optional<ConsistencyMode> parse_consistency_mode(std::string_view text);

inline constexpr std::size_t kDefaultMinFrames = 80;
inline constexpr std::size_t kDefaultMaxOffset = 80;

struct VideoConsistency {
  std::string video_id;
  double mean_score = 0.0;
  double std_score = 0.0;  // population std over the pairs
  std::size_t n_frames = 0;
};

struct ConsistencyReport {
  std::vector<VideoConsistency> per_video;
  double aggregate_mean = 0.0;
  double aggregate_std = 0.0;  // population std of per-video means
  std::string spec;
  std::size_t min_frames = kDefaultMinFrames;
  ConsistencyMode mode = ConsistencyMode::kAllPairs;
  std::size_t n_filtered = 0;  // videos dropped for having too few frames
};

// Throws InvalidArgument when min_frames < 2, AllVideosFiltered when no video
// has min_frames frames.
ConsistencyReport mcc(const SplitView& videos, const SimilaritySpec& spec,
                      std::size_t min_frames = kDefaultMinFrames,
                      ConsistencyMode mode = ConsistencyMode::kAllPairs, int workers = 0);

// Row v, column t-1 holds score(first frame of v, frame t of the row's
// partner) for offsets t = 1..max_offset; NaN past the partner's last frame.
struct CurveMatrix {
  std::vector<std::string> video_ids;
  std::vector<std::string> partner_ids;  // equal to video_ids for same-video curves
  std::size_t max_offset = 0;
  std::vector<double> scores;

  double at(std::size_t row, std::size_t offset) const {
    return scores[row * max_offset + (offset - 1)];
  }
  // Over the rows that reach `offset`.
  double column_mean(std::size_t offset) const;
  double column_std(std::size_t offset) const;
  std::size_t column_count(std::size_t offset) const;
};

CurveMatrix first_frame_curves(const SplitView& videos, const SimilaritySpec& spec,
                               std::size_t min_frames = kDefaultMinFrames,
                               std::size_t max_offset = kDefaultMaxOffset, int workers = 0);

// Each video's first frame against a seeded random other video. Throws
// InsufficientVideos below two videos after filtering.
CurveMatrix cross_video_baseline(const SplitView& videos, const SimilaritySpec& spec,
                                 std::uint64_t seed, std::size_t min_frames = kDefaultMinFrames,
                                 std::size_t max_offset = kDefaultMaxOffset, int workers = 0);

nlohmann::json to_json(const ConsistencyReport& report);
// Per-offset mean, std and count.
nlohmann::json curve_summary_json(const CurveMatrix& curves);
// Long form `video_id,offset,score`; missing entries are omitted.
std::string curves_csv(const CurveMatrix& curves);

}  // namespace reid

#endif  // REID_CONSISTENCY_HPP_
