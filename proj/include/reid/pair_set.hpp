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

#ifndef REID_PAIR_SET_HPP_
#define REID_PAIR_SET_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reid/embedding_store.hpp"

namespace reid {

inline constexpr int kSameLabel = 1;
inline constexpr int kDifferentLabel = 0;

// Two frames (0-based indices) and whether they come from the same video.
struct FramePair {
  std::string video_a;
  std::size_t frame_a = 0;
  std::string video_b;
  std::size_t frame_b = 0;
  int label = kDifferentLabel;

  bool operator==(const FramePair&) const = default;
};

struct PairSet {
  std::vector<FramePair> pairs;
  std::uint64_t seed = 0;

  std::size_t count_label(int label) const;
  bool operator==(const PairSet&) const = default;
};

struct ResolvedPair {
  FeatureVector a;
  FeatureVector b;
  int label = kDifferentLabel;
};

// Looks up every pair's frames; throws InvalidArgument for unknown ids or
// out-of-range frames.
std::vector<ResolvedPair> resolve_pairs(const PairSet& pairs, const EmbeddingDataset& dataset);

}  // namespace reid

#endif  // REID_PAIR_SET_HPP_
