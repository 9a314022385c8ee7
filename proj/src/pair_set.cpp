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

#include "reid/pair_set.hpp"

#include <algorithm>

#include "reid/error.hpp"

namespace reid {

std::size_t PairSet::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.label == label; }));
}

std::vector<ResolvedPair> resolve_pairs(const PairSet& pairs, const EmbeddingDataset& dataset) {
  const auto index = dataset.id_index();
  auto lookup = [&](const std::string& id, std::size_t t) {
    const auto it = index.find(id);
    if (it == index.end()) {
      throw AuditError(ErrorCode::kInvalidArgument, "pair references unknown video '" + id + "'");
    }
    const auto& video = dataset.videos[it->second];
    if (t >= video.num_frames()) {
      throw AuditError(ErrorCode::kInvalidArgument,
                       "pair references frame " + std::to_string(t) + " of video '" + id +
                           "' which has " + std::to_string(video.num_frames()));
    }
    return video.frame(t);
  };
  std::vector<ResolvedPair> out;
  out.reserve(pairs.pairs.size());
  for (const auto& p : pairs.pairs) {
    out.push_back({lookup(p.video_a, p.frame_a), lookup(p.video_b, p.frame_b), p.label});
  }
  return out;
}

}  // namespace reid
