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

// Seeded generators of cluster-structured embedding datasets, plus the
// brute-force reference implementations the optimized paths are checked
// against.

#ifndef REID_SYNTHBENCH_HPP_
#define REID_SYNTHBENCH_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "json.hpp"
#include "reid/embedding_store.hpp"
#include "reid/privacy_filter.hpp"
#include "reid/similarity.hpp"

namespace reid::synthbench {

enum class SyntheticMode {
  // New videos around uniformly chosen train identity centers.
  kResampleIdentity,
  // Train videos (cycled) plus isotropic noise of scale copy_noise.
  kCopyWithNoise,
  // Videos around fresh identity centers.
  kIndependent,
};

std::string_view synthetic_mode_name(SyntheticMode mode);

struct ClusterConfig {
  std::size_t n_identities = 100;
  std::size_t frames_per_video = 8;
  std::size_t dimension = 128;
  double sigma_intra = 0.05;
  double sigma_inter = 1.0;
  double train_fraction = 0.6;
  double test_fraction = 0.2;
  double synthetic_fraction = 0.2;
  SyntheticMode synthetic_mode = SyntheticMode::kIndependent;
  double copy_noise = 0.0;
  std::uint64_t seed = 0;

  // Throws InvalidConfig.
  void check() const;

  std::size_t n_train() const;
  std::size_t n_test() const;
  std::size_t n_synthetic() const;
};

nlohmann::json to_json(const ClusterConfig& config);
ClusterConfig cluster_config_from_json(const nlohmann::json& j);

// Train videos first, then test, then synthetic. Ids are zero-padded so
// lexicographic order matches generation order.
EmbeddingDataset generate_clustered_dataset(const ClusterConfig& config, int workers = 0);

struct DriftConfig {
  std::size_t n_videos = 20;
  std::size_t frames_per_video = 80;
  std::size_t dimension = 32;
  // Per-frame displacement scale along a fixed per-video direction.
  double drift = 0.01;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

// Test-split videos whose frame t is base + t * direction + noise.
EmbeddingDataset generate_drifting_dataset(const DriftConfig& config);

// Naive double loop over score(); reference semantics for pmax_all.
PmaxTable oracle_pmax(const SplitView& queries, const SplitView& train,
                      const SimilaritySpec& spec, Aggregation aggregation);

// Exhaustive (concordant + 0.5 * tied) / (|pos| * |neg|).
double oracle_auc(std::span<const double> pos, std::span<const double> neg);

}  // namespace reid::synthbench

#endif  // REID_SYNTHBENCH_HPP_
