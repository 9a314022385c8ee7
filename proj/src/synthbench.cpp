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

#include "reid/synthbench.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "reid/error.hpp"
#include "reid/seeding.hpp"

namespace reid::synthbench {
namespace {

enum Stream : std::uint64_t {
  kCenterStream = 1,
  kFrameStream = 2,
  kCopyStream = 3,
  kResampleStream = 4,
  kEfStream = 5,
  kDriftStream = 6,
};

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

std::vector<double> gaussian(std::uint64_t seed, std::size_t n, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) x = scale * normal(rng);
  return out;
}

// Frames around a center: center + sigma * N(0, I) per frame.
std::vector<float> frames_around(const std::vector<double>& center, std::size_t frames,
                                 double sigma, std::uint64_t seed) {
  const auto noise = gaussian(seed, frames * center.size(), sigma);
  std::vector<float> values(noise.size());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < center.size(); ++d) {
      values[t * center.size() + d] = static_cast<float>(center[d] + noise[t * center.size() + d]);
    }
  }
  return values;
}

float ef_for(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(10.0, 90.0);
  return static_cast<float>(u(rng));
}

}  // namespace

std::string_view synthetic_mode_name(SyntheticMode mode) {
  switch (mode) {
    case SyntheticMode::kResampleIdentity: return "resample_identity";
    case SyntheticMode::kCopyWithNoise: return "copy_with_noise";
    case SyntheticMode::kIndependent: return "independent";
  }
  return "unknown";
}

std::size_t ClusterConfig::n_train() const {
  return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_identities)));
}

std::size_t ClusterConfig::n_test() const {
  return static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n_identities)));
}

std::size_t ClusterConfig::n_synthetic() const {
  const std::size_t used = n_train() + n_test();
  return used >= n_identities ? 0 : n_identities - used;
}

void ClusterConfig::check() const {
  auto fail = [](const std::string& what) { throw AuditError(ErrorCode::kInvalidConfig, what); };
  if (n_identities == 0) fail("n_identities must be positive");
  if (frames_per_video == 0 || frames_per_video > kMaxFramesPerVideo) {
    fail("frames_per_video must lie in [1, 65536]");
  }
  if (dimension == 0 || dimension > kMaxDimension) fail("dimension must lie in [1, 4096]");
  if (!(sigma_intra > 0.0) || !std::isfinite(sigma_intra)) fail("sigma_intra must be > 0");
  if (!(sigma_inter > 0.0) || !std::isfinite(sigma_inter)) fail("sigma_inter must be > 0");
  for (double f : {train_fraction, test_fraction, synthetic_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) fail("split fractions must lie in [0, 1]");
  }
  if (std::abs(train_fraction + test_fraction + synthetic_fraction - 1.0) > 1e-9) {
    fail("split fractions must sum to 1");
  }
  if (n_train() + n_test() > n_identities) fail("rounded split sizes exceed n_identities");
  if (!(copy_noise >= 0.0) || !std::isfinite(copy_noise)) fail("copy_noise must be >= 0");
  if (synthetic_mode != SyntheticMode::kIndependent && n_synthetic() > 0 && n_train() == 0) {
    fail("copy and resample modes need at least one train video");
  }
}

nlohmann::json to_json(const ClusterConfig& c) {
  return {
      {"n_identities", c.n_identities},
      {"frames_per_video", c.frames_per_video},
      {"dimension", c.dimension},
      {"sigma_intra", c.sigma_intra},
      {"sigma_inter", c.sigma_inter},
      {"split_fractions", {c.train_fraction, c.test_fraction, c.synthetic_fraction}},
      {"synthetic_mode", synthetic_mode_name(c.synthetic_mode)},
      {"copy_noise", c.copy_noise},
      {"seed", c.seed},
  };
}

ClusterConfig cluster_config_from_json(const nlohmann::json& j) {
  ClusterConfig c;
  try {
    c.n_identities = j.value("n_identities", c.n_identities);
    c.frames_per_video = j.value("frames_per_video", c.frames_per_video);
    c.dimension = j.value("dimension", c.dimension);
    c.sigma_intra = j.value("sigma_intra", c.sigma_intra);
    c.sigma_inter = j.value("sigma_inter", c.sigma_inter);
    if (j.contains("split_fractions")) {
      const auto& f = j.at("split_fractions");
      if (!f.is_array() || f.size() != 3) {
        throw AuditError(ErrorCode::kInvalidConfig, "split_fractions must have 3 entries");
      }
      c.train_fraction = f[0].get<double>();
      c.test_fraction = f[1].get<double>();
      c.synthetic_fraction = f[2].get<double>();
    }
    const std::string mode = j.value("synthetic_mode", std::string("independent"));
    if (mode == "resample_identity") {
      c.synthetic_mode = SyntheticMode::kResampleIdentity;
    } else if (mode == "copy_with_noise") {
      c.synthetic_mode = SyntheticMode::kCopyWithNoise;
    } else if (mode == "independent") {
      c.synthetic_mode = SyntheticMode::kIndependent;
    } else {
      throw AuditError(ErrorCode::kInvalidConfig, "unknown synthetic_mode '" + mode + "'");
    }
    c.copy_noise = j.value("copy_noise", c.copy_noise);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw AuditError(ErrorCode::kInvalidConfig, std::string("cluster config: ") + e.what());
  }
  c.check();
  return c;
}

EmbeddingDataset generate_clustered_dataset(const ClusterConfig& config, int workers) {
  config.check();
  const std::size_t n_train = config.n_train();
  const std::size_t n_test = config.n_test();
  const std::size_t n_syn = config.n_synthetic();
  const std::size_t dim = config.dimension;

  EmbeddingDataset dataset;
  dataset.dimension = dim;
  dataset.provenance = "synthbench:seed=" + std::to_string(config.seed);
  dataset.videos.resize(n_train + n_test + n_syn);

  // Identity k's center; train identities are 0..n_train, test follow,
  // independent synthetic identities come last.
  auto center = [&](std::size_t k) {
    return gaussian(derive_seed(config.seed, kCenterStream, k), dim, config.sigma_inter);
  };
  auto real_video = [&](std::size_t k) {
    return frames_around(center(k), config.frames_per_video, config.sigma_intra,
                         derive_seed(config.seed, kFrameStream, k));
  };

  const auto total = static_cast<std::ptrdiff_t>(dataset.videos.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(resolve_workers(workers))
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    VideoEmbedding& video = dataset.videos[i];
    video.dimension = dim;
    if (i < n_train + n_test) {
      const bool is_train = i < n_train;
      video.video_id = is_train ? padded("train_", i, 5) : padded("test_", i - n_train, 5);
      video.split = is_train ? Split::kTrain : Split::kTest;
      video.values = real_video(i);
      video.ef_value = ef_for(derive_seed(config.seed, kEfStream, i));
      continue;
    }
    const std::size_t j = i - n_train - n_test;
    video.video_id = padded("syn_", j, 6);
    video.split = Split::kSynthetic;
    switch (config.synthetic_mode) {
      case SyntheticMode::kCopyWithNoise: {
        const std::size_t source = j % n_train;
        const auto base = real_video(source);
        const auto noise =
            gaussian(derive_seed(config.seed, kCopyStream, j), base.size(), config.copy_noise);
        video.values.resize(base.size());
        for (std::size_t e = 0; e < base.size(); ++e) {
          video.values[e] = static_cast<float>(double{base[e]} + noise[e]);
        }
        video.ef_value = ef_for(derive_seed(config.seed, kEfStream, source));
        break;
      }
      case SyntheticMode::kResampleIdentity: {
        std::mt19937_64 rng(derive_seed(config.seed, kResampleStream, j));
        std::uniform_int_distribution<std::size_t> pick(0, n_train - 1);
        const std::size_t k = pick(rng);
        video.values = frames_around(center(k), config.frames_per_video, config.sigma_intra,
                                     derive_seed(config.seed, kFrameStream, i));
        video.ef_value = ef_for(derive_seed(config.seed, kEfStream, i));
        break;
      }
      case SyntheticMode::kIndependent:
        video.values = real_video(i);
        video.ef_value = ef_for(derive_seed(config.seed, kEfStream, i));
        break;
    }
  }
  return dataset;
}

EmbeddingDataset generate_drifting_dataset(const DriftConfig& config) {
  if (config.n_videos == 0 || config.frames_per_video == 0 || config.dimension == 0 ||
      config.dimension > kMaxDimension || config.frames_per_video > kMaxFramesPerVideo ||
      !(config.drift >= 0.0) || !(config.noise >= 0.0)) {
    throw AuditError(ErrorCode::kInvalidConfig, "invalid drift configuration");
  }
  EmbeddingDataset dataset;
  dataset.dimension = config.dimension;
  dataset.provenance = "synthbench-drift:seed=" + std::to_string(config.seed);
  for (std::size_t v = 0; v < config.n_videos; ++v) {
    const auto base = gaussian(derive_seed(config.seed, kCenterStream, v), config.dimension, 1.0);
    const auto direction =
        gaussian(derive_seed(config.seed, kDriftStream, v), config.dimension, config.drift);
    const auto noise = gaussian(derive_seed(config.seed, kFrameStream, v),
                                config.frames_per_video * config.dimension, config.noise);
    VideoEmbedding video;
    video.video_id = padded("drift_", v, 5);
    video.split = Split::kTest;
    video.dimension = config.dimension;
    video.values.resize(config.frames_per_video * config.dimension);
    for (std::size_t t = 0; t < config.frames_per_video; ++t) {
      for (std::size_t d = 0; d < config.dimension; ++d) {
        const std::size_t e = t * config.dimension + d;
        video.values[e] =
            static_cast<float>(base[d] + static_cast<double>(t) * direction[d] + noise[e]);
      }
    }
    dataset.videos.push_back(std::move(video));
  }
  return dataset;
}

PmaxTable oracle_pmax(const SplitView& queries, const SplitView& train,
                      const SimilaritySpec& spec, Aggregation aggregation) {
  PmaxTable table;
  table.aggregation = aggregation;
  table.reference = train.dataset().provenance;
  table.spec = spec.description();
  if (train.empty()) throw AuditError(ErrorCode::kEmptyReference, "reference split is empty");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto q = queries[i].first_frame();
    double best = -std::numeric_limits<double>::infinity();
    const std::string* best_id = nullptr;
    for (std::size_t v = 0; v < train.size(); ++v) {
      const auto& ref = train[v];
      double s = 0.0;
      if (aggregation == Aggregation::kFirstVsFirst) {
        s = score(spec, q, ref.first_frame());
      } else {
        for (std::size_t t = 0; t < ref.num_frames(); ++t) s += score(spec, q, ref.frame(t));
        s /= static_cast<double>(ref.num_frames());
      }
      if (best_id == nullptr || s > best || (s == best && ref.video_id < *best_id)) {
        best = s;
        best_id = &ref.video_id;
      }
    }
    table.rows.push_back({queries[i].video_id, best, *best_id});
  }
  return table;
}

double oracle_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) {
    throw AuditError(ErrorCode::kEmptyScoreList, "AUC needs positive and negative scores");
  }
  double concordant = 0.0;
  double ties = 0.0;
  for (double p : pos) {
    for (double n : neg) {
      if (p > n) {
        concordant += 1.0;
      } else if (p == n) {
        ties += 1.0;
      }
    }
  }
  return (concordant + 0.5 * ties) /
         (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace reid::synthbench
