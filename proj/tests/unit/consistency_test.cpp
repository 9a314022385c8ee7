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

#include "reid/consistency.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "reid/synthbench.hpp"
#include "test_util.hpp"

namespace reid {
namespace {

EmbeddingDataset constant_videos(std::size_t n, std::size_t frames, std::size_t dim) {
  std::mt19937_64 rng(4);
  EmbeddingDataset d;
  d.dimension = dim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = testing::random_vector(rng, dim);
    std::vector<std::vector<float>> fs(frames, f);
    d.videos.push_back(VideoEmbedding::from_frames("c" + std::to_string(i), Split::kTest, fs));
  }
  return d;
}

TEST(Mcc, ConstantFramesGiveOne) {
  const auto d = constant_videos(5, 6, 16);
  for (auto mode : {ConsistencyMode::kAllPairs, ConsistencyMode::kFirstVsAll}) {
    const auto r = mcc(d, SimilaritySpec::corr(), 2, mode);
    ASSERT_EQ(r.per_video.size(), 5u);
    for (const auto& v : r.per_video) {
      EXPECT_NEAR(v.mean_score, 1.0, 1e-12);
      EXPECT_NEAR(v.std_score, 0.0, 1e-12);
    }
    EXPECT_NEAR(r.aggregate_mean, 1.0, 1e-12);
  }
}

TEST(Mcc, LinearlyRelatedFrames) {
  EmbeddingDataset d;
  d.dimension = 3;
  d.videos.push_back(VideoEmbedding::from_frames("v", Split::kTest, {{1, 2, 3}, {2, 4, 6}}));
  EXPECT_NEAR(mcc(d, SimilaritySpec::corr(), 2).per_video[0].mean_score, 1.0, 1e-12);
}

TEST(Mcc, FilteringAndErrors) {
  const auto d = testing::random_dataset(12, 4, 5, 6);
  const auto r = mcc(d, SimilaritySpec::l2(), 4);
  std::size_t eligible = 0;
  for (const auto& v : d.videos) eligible += v.num_frames() >= 4 ? 1 : 0;
  EXPECT_EQ(r.per_video.size(), eligible);
  EXPECT_EQ(r.n_filtered, 12 - eligible);
  for (const auto& v : r.per_video) EXPECT_GE(v.n_frames, 4u);
  EXPECT_AUDIT_ERROR(mcc(d, SimilaritySpec::corr(), 100), ErrorCode::kAllVideosFiltered);
  EXPECT_AUDIT_ERROR(mcc(d, SimilaritySpec::corr(), 1), ErrorCode::kInvalidArgument);
}

TEST(Mcc, CorrMeansBoundedAndReversalInvariant) {
  const auto d = testing::random_dataset(20, 8, 6, 9);
  auto reversed = d;
  for (auto& v : reversed.videos) {
    std::vector<std::vector<float>> frames;
    for (std::size_t t = v.num_frames(); t-- > 0;) {
      frames.emplace_back(v.frame(t).begin(), v.frame(t).end());
    }
    v = VideoEmbedding::from_frames(v.video_id, v.split, frames);
  }
  const auto a = mcc(d, SimilaritySpec::corr(), 2);
  const auto b = mcc(reversed, SimilaritySpec::corr(), 2);
  ASSERT_EQ(a.per_video.size(), b.per_video.size());
  for (std::size_t i = 0; i < a.per_video.size(); ++i) {
    EXPECT_GE(a.per_video[i].mean_score, -1.0);
    EXPECT_LE(a.per_video[i].mean_score, 1.0);
    EXPECT_NEAR(a.per_video[i].mean_score, b.per_video[i].mean_score, 1e-12);
  }
}

TEST(Mcc, WorkerIndependent) {
  const auto d = testing::random_dataset(30, 8, 7, 9);
  const auto a = mcc(d, SimilaritySpec::corr(), 2, ConsistencyMode::kAllPairs, 1);
  const auto b = mcc(d, SimilaritySpec::corr(), 2, ConsistencyMode::kAllPairs, 3);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Curves, SelfColumnAndConstantRows) {
  const auto d = constant_videos(4, 10, 8);
  const auto c = first_frame_curves(d, SimilaritySpec::corr(), 2, 10);
  ASSERT_EQ(c.video_ids.size(), 4u);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t t = 1; t <= 10; ++t) EXPECT_NEAR(c.at(r, t), 1.0, 1e-12);
  }
  EXPECT_EQ(c.video_ids, c.partner_ids);
}

TEST(Curves, PredFirstColumnIsIdenticalPairConstant) {
  const auto d = testing::random_dataset(9, 6, 8, 5);
  auto head = PredictorHead::zeros({6, 4, 1});
  head.layers[0].bias = {0.3, -0.2, 0.1, 0.5};
  head.layers[1].weights = {1.0, 2.0, -1.0, 0.5};
  head.layers[1].bias = {-0.1};
  const std::vector<double> zero(6, 0.0);
  const double expected = head.predict(zero);
  const auto c = first_frame_curves(d, SimilaritySpec::pred(head), 1, 5);
  for (std::size_t r = 0; r < c.video_ids.size(); ++r) EXPECT_DOUBLE_EQ(c.at(r, 1), expected);
}

TEST(Curves, ShortVideosLeaveGaps) {
  const auto d = testing::random_dataset(10, 4, 9, 4);
  const auto c = first_frame_curves(d, SimilaritySpec::l1(), 1, 6);
  EXPECT_EQ(c.column_count(1), 10u);
  EXPECT_EQ(c.column_count(6), 0u);
  EXPECT_TRUE(std::isnan(c.column_mean(6)));
  const auto csv = curves_csv(c);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "video_id,offset,score");
  std::size_t entries = 0;
  for (const auto& v : d.videos) entries += std::min<std::size_t>(v.num_frames(), 6);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), entries + 1);
  EXPECT_TRUE(curve_summary_json(c).at("mean")[5].is_null());
}

TEST(Curves, DriftIsNonIncreasing) {
  synthbench::DriftConfig cfg;
  cfg.seed = 2;
  const auto d = synthbench::generate_drifting_dataset(cfg);
  const auto c = first_frame_curves(d, SimilaritySpec::corr());
  for (std::size_t t = 2; t <= c.max_offset; ++t) {
    EXPECT_LE(c.column_mean(t), c.column_mean(t - 1) + 0.05) << t;
  }
  EXPECT_LT(c.column_mean(80), c.column_mean(1));
}

TEST(Baseline, PairingAndSeparation) {
  synthbench::ClusterConfig cfg;
  cfg.n_identities = 40;
  cfg.frames_per_video = 20;
  cfg.dimension = 32;
  cfg.seed = 6;
  const auto d = synthbench::generate_clustered_dataset(cfg);
  const auto test = d.split(Split::kTest);
  const auto base = cross_video_baseline(test, SimilaritySpec::corr(), 3, 20, 20);
  const auto same = first_frame_curves(test, SimilaritySpec::corr(), 20, 20);
  for (std::size_t r = 0; r < base.video_ids.size(); ++r) {
    EXPECT_NE(base.video_ids[r], base.partner_ids[r]);
  }
  for (std::size_t t = 1; t <= 20; ++t) {
    EXPECT_LE(base.column_mean(t), 0.2);
    EXPECT_GE(same.column_mean(t), 0.9);
  }
  const auto again = cross_video_baseline(test, SimilaritySpec::corr(), 3, 20, 20);
  EXPECT_EQ(again.partner_ids, base.partner_ids);
}

TEST(Baseline, TwoVideosPairWithEachOther) {
  const auto d = testing::random_dataset(2, 4, 1, 3);
  const auto b = cross_video_baseline(d, SimilaritySpec::l2(), 0, 1, 3);
  EXPECT_EQ(b.partner_ids[0], b.video_ids[1]);
  EXPECT_EQ(b.partner_ids[1], b.video_ids[0]);
  const auto one = testing::random_dataset(1, 4, 1, 3);
  EXPECT_AUDIT_ERROR(cross_video_baseline(one, SimilaritySpec::l2(), 0, 1, 3),
                     ErrorCode::kInsufficientVideos);
}

}  // namespace
}  // namespace reid
