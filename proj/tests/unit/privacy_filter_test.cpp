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

#include "reid/privacy_filter.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "reid/synthbench.hpp"
#include "test_util.hpp"

namespace reid {
namespace {

using synthbench::ClusterConfig;
using synthbench::SyntheticMode;
using testing::random_dataset;
using testing::TempDir;

PmaxTable table_of(const std::vector<double>& values, std::string spec = "Corr") {
  PmaxTable t;
  t.spec = std::move(spec);
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.rows.push_back({"q" + std::to_string(i), values[i], "t0"});
  }
  return t;
}

ClusterConfig small_config(SyntheticMode mode, std::uint64_t seed) {
  ClusterConfig c;
  c.n_identities = 200;
  c.frames_per_video = 4;
  c.dimension = 16;
  c.train_fraction = 0.4;
  c.test_fraction = 0.2;
  c.synthetic_fraction = 0.4;
  c.synthetic_mode = mode;
  c.seed = seed;
  return c;
}

TEST(Pmax, IdenticalFirstFrameGivesOne) {
  auto d = random_dataset(12, 8, 1);
  auto query = d.videos[5];
  query.video_id = "query";
  const auto r = pmax(query, d, SimilaritySpec::corr(), Aggregation::kFirstVsFirst);
  EXPECT_NEAR(r.pmax, 1.0, 1e-12);
  EXPECT_EQ(r.argmax_train_id, d.videos[5].video_id);
}

TEST(Pmax, SingleReferenceVideo) {
  auto d = random_dataset(2, 8, 2);
  const SplitView one(d, {1});
  const auto& q = d.videos[0];
  for (const auto& spec : {SimilaritySpec::l2(), SimilaritySpec::corr()}) {
    const auto first = pmax(q, one, spec, Aggregation::kFirstVsFirst);
    EXPECT_NEAR(first.pmax, score(spec, q.first_frame(), d.videos[1].first_frame()), 1e-12);
    const auto mean = pmax(q, one, spec, Aggregation::kFirstVsAllMean);
    double expected = 0.0;
    for (std::size_t t = 0; t < d.videos[1].num_frames(); ++t) {
      expected += score(spec, q.first_frame(), d.videos[1].frame(t));
    }
    expected /= static_cast<double>(d.videos[1].num_frames());
    EXPECT_NEAR(mean.pmax, expected, 1e-12);
    EXPECT_EQ(mean.argmax_train_id, d.videos[1].video_id);
  }
}

TEST(Pmax, SmallInstanceMatchesLoopExactly) {
  const auto d = random_dataset(13, 8, 3);
  const SplitView queries(d, {0, 1, 2, 3, 4});
  const SplitView train(d, {5, 6, 7, 8, 9, 10, 11, 12});
  for (const auto& spec : {SimilaritySpec::l1(), SimilaritySpec::l2()}) {
    const auto fast = pmax_all(queries, train, spec, Aggregation::kFirstVsFirst, 2);
    const auto slow = synthbench::oracle_pmax(queries, train, spec, Aggregation::kFirstVsFirst);
    EXPECT_EQ(fast.rows, slow.rows);
  }
  const auto fast = pmax_all(queries, train, SimilaritySpec::corr(), Aggregation::kFirstVsFirst, 2);
  const auto slow =
      synthbench::oracle_pmax(queries, train, SimilaritySpec::corr(), Aggregation::kFirstVsFirst);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(fast.rows[i].pmax, slow.rows[i].pmax, 1e-12);
    EXPECT_EQ(fast.rows[i].argmax_train_id, slow.rows[i].argmax_train_id);
  }
}

TEST(Pmax, SelfReferenceCorrIsOne) {
  const auto d = random_dataset(40, 16, 4);
  const auto table = pmax_all(d, d, SimilaritySpec::corr(), Aggregation::kFirstVsFirst, 3);
  ASSERT_EQ(table.rows.size(), 40u);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_NEAR(table.rows[i].pmax, 1.0, 1e-12);
    EXPECT_EQ(table.rows[i].argmax_train_id, d.videos[i].video_id);
  }
}

TEST(Pmax, SynthbenchInstanceMatchesOracle) {
  auto config = small_config(SyntheticMode::kResampleIdentity, 9);
  config.n_identities = 500;
  config.train_fraction = 0.6;
  config.test_fraction = 0.0;
  config.synthetic_fraction = 0.4;
  const auto d = synthbench::generate_clustered_dataset(config);
  const auto train = d.split(Split::kTrain);
  const auto queries = d.split(Split::kSynthetic);
  ASSERT_EQ(train.size(), 300u);
  ASSERT_EQ(queries.size(), 200u);
  std::mt19937_64 rng(5);
  const std::size_t widths[] = {16, 6, 1};
  auto head = PredictorHead::zeros(widths);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& layer : head.layers) {
    for (auto& w : layer.weights) w = u(rng);
  }
  for (const auto& spec : {SimilaritySpec::l1(), SimilaritySpec::l2(), SimilaritySpec::corr(),
                           SimilaritySpec::pred(head)}) {
    for (auto agg : {Aggregation::kFirstVsFirst, Aggregation::kFirstVsAllMean}) {
      const auto fast = pmax_all(queries, train, spec, agg, 4);
      const auto slow = synthbench::oracle_pmax(queries, train, spec, agg);
      ASSERT_EQ(fast.rows.size(), slow.rows.size());
      double worst = 0.0;
      for (std::size_t i = 0; i < fast.rows.size(); ++i) {
        worst = std::max(worst, std::abs(fast.rows[i].pmax - slow.rows[i].pmax));
        EXPECT_EQ(fast.rows[i].argmax_train_id, slow.rows[i].argmax_train_id);
      }
      EXPECT_LE(worst, 1e-6) << spec.description() << " " << aggregation_name(agg);
    }
  }
}

TEST(Pmax, TiesGoToSmallestId) {
  EmbeddingDataset d;
  d.dimension = 3;
  d.videos.push_back(VideoEmbedding::from_frames("zz", Split::kTrain, {{1, 2, 3}}));
  d.videos.push_back(VideoEmbedding::from_frames("aa", Split::kTrain, {{1, 2, 3}}));
  d.videos.push_back(VideoEmbedding::from_frames("q", Split::kTest, {{1, 2, 3}}));
  const auto r = pmax(d.videos[2], d.split(Split::kTrain), SimilaritySpec::l1(),
                      Aggregation::kFirstVsFirst);
  EXPECT_EQ(r.argmax_train_id, "aa");
  EXPECT_EQ(r.pmax, 0.0);
}

TEST(Pmax, EmptyInputsAndErrors) {
  const auto d = random_dataset(6, 8, 5);
  const SplitView none(d, {});
  const auto empty = pmax_all(none, d, SimilaritySpec::corr(), Aggregation::kFirstVsFirst);
  EXPECT_TRUE(empty.rows.empty());
  EXPECT_AUDIT_ERROR(pmax_all(d, none, SimilaritySpec::corr(), Aggregation::kFirstVsFirst),
                     ErrorCode::kEmptyReference);
  const auto other = random_dataset(3, 4, 6);
  EXPECT_AUDIT_ERROR(pmax_all(other, d, SimilaritySpec::corr(), Aggregation::kFirstVsFirst),
                     ErrorCode::kDimensionMismatch);
}

TEST(Calibrate, NearestRankExamples) {
  std::vector<double> v;
  for (int i = 20; i >= 1; --i) v.push_back(i / 100.0);
  const auto t = calibrate_threshold(table_of(v), 95.0);
  EXPECT_EQ(t.value, 0.19);
  EXPECT_EQ(t.calibration_size, 20u);
  EXPECT_EQ(t.percentile, 95.0);

  for (double p : {1.0, 50.0, 99.9}) {
    EXPECT_EQ(calibrate_threshold(table_of({0.42}), p).value, 0.42);
    EXPECT_EQ(calibrate_threshold(table_of(std::vector<double>(17, 0.3)), p).value, 0.3);
  }
  EXPECT_AUDIT_ERROR(calibrate_threshold(table_of({}), 95.0), ErrorCode::kEmptyTable);
  EXPECT_AUDIT_ERROR(calibrate_threshold(table_of({1.0}), 100.0), ErrorCode::kInvalidArgument);
  EXPECT_AUDIT_ERROR(calibrate_threshold(table_of({1.0}), 0.0), ErrorCode::kInvalidArgument);
}

TEST(Calibrate, NearestRankProperty) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 37);
    for (auto& x : v) x = std::round(u(rng) * 20.0) / 20.0;  // plenty of ties
    const double p = 1.0 + 98.0 * u(rng);
    const auto t = calibrate_threshold(table_of(v), p);
    EXPECT_NE(std::find(v.begin(), v.end(), t.value), v.end());
    const auto at_or_below = std::count_if(v.begin(), v.end(), [&](double x) { return x <= t.value; });
    const auto below = std::count_if(v.begin(), v.end(), [&](double x) { return x < t.value; });
    const auto rank = static_cast<long>(nearest_rank(p, v.size()));
    EXPECT_GE(at_or_below, rank);
    EXPECT_LT(below, rank);
  }
}

TEST(Filter, ThresholdAboveEverything) {
  const auto syn = table_of({0.1, 0.5, 0.7});
  auto t = calibrate_threshold(table_of({0.9}), 95.0);
  const auto report = apply_filter(syn, t);
  EXPECT_TRUE(report.flagged_ids.empty());
  EXPECT_EQ(report.retained_ids.size(), 3u);
  EXPECT_EQ(report.flagged_fraction, 0.0);
}

TEST(Filter, StrictBoundaryAndPartition) {
  const auto syn = table_of({0.2, 0.5, 0.5000001, 0.9, 0.5});
  const auto t = calibrate_threshold(table_of({0.5}), 95.0);
  const auto report = apply_filter(syn, t);
  EXPECT_EQ(report.flagged_ids, (std::vector<std::string>{"q2", "q3"}));
  EXPECT_EQ(report.retained_ids, (std::vector<std::string>{"q0", "q1", "q4"}));
  EXPECT_EQ(report.flagged_fraction, 0.4);
  EXPECT_EQ(report.n_synthetic, 5u);
}

TEST(Filter, SpecMismatch) {
  const auto t = calibrate_threshold(table_of({0.5}, "Corr"), 95.0);
  EXPECT_AUDIT_ERROR(apply_filter(table_of({0.1}, "L2"), t), ErrorCode::kSpecMismatch);
  auto other_agg = table_of({0.1}, "Corr");
  other_agg.aggregation = Aggregation::kFirstVsAllMean;
  EXPECT_AUDIT_ERROR(apply_filter(other_agg, t), ErrorCode::kSpecMismatch);
}

TEST(Filter, ExactCopiesAreAllFlagged) {
  const auto d = synthbench::generate_clustered_dataset(small_config(SyntheticMode::kCopyWithNoise, 3));
  const auto train = d.split(Split::kTrain);
  const auto spec = SimilaritySpec::corr();
  const auto test = pmax_all(d.split(Split::kTest), train, spec, Aggregation::kFirstVsFirst);
  const auto syn = pmax_all(d.split(Split::kSynthetic), train, spec, Aggregation::kFirstVsFirst);
  const auto threshold = calibrate_threshold(test, 95.0);
  EXPECT_LT(threshold.value, 1.0);
  const auto report = apply_filter(syn, threshold);
  EXPECT_EQ(report.flagged_ids.size(), syn.rows.size());
}

TEST(Filter, FlaggedCountMonotoneInPercentile) {
  const auto d = synthbench::generate_clustered_dataset(small_config(SyntheticMode::kIndependent, 4));
  const auto train = d.split(Split::kTrain);
  const auto test = pmax_all(d.split(Split::kTest), train, SimilaritySpec::l2(), Aggregation::kFirstVsFirst);
  const auto syn = pmax_all(d.split(Split::kSynthetic), train, SimilaritySpec::l2(), Aggregation::kFirstVsFirst);
  std::size_t previous = syn.rows.size() + 1;
  for (double p : {5.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0}) {
    const auto flagged = apply_filter(syn, calibrate_threshold(test, p)).flagged_ids.size();
    EXPECT_LE(flagged, previous) << p;
    previous = flagged;
  }
}

TEST(PmaxCsv, RoundTrip) {
  TempDir dir;
  const auto d = random_dataset(20, 8, 10);
  auto table = pmax_all(d, d, SimilaritySpec::l2(), Aggregation::kFirstVsAllMean, 1);
  table.reference = "some dir/train set.emb1";
  write_pmax_csv(table, dir / "p.csv");
  const auto back = read_pmax_csv(dir / "p.csv");
  EXPECT_EQ(back.rows, table.rows);
  EXPECT_EQ(back.spec, table.spec);
  EXPECT_EQ(back.reference, table.reference);
  EXPECT_EQ(back.aggregation, table.aggregation);
}

TEST(ThresholdJson, RoundTrip) {
  const auto t = calibrate_threshold(table_of({0.1, 0.3, 0.2}, "Pred[abc]"), 90.0);
  const auto back = threshold_from_json(to_json(t));
  EXPECT_EQ(back.value, t.value);
  EXPECT_EQ(back.spec, t.spec);
  EXPECT_EQ(back.calibration_size, 3u);
  const auto report = apply_filter(table_of({0.5}, "Pred[abc]"), t);
  EXPECT_EQ(threshold_from_json(to_json(report)).value, t.value);
}

}  // namespace
}  // namespace reid
