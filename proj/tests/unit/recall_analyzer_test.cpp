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

#include "reid/recall_analyzer.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "reid/synthbench.hpp"
#include "test_util.hpp"

namespace reid {
namespace {

using testing::TempDir;

PmaxTable table_of(std::vector<PmaxRow> rows) {
  PmaxTable t;
  t.rows = std::move(rows);
  t.spec = "Corr";
  return t;
}

PrivacyThreshold threshold_at(double v) {
  PrivacyThreshold t;
  t.value = v;
  t.spec = "Corr";
  return t;
}

synthbench::ClusterConfig copy_fixture(double train_fraction, double synthetic_fraction) {
  synthbench::ClusterConfig c;
  c.n_identities = 200;
  c.frames_per_video = 4;
  c.dimension = 16;
  c.train_fraction = train_fraction;
  c.test_fraction = 1.0 - train_fraction - synthetic_fraction;
  c.synthetic_fraction = synthetic_fraction;
  c.synthetic_mode = synthbench::SyntheticMode::kCopyWithNoise;
  c.copy_noise = 1e-6;
  c.seed = 12;
  return c;
}

TEST(Recall, FourRowsOneTrainId) {
  const auto t = table_of({{"s1", 0.1, "v1"}, {"s2", 0.2, "v1"}, {"s3", 0.3, "v1"},
                           {"s4", 0.4, "v1"}});
  const auto r = analyze_recall(t, threshold_at(0.9), 10);
  EXPECT_EQ(r.learned_count, 1u);
  EXPECT_EQ(r.frequency.at("v1"), 4u);
  EXPECT_EQ(r.max_frequency_id, "v1");
  EXPECT_EQ(r.max_frequency, 4u);
  EXPECT_DOUBLE_EQ(r.learned_fraction, 0.1);
  EXPECT_EQ(r.memorized_count, 0u);
}

TEST(Recall, LearnedButMemorizedNeedsEveryRowFlagged) {
  const auto t = table_of({{"s1", 0.95, "a"}, {"s2", 0.97, "a"}, {"s3", 0.99, "b"},
                           {"s4", 0.2, "b"}, {"s5", 0.3, "c"}});
  const auto r = analyze_recall(t, threshold_at(0.9), 5);
  EXPECT_EQ(r.memorized_count, 3u);
  EXPECT_DOUBLE_EQ(r.memorized_fraction, 0.6);
  EXPECT_EQ(r.learned_but_memorized_ids, std::vector<std::string>{"a"});
  EXPECT_LE(r.learned_but_memorized_count, r.learned_count);

  const auto small = select_recall_subsets(r, t, 1);
  EXPECT_EQ(small, (std::vector<std::string>{"s4", "s5"}));
}

TEST(Recall, SubsetUpToKHighestFirst) {
  const auto t = table_of({{"s1", 0.5, "a"}, {"s2", 0.7, "a"}, {"s3", 0.7, "a"},
                           {"s4", 0.1, "b"}, {"s5", 0.99, "b"}});
  const auto r = analyze_recall(t, threshold_at(0.9), 2);
  EXPECT_EQ(select_recall_subsets(r, t, 5), (std::vector<std::string>{"s2", "s3", "s1", "s4"}));
  EXPECT_EQ(select_recall_subsets(r, t, 2), (std::vector<std::string>{"s2", "s3", "s4"}));
  EXPECT_AUDIT_ERROR(select_recall_subsets(r, t, 0), ErrorCode::kInvalidArgument);
}

TEST(Recall, Errors) {
  auto t = table_of({{"s1", 0.1, "a"}, {"s2", 0.1, "b"}});
  EXPECT_AUDIT_ERROR(analyze_recall(t, threshold_at(0.5), 1), ErrorCode::kInvalidArgument);
  auto th = threshold_at(0.5);
  th.spec = "L2";
  EXPECT_AUDIT_ERROR(analyze_recall(t, th, 5), ErrorCode::kSpecMismatch);
  th = threshold_at(0.5);
  th.aggregation = Aggregation::kFirstVsAllMean;
  EXPECT_AUDIT_ERROR(analyze_recall(t, th, 5), ErrorCode::kSpecMismatch);
}

TEST(Recall, CopyFixtureLearnsEverything) {
  const auto d = synthbench::generate_clustered_dataset(copy_fixture(0.4, 0.4));
  const auto train = d.split(Split::kTrain);
  const auto spec = SimilaritySpec::corr();
  const auto threshold =
      calibrate_threshold(pmax_all(d.split(Split::kTest), train, spec, Aggregation::kFirstVsFirst));
  const auto syn = pmax_all(d.split(Split::kSynthetic), train, spec, Aggregation::kFirstVsFirst);
  const auto r = analyze_recall(syn, threshold, train.size());
  EXPECT_EQ(r.learned_fraction, 1.0);
  std::size_t total = 0;
  for (const auto& [id, c] : r.frequency) total += c;
  EXPECT_EQ(total, r.n_synthetic);
}

TEST(Recall, FewerSyntheticThanTrain) {
  const auto d = synthbench::generate_clustered_dataset(copy_fixture(0.6, 0.2));
  const auto train = d.split(Split::kTrain);
  const auto spec = SimilaritySpec::corr();
  const auto threshold = calibrate_threshold(
      pmax_all(d.split(Split::kTest), train, spec, Aggregation::kFirstVsFirst), 99.0);
  const auto syn = pmax_all(d.split(Split::kSynthetic), train, spec, Aggregation::kFirstVsFirst);
  const auto r = analyze_recall(syn, threshold, train.size());
  EXPECT_LE(r.learned_count, r.n_synthetic);
  EXPECT_EQ(r.learned_count, r.n_synthetic);

  // Growing the table never shrinks the learned set.
  auto partial = syn;
  partial.rows.resize(syn.rows.size() / 2);
  EXPECT_LE(analyze_recall(partial, threshold, train.size()).learned_count, r.learned_count);
}

TEST(Coverage, ArgmaxMembership) {
  const auto d = testing::random_dataset(33, 8, 4);
  const auto train = d.split(Split::kTrain);
  // Test == train: every train video is its own argmax under Corr.
  EXPECT_EQ(baseline_coverage(train, train, SimilaritySpec::corr(),
                              CoverageMode::kArgmaxMembership),
            1.0);
  const SplitView one(d, {d.split_index(Split::kTest).front()});
  EXPECT_DOUBLE_EQ(
      baseline_coverage(one, train, SimilaritySpec::corr(), CoverageMode::kArgmaxMembership),
      1.0 / static_cast<double>(train.size()));
  const SplitView none(d, {});
  EXPECT_AUDIT_ERROR(
      baseline_coverage(none, train, SimilaritySpec::corr(), CoverageMode::kNearestIsTrain),
      ErrorCode::kEmptyReference);
}

TEST(Coverage, NearestIsTrainExchangeable) {
  synthbench::ClusterConfig c;
  c.n_identities = 1000;
  c.frames_per_video = 1;
  c.dimension = 8;
  c.train_fraction = 0.7;
  c.test_fraction = 0.3;
  c.synthetic_fraction = 0.0;
  c.seed = 3;
  const auto d = synthbench::generate_clustered_dataset(c);
  const auto train = d.split(Split::kTrain);
  const auto test = d.split(Split::kTest);
  const double expected = static_cast<double>(train.size()) /
                          static_cast<double>(train.size() + test.size() - 1);
  const double got =
      baseline_coverage(test, train, SimilaritySpec::l2(), CoverageMode::kNearestIsTrain);
  EXPECT_GE(got, expected - 0.05);
  EXPECT_LE(got, 1.0);
}

TEST(Projection, RolesAndColumns) {
  EmbeddingDataset d;
  d.dimension = 3;
  auto add = [&](const std::string& id, Split s, float x) {
    d.videos.push_back(VideoEmbedding::from_frames(id, s, {{x, x + 1, x + 2}}));
  };
  add("t1", Split::kTrain, 1);
  add("t2", Split::kTrain, 2);
  add("s1", Split::kSynthetic, 3);
  const auto r = analyze_recall(table_of({{"s1", 0.5, "t1"}}), threshold_at(0.9), 2);
  TempDir dir;
  export_projection_table(d.split(Split::kTrain), d.split(Split::kSynthetic), r, dir / "p.csv");
  std::ifstream in(dir / "p.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "id,role,f0,f1,f2");
  EXPECT_EQ(lines[1], "t1,train_learned,1,2,3");
  EXPECT_EQ(lines[2], "t2,train_unlearned,2,3,4");
  EXPECT_EQ(lines[3], "s1,synthetic,3,4,5");
  for (const auto& l : lines) EXPECT_EQ(std::count(l.begin(), l.end(), ','), 4);

  export_projection_table(d.split(Split::kTrain), SplitView(d, {}), r, dir / "q.csv");
  std::ifstream in2(dir / "q.csv");
  std::size_t n = 0;
  while (std::getline(in2, line)) ++n;
  EXPECT_EQ(n, 3u);
}

TEST(Recall, JsonAndFrequencyCsv) {
  std::vector<PmaxRow> rows;
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j <= i % 5; ++j) {
      rows.push_back({"s" + std::to_string(i) + "_" + std::to_string(j), 0.1,
                      "t" + std::to_string(100 + i)});
    }
  }
  const auto r = analyze_recall(table_of(rows), threshold_at(0.5), 40);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("top_frequencies").size(), 20u);
  EXPECT_EQ(j.at("top_frequencies")[0].at("count"), 5);
  EXPECT_EQ(j.at("top_frequencies")[0].at("train_id"), "t104");
  EXPECT_EQ(j.at("learned_count"), 30);
  const auto csv = frequency_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "train_id,count");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
}

}  // namespace
}  // namespace reid
