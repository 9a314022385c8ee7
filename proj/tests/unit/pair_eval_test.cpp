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

#include "reid/pair_eval.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reid/synthbench.hpp"
#include "test_util.hpp"

namespace reid {
namespace {

using testing::random_dataset;

std::vector<ScoredPair> random_records(std::size_t n, std::uint64_t seed, int levels = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ScoredPair> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].label = (i % 3 == 0) ? kSameLabel : kDifferentLabel;
    double s = normal(rng) + (out[i].label == kSameLabel ? 0.7 : 0.0);
    if (levels > 0) s = std::round(s * levels) / levels;
    out[i].score = s;
  }
  return out;
}

void split_records(const std::vector<ScoredPair>& r, std::vector<double>& pos,
                   std::vector<double>& neg) {
  for (const auto& x : r) (x.label == kSameLabel ? pos : neg).push_back(x.score);
}

synthbench::ClusterConfig separable(std::size_t n) {
  synthbench::ClusterConfig c;
  c.n_identities = n;
  c.frames_per_video = 6;
  c.dimension = 16;
  c.seed = 5;
  return c;
}

TEST(Auc, WorkedExamples) {
  const std::vector<double> a{0.9, 0.8}, b{0.1, 0.2};
  EXPECT_EQ(auc(a, b), 1.0);
  const std::vector<double> c{0.5}, d{0.5};
  EXPECT_EQ(auc(c, d), 0.5);
  const std::vector<double> e{0.8, 0.4}, f{0.6, 0.2};
  EXPECT_EQ(auc(e, f), 0.75);
}

TEST(Auc, MatchesExhaustiveCountWithTies) {
  for (int levels : {0, 2, 5}) {
    std::vector<double> pos, neg;
    split_records(random_records(700, 11 + static_cast<std::uint64_t>(levels), levels), pos, neg);
    EXPECT_EQ(auc(pos, neg), synthbench::oracle_auc(pos, neg)) << levels;
    EXPECT_DOUBLE_EQ(auc(pos, neg) + auc(neg, pos), 1.0);
  }
}

TEST(Auc, InvariantUnderIncreasingTransform) {
  std::vector<double> pos, neg;
  split_records(random_records(300, 4), pos, neg);
  auto tpos = pos, tneg = neg;
  for (auto& x : tpos) x = std::exp(x);
  for (auto& x : tneg) x = std::exp(x);
  EXPECT_EQ(auc(pos, neg), auc(tpos, tneg));
}

TEST(Auc, Errors) {
  const std::vector<double> one{1.0}, none;
  EXPECT_AUDIT_ERROR(auc(one, none), ErrorCode::kEmptyScoreList);
  EXPECT_AUDIT_ERROR(auc(none, one), ErrorCode::kEmptyScoreList);
  const std::vector<double> bad{std::nan("")};
  EXPECT_AUDIT_ERROR(auc(bad, one), ErrorCode::kNonFiniteValue);
}

TEST(EvalPairs, OnePerVideoDeterministic) {
  const auto d = random_dataset(300, 4, 2);
  const auto view = d.split(Split::kTest);
  const auto a = sample_eval_pairs(view, 17);
  EXPECT_EQ(a.pairs.size(), view.size());
  EXPECT_EQ(a, sample_eval_pairs(view, 17));
  EXPECT_NE(a, sample_eval_pairs(view, 18));
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    const auto& p = a.pairs[i];
    EXPECT_EQ(p.video_a, view[i].video_id);
    if (p.label == kSameLabel) {
      EXPECT_EQ(p.video_b, p.video_a);
      if (view[i].num_frames() > 1) EXPECT_NE(p.frame_b, p.frame_a);
    } else {
      EXPECT_NE(p.video_b, p.video_a);
    }
  }
  EXPECT_NO_THROW(resolve_pairs(a, d));
}

TEST(EvalPairs, BalancedOverManyVideos) {
  const auto d = random_dataset(10000, 2, 3, 2);
  const auto pairs = sample_eval_pairs(d, 1);
  const double frac = static_cast<double>(pairs.count_label(kSameLabel)) / 10000.0;
  EXPECT_GE(frac, 0.47);
  EXPECT_LE(frac, 0.53);
}

TEST(EvalPairs, NeedsTwoVideos) {
  const auto d = random_dataset(1, 4, 2);
  EXPECT_AUDIT_ERROR(sample_eval_pairs(d, 0), ErrorCode::kInsufficientVideos);
}

TEST(Bootstrap, PerfectSeparationAndDeterminism) {
  std::vector<ScoredPair> r;
  for (int i = 0; i < 40; ++i) r.push_back({i < 20 ? 1.0 + i : -1.0 - i, i < 20 ? 1 : 0});
  const auto ci = bootstrap_ci(r, BootstrapStatistic::kAuc, 200, 3);
  EXPECT_EQ(ci.low, 1.0);
  EXPECT_EQ(ci.high, 1.0);

  const auto rec = random_records(400, 8);
  const auto a = bootstrap_ci(rec, BootstrapStatistic::kAuc, 500, 21, 1);
  const auto b = bootstrap_ci(rec, BootstrapStatistic::kAuc, 500, 21, 3);
  EXPECT_EQ(a.low, b.low);
  EXPECT_EQ(a.high, b.high);
  EXPECT_LE(0.0, a.low);
  EXPECT_LE(a.low, a.high);
  EXPECT_LE(a.high, 1.0);
}

TEST(Bootstrap, Errors) {
  const auto rec = random_records(50, 1);
  EXPECT_AUDIT_ERROR(bootstrap_ci(rec, BootstrapStatistic::kAuc, 99, 0),
                     ErrorCode::kInvalidArgument);
  const std::vector<ScoredPair> one_class(20, {0.5, kSameLabel});
  EXPECT_AUDIT_ERROR(bootstrap_ci(one_class, BootstrapStatistic::kAuc, 100, 0),
                     ErrorCode::kDegenerateResample);
  EXPECT_AUDIT_ERROR(bootstrap_ci({}, BootstrapStatistic::kAuc, 100, 0),
                     ErrorCode::kEmptyScoreList);
}

TEST(Youden, PicksSeparatingScore) {
  const std::vector<ScoredPair> r{{0.1, 0}, {0.2, 0}, {0.3, 1}, {0.4, 1}};
  EXPECT_EQ(youden_threshold(r), 0.2);
}

TEST(Summarize, ConstantScores) {
  std::vector<ScoredPair> r;
  for (int i = 0; i < 10; ++i) r.push_back({0.3, i % 2});
  const auto rep = summarize(r, "Corr", std::nullopt, false, {0});
  EXPECT_EQ(rep.auc, 0.5);
  EXPECT_EQ(rep.confusion[0][0] + rep.confusion[1][0], 10u);
  EXPECT_EQ(rep.threshold_rule, "youden");
}

TEST(Summarize, ConfusionConsistency) {
  const auto rec = random_records(500, 12);
  const auto rep = summarize(rec, "L2", 0.3, false, {300, 2});
  std::size_t total = 0;
  for (const auto& row : rep.confusion) total += row[0] + row[1];
  EXPECT_EQ(total, rep.n_pairs);
  const double tp = static_cast<double>(rep.confusion[1][1]);
  const double tn = static_cast<double>(rep.confusion[0][0]);
  const double fp = static_cast<double>(rep.confusion[0][1]);
  const double fn = static_cast<double>(rep.confusion[1][0]);
  EXPECT_DOUBLE_EQ(rep.accuracy, (tp + tn) / 500.0);
  EXPECT_DOUBLE_EQ(rep.precision, tp / (tp + fp));
  EXPECT_DOUBLE_EQ(rep.recall, tp / (tp + fn));
  EXPECT_DOUBLE_EQ(rep.f1, 2 * tp / (2 * tp + fp + fn));
  EXPECT_LE(rep.auc_ci.low, rep.auc);
  EXPECT_LE(rep.auc, rep.auc_ci.high);
  EXPECT_EQ(rep.threshold_rule, "given");

  const auto j = to_json(rep);
  EXPECT_EQ(j.at("n_pairs"), 500);
  EXPECT_EQ(j.at("confusion")[1][1], rep.confusion[1][1]);
}

TEST(Summarize, ZeroDivisionConvention) {
  const std::vector<ScoredPair> r{{0.1, 0}, {0.2, 1}};
  const auto rep = summarize(r, "L1", 5.0, false, {0});
  EXPECT_EQ(rep.precision, 0.0);
  EXPECT_EQ(rep.recall, 0.0);
  EXPECT_EQ(rep.f1, 0.0);
}

TEST(Evaluate, SeparableFixture) {
  const auto d = synthbench::generate_clustered_dataset(separable(400));
  const auto pairs = sample_eval_pairs(d.split(Split::kTest), 9);
  const auto rep = evaluate(pairs, d, SimilaritySpec::corr(), std::nullopt, {1000, 4});
  EXPECT_GE(rep.auc, 0.99);
  EXPECT_LE(rep.auc_ci.low, rep.auc);
  EXPECT_GE(rep.auc_ci.high, rep.auc);
  EXPECT_EQ(rep.metric, "Corr");
}

TEST(Evaluate, PredUsesHalfByDefault) {
  const auto d = random_dataset(60, 4, 2);
  const auto head = PredictorHead::zeros({4, 3, 1});
  const auto pairs = sample_eval_pairs(d, 1);
  const auto rep = evaluate(pairs, d, SimilaritySpec::pred(head), std::nullopt, {0});
  EXPECT_EQ(rep.threshold_rule, "pred_default");
  EXPECT_EQ(rep.threshold_used, 0.5);
  EXPECT_EQ(rep.auc, 0.5);
}

TEST(CrossDataset, OneByOneMatchesEvaluate) {
  const auto d = synthbench::generate_clustered_dataset(separable(100));
  const std::vector<NamedDataset> ds{{"A", &d}};
  const std::vector<NamedHead> heads{{"A", PredictorHead::zeros({16, 1})}};
  const auto table = cross_dataset_matrix(ds, heads, Metric::kCorr, 3, {200, 1});
  ASSERT_EQ(table.size(), 1u);
  const auto direct = evaluate(sample_eval_pairs(d.split(Split::kTest), 3), d,
                               SimilaritySpec::corr(), std::nullopt, {200, 1});
  EXPECT_EQ(table[0].report.auc, direct.auc);
  EXPECT_EQ(table[0].report.auc_ci.low, direct.auc_ci.low);
  const auto csv = cross_dataset_csv(table);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "train,test,metric,auc,auc_lo,auc_hi,accuracy,f1,precision,recall,threshold");
}

TEST(CrossDataset, SharedGeometryGeneralizes) {
  std::vector<EmbeddingDataset> sets;
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto c = separable(150);
    c.seed = 40 + s;
    sets.push_back(synthbench::generate_clustered_dataset(c));
  }
  const std::vector<NamedDataset> ds{{"A", &sets[0]}, {"B", &sets[1]}, {"C", &sets[2]}};
  const std::vector<NamedHead> heads{{"A", PredictorHead::zeros({16, 1})},
                                     {"B", PredictorHead::zeros({16, 1})},
                                     {"C", PredictorHead::zeros({16, 1})}};
  const auto table = cross_dataset_matrix(ds, heads, Metric::kCorr, 1, {0});
  ASSERT_EQ(table.size(), 9u);
  for (const auto& e : table) EXPECT_GE(e.report.auc, 0.9) << e.train << "->" << e.test;
}

}  // namespace
}  // namespace reid
