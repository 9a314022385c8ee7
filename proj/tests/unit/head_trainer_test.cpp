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

#include "reid/head_trainer.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <random>

#include "reid/pair_eval.hpp"
#include "reid/seeding.hpp"
#include "reid/synthbench.hpp"
#include "test_util.hpp"

namespace reid {
namespace {

using testing::random_dataset;
using testing::random_vector;

// Owns the frames that a batch of ResolvedPair points into.
struct RandomBatch {
  std::vector<std::vector<float>> frames;
  std::vector<ResolvedPair> pairs;
};

RandomBatch random_batch(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RandomBatch b;
  b.frames.reserve(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) b.frames.push_back(random_vector(rng, dim));
  for (std::size_t i = 0; i < n; ++i) {
    b.pairs.push_back({b.frames[2 * i], b.frames[2 * i + 1], static_cast<int>(i % 2)});
  }
  return b;
}

PredictorHead random_head(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  const std::vector<std::size_t> widths{dim, hidden, 1};
  auto head = xavier_head(widths, seed);
  std::mt19937_64 rng(seed ^ 0x55);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (auto& layer : head.layers) {
    for (auto& b : layer.bias) b = normal(rng);
  }
  return head;
}

synthbench::ClusterConfig separable() {
  synthbench::ClusterConfig c;
  c.n_identities = 500;
  c.frames_per_video = 8;
  c.dimension = 32;
  c.sigma_intra = 0.05;
  c.sigma_inter = 1.0;
  c.seed = 3;
  return c;
}

TEST(TrainingPairs, BalancedAndDeterministic) {
  const auto d = random_dataset(3, 4, 1);
  const auto four = sample_training_pairs(d, 4, 5);
  EXPECT_EQ(four.count_label(kSameLabel), 2u);
  EXPECT_EQ(four.count_label(kDifferentLabel), 2u);
  const auto big = sample_training_pairs(d, 10001, 5);
  EXPECT_EQ(big.count_label(kSameLabel), 5001u);
  EXPECT_EQ(big, sample_training_pairs(d, 10001, 5));
  for (const auto& p : big.pairs) {
    if (p.label == kSameLabel) {
      EXPECT_EQ(p.video_a, p.video_b);
    } else {
      EXPECT_NE(p.video_a, p.video_b);
    }
  }
  EXPECT_NO_THROW(resolve_pairs(big, d));
  EXPECT_AUDIT_ERROR(sample_training_pairs(random_dataset(1, 4, 1), 4, 0),
                     ErrorCode::kInsufficientVideos);
}

TEST(Loss, ZeroHeadIsLn2) {
  const auto b = random_batch(33, 8, 2);
  const auto head = PredictorHead::zeros({8, 5, 1});
  const auto lg = loss_and_grad(head, b.pairs);
  EXPECT_NEAR(lg.loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(head, b.pairs), std::log(2.0), 1e-12);
}

TEST(Loss, ConfidentCorrectPredictionApproachesZero) {
  const auto b = random_batch(1, 4, 3);
  auto head = PredictorHead::zeros({4, 1});
  head.layers[0].bias[0] = b.pairs[0].label == kSameLabel ? 60.0 : -60.0;
  EXPECT_LT(bce_loss(head, b.pairs), 1e-11);
}

TEST(Loss, Errors) {
  const auto b = random_batch(4, 4, 3);
  const auto head = PredictorHead::zeros({5, 1});
  EXPECT_AUDIT_ERROR(loss_and_grad(head, b.pairs), ErrorCode::kDimensionMismatch);
  EXPECT_AUDIT_ERROR(loss_and_grad(PredictorHead::zeros({4, 1}), {}),
                     ErrorCode::kInvalidArgument);
}

TEST(Loss, GradientIndependentOfWorkers) {
  const auto b = random_batch(100, 16, 4);
  const auto head = random_head(16, 12, 4);
  omp_set_num_threads(1);
  const auto one = loss_and_grad(head, b.pairs);
  omp_set_num_threads(4);
  const auto four = loss_and_grad(head, b.pairs);
  EXPECT_EQ(one.loss, four.loss);
  EXPECT_EQ(one.grad, four.grad);
}

TEST(GradientCheck, RandomHeadsPass) {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const std::size_t dim = s % 2 == 0 ? 8 : 16;
    const auto head = random_head(dim, 10, s);
    const auto b = random_batch(16, dim, 100 + s);
    const auto report = gradient_check(head, b.pairs, 1e-4);
    EXPECT_TRUE(report.ok()) << "seed " << s << " max " << report.overall_max();
    EXPECT_LE(report.overall_max(), 1e-4);
    EXPECT_EQ(report.max_relative_error.size(), 2u);
  }
}

TEST(GradientCheck, HugeWeightStillWellFormed) {
  auto head = random_head(8, 6, 1);
  head.layers[0].weights[3] = 1e6;
  const auto b = random_batch(16, 8, 2);
  const auto report = gradient_check(head, b.pairs, 1e-4);
  EXPECT_EQ(report.max_relative_error.size(), 2u);
  for (const auto& f : report.flagged) EXPECT_LT(f.layer, 2u);
  EXPECT_AUDIT_ERROR(gradient_check(head, b.pairs, 0.0), ErrorCode::kInvalidArgument);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto d = random_dataset(10, 4, 1);
  const auto pairs = sample_training_pairs(d, 40, 1);
  TrainConfig c;
  c.epochs = 0;
  c.hidden_size = 3;
  c.seed = 9;
  const auto r = train_head(pairs, d, c);
  EXPECT_TRUE(r.log.epochs.empty());
  const std::vector<std::size_t> widths{4, 3, 1};
  EXPECT_EQ(r.head, xavier_head(widths, derive_seed(9, 2, 0)));
  EXPECT_EQ(r.log.to_csv(), "epoch,train_loss,heldout_loss\n");
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_AUDIT_ERROR(c.check(), ErrorCode::kInvalidConfig);
  c = {};
  c.learning_rate = -1;
  EXPECT_AUDIT_ERROR(c.check(), ErrorCode::kInvalidConfig);
  c = {};
  c.hidden_size = 7;
  EXPECT_EQ(train_config_from_json(to_json(c)).hidden_size, 7u);
}

TEST(Train, DivergenceIsReported) {
  const auto d = synthbench::generate_clustered_dataset(separable());
  const auto pairs = sample_training_pairs(d.split(Split::kTrain), 400, 1);
  TrainConfig c;
  c.epochs = 5;
  c.learning_rate = 1e300;
  EXPECT_AUDIT_ERROR(train_head(pairs, d, c), ErrorCode::kNonFiniteLoss);
}

TEST(Train, SeparableFixtureAndDeterminism) {
  const auto d = synthbench::generate_clustered_dataset(separable());
  const auto pairs = sample_training_pairs(d.split(Split::kTrain), 2000, 7);
  TrainConfig c;
  c.seed = 7;
  const auto r = train_head(pairs, d, c);
  ASSERT_FALSE(r.log.epochs.empty());
  EXPECT_LE(r.log.best_heldout_loss, r.log.initial_heldout_loss);
  EXPECT_EQ(r.log.n_heldout_pairs, 200u);

  const auto held = evaluate(r.heldout, d, SimilaritySpec::pred(r.head), std::nullopt, {0});
  EXPECT_GE(held.accuracy, 0.95);
  const auto test = evaluate(sample_eval_pairs(d.split(Split::kTest), 7), d,
                             SimilaritySpec::pred(r.head), std::nullopt, {0});
  EXPECT_GE(test.auc, 0.99);

  omp_set_num_threads(1);
  const auto again = train_head(pairs, d, c);
  EXPECT_EQ(again.head, r.head);
  EXPECT_EQ(again.log.to_csv(), r.log.to_csv());
}

TEST(Train, ShuffledLabelsStayNearChance) {
  const auto d = synthbench::generate_clustered_dataset(separable());
  auto pairs = sample_training_pairs(d.split(Split::kTrain), 2000, 8);
  std::mt19937_64 rng(8);
  std::vector<int> labels;
  for (const auto& p : pairs.pairs) labels.push_back(p.label);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < labels.size(); ++i) pairs.pairs[i].label = labels[i];
  TrainConfig c;
  c.seed = 8;
  const auto r = train_head(pairs, d, c);
  const auto held = evaluate(r.heldout, d, SimilaritySpec::pred(r.head), std::nullopt, {0});
  EXPECT_GE(held.accuracy, 0.4);
  EXPECT_LE(held.accuracy, 0.6);
}

}  // namespace
}  // namespace reid
