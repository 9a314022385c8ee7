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

// Mini-batch SGD training of a PredictorHead on absolute-difference features
// with binary cross-entropy, plus a finite-difference gradient checker.

#ifndef REID_HEAD_TRAINER_HPP_
#define REID_HEAD_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "reid/embedding_store.hpp"
#include "reid/pair_set.hpp"
#include "reid/similarity.hpp"

namespace reid {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  std::size_t hidden_size = 256;
  std::uint64_t seed = 0;
  // Training stops after this many consecutive epochs without a held-out
  // improvement.
  std::size_t early_stop_patience = 20;

  // Throws InvalidConfig. Zero epochs is allowed.
  void check() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// ceil(n/2) same-video pairs followed by floor(n/2) different-video pairs,
// then shuffled. Throws InsufficientVideos below two videos.
PairSet sample_training_pairs(const SplitView& split, std::size_t n, std::uint64_t seed);

// Mean BCE with probabilities clamped to [1e-12, 1 - 1e-12].
double bce_loss(const PredictorHead& head, std::span<const ResolvedPair> batch);

struct LossAndGrad {
  double loss = 0.0;
  PredictorHead grad;  // same shapes as the head
};

// Exact gradient of bce_loss. Throws DimensionMismatch, InvalidArgument on an
// empty batch.
LossAndGrad loss_and_grad(const PredictorHead& head, std::span<const ResolvedPair> batch);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  double initial_heldout_loss = 0.0;
  // 0 when no epoch beat the initialization.
  std::size_t best_epoch = 0;
  double best_heldout_loss = 0.0;
  std::size_t n_train_pairs = 0;
  std::size_t n_heldout_pairs = 0;

  // Header: epoch,train_loss,heldout_loss
  std::string to_csv() const;
};

struct TrainResult {
  PredictorHead head;  // float32-representable parameters
  TrainLog log;
  PairSet heldout;
};

// Xavier-uniform init, 10% of pairs held out by seeded shuffle, best
// held-out head returned. Throws InsufficientVideos, NonFiniteLoss.
TrainResult train_head(const PairSet& pairs, const EmbeddingDataset& dataset,
                       const TrainConfig& config);

// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias.
PredictorHead xavier_head(std::span<const std::size_t> widths, std::uint64_t seed);

struct FlaggedParameter {
  std::size_t layer = 0;
  bool bias = false;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradientCheckReport {
  double epsilon = 0.0;
  double tolerance = 0.0;
  std::vector<double> max_relative_error;  // per layer
  std::vector<FlaggedParameter> flagged;

  double overall_max() const;
  bool ok() const { return flagged.empty(); }
};

// |analytic - numeric| / max(|analytic|, |numeric|, kGradientFloor).
inline constexpr double kGradientFloor = 1e-6;
double gradient_relative_error(double analytic, double numeric);

// Central differences for every parameter; flags relative errors above
// `tolerance`. Throws InvalidArgument when epsilon <= 0.
GradientCheckReport gradient_check(const PredictorHead& head,
                                   std::span<const ResolvedPair> batch, double epsilon,
                                   double tolerance = 1e-3);

}  // namespace reid

#endif  // REID_HEAD_TRAINER_HPP_
