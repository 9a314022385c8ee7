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

// Verification protocol: one evaluation pair per video (same or different
// source with equal probability), AUC via the Mann-Whitney statistic,
// thresholded metrics, pair-level bootstrap intervals and the cross-dataset
// generalization table.

#ifndef REID_PAIR_EVAL_HPP_
#define REID_PAIR_EVAL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reid/embedding_store.hpp"
#include "reid/pair_set.hpp"
#include "reid/similarity.hpp"

namespace reid {

PairSet sample_eval_pairs(const SplitView& split, std::uint64_t seed);

// (concordant + 0.5 * tied) / (|pos| * |neg|), computed by midranks.
double auc(std::span<const double> pos, std::span<const double> neg);

struct ScoredPair {
  double score = 0.0;
  int label = kDifferentLabel;
};

double auc(std::span<const ScoredPair> records);

enum class BootstrapStatistic { kAuc };

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile (2.5th, 97.5th, nearest rank) interval over pair-level
// resamples. Resamples lacking a class are redrawn; 100 consecutive
// failures raise DegenerateResample.
ConfidenceInterval bootstrap_ci(std::span<const ScoredPair> records,
                                BootstrapStatistic statistic, std::size_t n_resamples,
                                std::uint64_t seed, int workers = 0);

struct BootstrapOptions {
  std::size_t n_resamples = 10000;
  std::uint64_t seed = 0;
  int workers = 0;
};

struct EvalReport {
  std::string metric;  // SimilaritySpec::description()
  double auc = 0.0;
  ConfidenceInterval auc_ci;
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  // confusion[truth][prediction], index 1 = same video.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::size_t n_pairs = 0;
  double threshold_used = 0.0;
  // "given", "pred_default" or "youden".
  std::string threshold_rule;
};

std::vector<ScoredPair> score_pairs(const PairSet& pairs, const EmbeddingDataset& dataset,
                                    const SimilaritySpec& spec);

// Threshold maximizing TPR - FPR with "positive iff score > threshold";
// candidates are the observed scores, ties go to the smallest.
double youden_threshold(std::span<const ScoredPair> records);

// Predictions are positive iff score > threshold. Without an explicit
// threshold, Pred uses 0.5 and the distance/correlation metrics use Youden's J.
EvalReport evaluate(const PairSet& pairs, const EmbeddingDataset& dataset,
                    const SimilaritySpec& spec, std::optional<double> threshold = std::nullopt,
                    const BootstrapOptions& bootstrap = {});

EvalReport summarize(std::span<const ScoredPair> records, const std::string& metric,
                     std::optional<double> threshold, bool pred_default,
                     const BootstrapOptions& bootstrap);

nlohmann::json to_json(const EvalReport& report);

struct NamedDataset {
  std::string name;
  const EmbeddingDataset* dataset = nullptr;
};

struct NamedHead {
  std::string name;
  PredictorHead head;
};

struct CrossDatasetEntry {
  std::string train;
  std::string test;
  EvalReport report;
};

// Every head (row, named after its training dataset) evaluated on every
// dataset's test split. For metrics other than Pred the heads only name the
// rows.
std::vector<CrossDatasetEntry> cross_dataset_matrix(std::span<const NamedDataset> datasets,
                                                    std::span<const NamedHead> heads,
                                                    Metric metric, std::uint64_t seed,
                                                    const BootstrapOptions& bootstrap = {});

// Header: train,test,metric,auc,auc_lo,auc_hi,accuracy,f1,precision,recall,threshold
std::string cross_dataset_csv(std::span<const CrossDatasetEntry> entries);

}  // namespace reid

#endif  // REID_PAIR_EVAL_HPP_
