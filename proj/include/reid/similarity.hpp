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

// Same-source scoring functions. Every metric is oriented so that a higher
// score means "more likely the same video": L1 and L2 are negated distances,
// Corr is the Pearson correlation, and Pred is the learned head
// sigmoid(MLP(|a - b|)).

#ifndef REID_SIMILARITY_HPP_
#define REID_SIMILARITY_HPP_

#include <cstddef>
#include <initializer_list>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reid/embedding_store.hpp"

namespace reid {

enum class Metric { kL1, kL2, kCorr, kPred };

std::string_view metric_name(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

struct DenseLayer {
  std::size_t rows = 0;  // output width
  std::size_t cols = 0;  // input width
  std::vector<double> weights;  // rows x cols, row-major
  std::vector<double> bias;     // rows

  bool operator==(const DenseLayer&) const = default;
};

// Rectifier on hidden layers, logistic sigmoid on the single output unit.
struct PredictorHead {
  std::vector<DenseLayer> layers;

  // Zero weights and biases; widths = {input, hidden..., 1}.
  static PredictorHead zeros(std::span<const std::size_t> widths);
  static PredictorHead zeros(std::initializer_list<std::size_t> widths) {
    return zeros(std::span<const std::size_t>(widths.begin(), widths.size()));
  }

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().cols; }
  std::size_t parameter_count() const;

  // Throws ShapeChainBroken or NonFiniteWeight.
  void check() const;

  // Output-unit pre-activation for an absolute-difference feature vector.
  double logit(std::span<const double> features) const;
  double predict(std::span<const double> features) const;

  // Parameters rounded to float32, the precision HEAD1 stores.
  PredictorHead rounded_to_storage() const;
  // Hash of shapes and float32 parameters, stable across runs.
  std::string fingerprint() const;

  bool operator==(const PredictorHead&) const = default;
};

double sigmoid(double x);

std::vector<std::uint8_t> encode_head(const PredictorHead& head);
PredictorHead decode_head(std::span<const std::uint8_t> bytes);
PredictorHead load_head(const std::filesystem::path& path);
void write_head(const PredictorHead& head, const std::filesystem::path& path);

class SimilaritySpec {
 public:
  SimilaritySpec() = default;
  explicit SimilaritySpec(Metric metric) : metric_(metric) {}
  SimilaritySpec(Metric metric, PredictorHead head);

  static SimilaritySpec l1() { return SimilaritySpec(Metric::kL1); }
  static SimilaritySpec l2() { return SimilaritySpec(Metric::kL2); }
  static SimilaritySpec corr() { return SimilaritySpec(Metric::kCorr); }
  static SimilaritySpec pred(PredictorHead head) {
    return SimilaritySpec(Metric::kPred, std::move(head));
  }

  Metric metric() const { return metric_; }
  const PredictorHead* head() const { return head_.get(); }

  // Throws InvalidArgument if Pred lacks a head, DimensionMismatch if the head
  // input width differs from `dimension`.
  void check_dimension(std::size_t dimension) const;

  // "L1", "L2", "Corr" or "Pred[<fingerprint>]"; used to match tables.
  std::string description() const;

 private:
  Metric metric_ = Metric::kCorr;
  std::shared_ptr<const PredictorHead> head_;
};

double score(const SimilaritySpec& spec, FeatureVector a, FeatureVector b);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct BlockStats {
  // Pairs where Corr was undefined (a zero-variance vector) and scored 0.
  std::size_t degenerate_correlations = 0;
};

// Entry (i, j) = score(spec, queries[i], refs[j]) up to summation order.
// workers <= 0 uses every available thread.
Matrix score_block(const SimilaritySpec& spec, std::span<const FeatureVector> queries,
                   std::span<const FeatureVector> refs, int workers = 0,
                   BlockStats* stats = nullptr);

// Thread count for a requested worker count (<= 0 means all available).
int resolve_workers(int requested);

}  // namespace reid

#endif  // REID_SIMILARITY_HPP_
