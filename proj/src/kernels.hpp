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

// Blocked, OpenMP-parallel scoring kernels behind score_block and pmax_all.
// The straightforward double loops in synthbench are the serial reference
// these kernels are tested against.

#ifndef REID_SRC_KERNELS_HPP_
#define REID_SRC_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "reid/similarity.hpp"

namespace reid::detail {

// References per packed panel; queries per micro-kernel call.
inline constexpr std::size_t kPanelWidth = 16;
inline constexpr std::size_t kQueryBlock = 4;

// Vectors in the metric's working form, double precision, one row per vector.
// Corr rows are centered and scaled to unit norm, or all zero when the input
// is constant (so every dot product with them is the degenerate score 0).
struct PackedRows {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> data;
  std::size_t degenerate = 0;

  const double* row(std::size_t i) const { return data.data() + i * dim; }
};

PackedRows pack_rows(Metric metric, std::span<const FeatureVector> vectors);

// Reusable forward pass without per-call allocation.
class HeadEvaluator {
 public:
  explicit HeadEvaluator(const PredictorHead& head);
  double logit(const double* features);
  double predict(const double* features) { return sigmoid(logit(features)); }

 private:
  const PredictorHead* head_;
  std::vector<double> a_;
  std::vector<double> b_;
};

class ScoringKernel {
 public:
  ScoringKernel(const SimilaritySpec& spec, std::span<const FeatureVector> refs);

  PackedRows pack(std::span<const FeatureVector> queries) const {
    return pack_rows(metric_, queries);
  }
  std::size_t ref_count() const { return n_refs_; }
  std::size_t dim() const { return dim_; }
  std::size_t degenerate_refs() const { return degenerate_refs_; }

  // out[i * ld + (j - r_begin)] = score of query q_begin + i against ref j,
  // for i < q_count and r_begin <= j < r_end. r_begin must be a multiple of
  // kPanelWidth. Single-threaded; callers parallelize over query ranges.
  void score(const PackedRows& queries, std::size_t q_begin, std::size_t q_count,
             std::size_t r_begin, std::size_t r_end, double* out, std::size_t ld) const;

 private:
  template <Metric M>
  void score_panels(const PackedRows& queries, std::size_t q_begin, std::size_t q_count,
                    std::size_t r_begin, std::size_t r_end, double* out, std::size_t ld) const;
  void score_pred(const PackedRows& queries, std::size_t q_begin, std::size_t q_count,
                  std::size_t r_begin, std::size_t r_end, double* out, std::size_t ld) const;

  Metric metric_;
  const PredictorHead* head_ = nullptr;
  std::size_t dim_ = 0;
  std::size_t n_refs_ = 0;
  std::size_t degenerate_refs_ = 0;
  // L1/L2/Corr: panels of kPanelWidth refs stored dim-major, zero padded.
  std::vector<double> panels_;
  // Pred: plain row-major copies.
  PackedRows rows_;
};

struct SegmentArgmax {
  std::vector<double> best;
  std::vector<std::size_t> segment;
};

// For every query: the maximum over reference segments of the mean score
// against that segment's refs, and the segment attaining it (lowest
// segment_rank wins exact ties). segment_offsets has one more entry than
// there are segments and partitions [0, kernel.ref_count()).
SegmentArgmax segment_argmax(const ScoringKernel& kernel, const PackedRows& queries,
                             std::span<const std::size_t> segment_offsets,
                             std::span<const std::size_t> segment_rank, int workers);

}  // namespace reid::detail

#endif  // REID_SRC_KERNELS_HPP_
