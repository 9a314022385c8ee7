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

#include "kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "reid/error.hpp"

namespace reid::detail {
namespace {

constexpr std::size_t kQueryTile = 32;
constexpr std::size_t kRefChunk = 512;
static_assert(kRefChunk % kPanelWidth == 0);
static_assert(kQueryTile % kQueryBlock == 0);

template <Metric M>
inline double finish(double acc) {
  if constexpr (M == Metric::kCorr) {
    return std::clamp(acc, -1.0, 1.0);
  } else if constexpr (M == Metric::kL1) {
    return -acc;
  } else {
    return -std::sqrt(acc);
  }
}

// QB queries (rows of length dim) against one dim-major panel.
template <Metric M, std::size_t QB>
inline void micro_kernel(const double* __restrict__ q, std::size_t dim,
                         const double* __restrict__ panel, double (&acc)[QB][kPanelWidth]) {
  for (std::size_t i = 0; i < QB; ++i) {
    for (std::size_t j = 0; j < kPanelWidth; ++j) acc[i][j] = 0.0;
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double* __restrict__ r = panel + d * kPanelWidth;
    for (std::size_t i = 0; i < QB; ++i) {
      const double qv = q[i * dim + d];
#pragma omp simd
      for (std::size_t j = 0; j < kPanelWidth; ++j) {
        if constexpr (M == Metric::kCorr) {
          acc[i][j] += qv * r[j];
        } else if constexpr (M == Metric::kL1) {
          acc[i][j] += std::abs(qv - r[j]);
        } else {
          const double t = qv - r[j];
          acc[i][j] += t * t;
        }
      }
    }
  }
}

}  // namespace

PackedRows pack_rows(Metric metric, std::span<const FeatureVector> vectors) {
  PackedRows rows;
  rows.count = vectors.size();
  rows.dim = vectors.empty() ? 0 : vectors.front().size();
  rows.data.resize(rows.count * rows.dim);
  for (std::size_t i = 0; i < rows.count; ++i) {
    const auto v = vectors[i];
    if (v.size() != rows.dim) {
      throw AuditError(ErrorCode::kDimensionMismatch, "vectors of differing length in one block");
    }
    double* out = rows.data.data() + i * rows.dim;
    if (metric != Metric::kCorr) {
      for (std::size_t d = 0; d < rows.dim; ++d) out[d] = v[d];
      continue;
    }
    double mean = 0.0;
    for (float x : v) mean += x;
    mean /= static_cast<double>(rows.dim);
    double ss = 0.0;
    for (std::size_t d = 0; d < rows.dim; ++d) {
      out[d] = static_cast<double>(v[d]) - mean;
      ss += out[d] * out[d];
    }
    if (ss == 0.0) {
      ++rows.degenerate;
      std::fill(out, out + rows.dim, 0.0);
      continue;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t d = 0; d < rows.dim; ++d) out[d] *= inv;
  }
  return rows;
}

HeadEvaluator::HeadEvaluator(const PredictorHead& head) : head_(&head) {
  std::size_t widest = head.input_dim();
  for (const auto& layer : head.layers) widest = std::max(widest, layer.rows);
  a_.resize(widest);
  b_.resize(widest);
}

double HeadEvaluator::logit(const double* features) {
  const double* in = features;
  double* out = a_.data();
  const std::size_t last = head_->layers.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const auto& layer = head_->layers[k];
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double* w = layer.weights.data() + r * layer.cols;
      double z = layer.bias[r];
      for (std::size_t c = 0; c < layer.cols; ++c) z += w[c] * in[c];
      out[r] = (k == last) ? z : std::max(z, 0.0);
    }
    in = out;
    out = (out == a_.data()) ? b_.data() : a_.data();
  }
  return in[0];
}

ScoringKernel::ScoringKernel(const SimilaritySpec& spec, std::span<const FeatureVector> refs)
    : metric_(spec.metric()), head_(spec.head()) {
  n_refs_ = refs.size();
  dim_ = refs.empty() ? 0 : refs.front().size();
  if (!refs.empty()) spec.check_dimension(dim_);
  rows_ = pack_rows(metric_, refs);
  degenerate_refs_ = rows_.degenerate;
  if (metric_ == Metric::kPred) return;

  const std::size_t n_panels = (n_refs_ + kPanelWidth - 1) / kPanelWidth;
  panels_.assign(n_panels * dim_ * kPanelWidth, 0.0);
  for (std::size_t j = 0; j < n_refs_; ++j) {
    double* panel = panels_.data() + (j / kPanelWidth) * dim_ * kPanelWidth;
    const double* src = rows_.row(j);
    for (std::size_t d = 0; d < dim_; ++d) panel[d * kPanelWidth + j % kPanelWidth] = src[d];
  }
  rows_ = PackedRows{};
}

template <Metric M>
void ScoringKernel::score_panels(const PackedRows& queries, std::size_t q_begin,
                                 std::size_t q_count, std::size_t r_begin, std::size_t r_end,
                                 double* out, std::size_t ld) const {
  const std::size_t p_begin = r_begin / kPanelWidth;
  const std::size_t p_end = (r_end + kPanelWidth - 1) / kPanelWidth;
  auto store = [&](std::size_t i0, std::size_t nq, std::size_t p, const auto& acc) {
    const std::size_t j0 = p * kPanelWidth;
    const std::size_t width = std::min(kPanelWidth, r_end - j0);
    for (std::size_t i = 0; i < nq; ++i) {
      double* dst = out + (i0 + i) * ld + (j0 - r_begin);
      for (std::size_t j = 0; j < width; ++j) dst[j] = finish<M>(acc[i][j]);
    }
  };

  std::size_t i = 0;
  for (; i + kQueryBlock <= q_count; i += kQueryBlock) {
    const double* q = queries.row(q_begin + i);
    for (std::size_t p = p_begin; p < p_end; ++p) {
      double acc[kQueryBlock][kPanelWidth];
      micro_kernel<M, kQueryBlock>(q, dim_, panels_.data() + p * dim_ * kPanelWidth, acc);
      store(i, kQueryBlock, p, acc);
    }
  }
  for (; i < q_count; ++i) {
    const double* q = queries.row(q_begin + i);
    for (std::size_t p = p_begin; p < p_end; ++p) {
      double acc[1][kPanelWidth];
      micro_kernel<M, 1>(q, dim_, panels_.data() + p * dim_ * kPanelWidth, acc);
      store(i, 1, p, acc);
    }
  }
}

void ScoringKernel::score_pred(const PackedRows& queries, std::size_t q_begin,
                               std::size_t q_count, std::size_t r_begin, std::size_t r_end,
                               double* out, std::size_t ld) const {
  HeadEvaluator eval(*head_);
  std::vector<double> diff(dim_);
  for (std::size_t i = 0; i < q_count; ++i) {
    const double* q = queries.row(q_begin + i);
    for (std::size_t j = r_begin; j < r_end; ++j) {
      const double* r = rows_.row(j);
      for (std::size_t d = 0; d < dim_; ++d) diff[d] = std::abs(q[d] - r[d]);
      out[i * ld + (j - r_begin)] = eval.predict(diff.data());
    }
  }
}

void ScoringKernel::score(const PackedRows& queries, std::size_t q_begin, std::size_t q_count,
                          std::size_t r_begin, std::size_t r_end, double* out,
                          std::size_t ld) const {
  if (q_count == 0 || r_begin >= r_end) return;
  if (queries.dim != dim_) {
    throw AuditError(ErrorCode::kDimensionMismatch, "query and reference dimensions differ");
  }
  switch (metric_) {
    case Metric::kL1:
      return score_panels<Metric::kL1>(queries, q_begin, q_count, r_begin, r_end, out, ld);
    case Metric::kL2:
      return score_panels<Metric::kL2>(queries, q_begin, q_count, r_begin, r_end, out, ld);
    case Metric::kCorr:
      return score_panels<Metric::kCorr>(queries, q_begin, q_count, r_begin, r_end, out, ld);
    case Metric::kPred:
      return score_pred(queries, q_begin, q_count, r_begin, r_end, out, ld);
  }
}

SegmentArgmax segment_argmax(const ScoringKernel& kernel, const PackedRows& queries,
                             std::span<const std::size_t> segment_offsets,
                             std::span<const std::size_t> segment_rank, int workers) {
  const std::size_t nq = queries.count;
  const std::size_t n_refs = kernel.ref_count();
  const std::size_t n_segments = segment_offsets.empty() ? 0 : segment_offsets.size() - 1;
  SegmentArgmax result;
  result.best.assign(nq, -std::numeric_limits<double>::infinity());
  result.segment.assign(nq, 0);
  if (nq == 0 || n_segments == 0) return result;

  const std::size_t n_tiles = (nq + kQueryTile - 1) / kQueryTile;
  const auto n_tiles_signed = static_cast<std::ptrdiff_t>(n_tiles);

#pragma omp parallel num_threads(resolve_workers(workers))
  {
    std::vector<double> buf(kQueryTile * kRefChunk);
    std::vector<double> running(kQueryTile);

#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t tile = 0; tile < n_tiles_signed; ++tile) {
      const std::size_t q0 = static_cast<std::size_t>(tile) * kQueryTile;
      const std::size_t qn = std::min(kQueryTile, nq - q0);
      double* best = result.best.data() + q0;
      std::size_t* arg = result.segment.data() + q0;
      std::fill(running.begin(), running.end(), 0.0);
      std::size_t seg = 0;

      for (std::size_t r0 = 0; r0 < n_refs; r0 += kRefChunk) {
        const std::size_t r1 = std::min(n_refs, r0 + kRefChunk);
        kernel.score(queries, q0, qn, r0, r1, buf.data(), kRefChunk);
        for (std::size_t j = r0; j < r1; ++j) {
          for (std::size_t i = 0; i < qn; ++i) running[i] += buf[i * kRefChunk + (j - r0)];
          if (j + 1 != segment_offsets[seg + 1]) continue;
          const auto count = static_cast<double>(segment_offsets[seg + 1] - segment_offsets[seg]);
          for (std::size_t i = 0; i < qn; ++i) {
            const double mean = running[i] / count;
            if (mean > best[i] ||
                (mean == best[i] && segment_rank[seg] < segment_rank[arg[i]])) {
              best[i] = mean;
              arg[i] = seg;
            }
            running[i] = 0.0;
          }
          ++seg;
        }
      }
    }
  }
  return result;
}

}  // namespace reid::detail
