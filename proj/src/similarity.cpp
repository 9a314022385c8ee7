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

#include "reid/similarity.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "binary_io.hpp"
#include "kernels.hpp"
#include "reid/error.hpp"

namespace reid {
namespace {

constexpr char kHeadMagic[4] = {'H', 'E', 'A', 'D'};
constexpr std::uint32_t kHeadVersion = 1;
constexpr std::uint32_t kMaxLayerWidth = 1u << 16;

double pearson(FeatureVector a, FeatureVector b) {
  const std::size_t n = a.size();
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kL1: return "L1";
    case Metric::kL2: return "L2";
    case Metric::kCorr: return "Corr";
    case Metric::kPred: return "Pred";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view text) {
  if (text == "L1" || text == "l1") return Metric::kL1;
  if (text == "L2" || text == "l2") return Metric::kL2;
  if (text == "Corr" || text == "corr") return Metric::kCorr;
  if (text == "Pred" || text == "pred") return Metric::kPred;
  return std::nullopt;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PredictorHead PredictorHead::zeros(std::span<const std::size_t> widths) {
  if (widths.size() < 2) {
    throw AuditError(ErrorCode::kInvalidArgument, "a head needs at least input and output widths");
  }
  PredictorHead head;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    DenseLayer layer;
    layer.cols = widths[k];
    layer.rows = widths[k + 1];
    layer.weights.assign(layer.rows * layer.cols, 0.0);
    layer.bias.assign(layer.rows, 0.0);
    head.layers.push_back(std::move(layer));
  }
  head.check();
  return head;
}

std::size_t PredictorHead::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

void PredictorHead::check() const {
  if (layers.empty()) throw AuditError(ErrorCode::kShapeChainBroken, "head has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    if (layer.rows == 0 || layer.cols == 0 || layer.weights.size() != layer.rows * layer.cols ||
        layer.bias.size() != layer.rows) {
      throw AuditError(ErrorCode::kShapeChainBroken,
                       "layer " + std::to_string(k) + " storage does not match its shape");
    }
    if (k + 1 < layers.size() && layers[k + 1].cols != layer.rows) {
      throw AuditError(ErrorCode::kShapeChainBroken,
                       "layer " + std::to_string(k) + " outputs " + std::to_string(layer.rows) +
                           " but layer " + std::to_string(k + 1) + " expects " +
                           std::to_string(layers[k + 1].cols));
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
      throw AuditError(ErrorCode::kNonFiniteWeight,
                       "layer " + std::to_string(k) + " holds a non-finite parameter");
    }
  }
  if (layers.back().rows != 1) {
    throw AuditError(ErrorCode::kShapeChainBroken, "final layer must have one output");
  }
}

double PredictorHead::logit(std::span<const double> features) const {
  if (features.size() != input_dim()) {
    throw AuditError(ErrorCode::kDimensionMismatch, "feature length differs from head input");
  }
  detail::HeadEvaluator eval(*this);
  return eval.logit(features.data());
}

double PredictorHead::predict(std::span<const double> features) const {
  return sigmoid(logit(features));
}

PredictorHead PredictorHead::rounded_to_storage() const {
  PredictorHead out = *this;
  for (auto& layer : out.layers) {
    for (auto& w : layer.weights) w = static_cast<float>(w);
    for (auto& b : layer.bias) b = static_cast<float>(b);
  }
  return out;
}

std::string PredictorHead::fingerprint() const {
  // FNV-1a over the HEAD1 encoding of the float32-rounded parameters.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t byte : encode_head(*this)) {
    h ^= byte;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::uint8_t> encode_head(const PredictorHead& head) {
  head.check();
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kHeadMagic, 4));
  w.put<std::uint32_t>(kHeadVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(head.layers.size()));
  for (const auto& layer : head.layers) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.cols));
    for (double v : layer.weights) w.put<float>(static_cast<float>(v));
    for (double v : layer.bias) w.put<float>(static_cast<float>(v));
  }
  return w.take();
}

PredictorHead decode_head(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  std::string magic;
  std::uint32_t version = 0;
  std::uint32_t num_layers = 0;
  if (!r.get_bytes(4, magic) || magic != std::string_view(kHeadMagic, 4)) {
    throw AuditError(ErrorCode::kMalformedHeader, "missing HEAD magic");
  }
  if (!r.get(version) || version != kHeadVersion) {
    throw AuditError(ErrorCode::kMalformedHeader, "unsupported HEAD1 version");
  }
  if (!r.get(num_layers) || num_layers == 0 || num_layers > 64) {
    throw AuditError(ErrorCode::kMalformedHeader, "layer count outside [1, 64]");
  }
  PredictorHead head;
  for (std::uint32_t k = 0; k < num_layers; ++k) {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    if (!r.get(rows) || !r.get(cols)) {
      throw AuditError(ErrorCode::kMalformedHeader, "truncated layer header");
    }
    if (rows == 0 || cols == 0 || rows > kMaxLayerWidth || cols > kMaxLayerWidth) {
      throw AuditError(ErrorCode::kMalformedHeader,
                       "layer " + std::to_string(k) + " shape outside [1, 65536]");
    }
    std::vector<float> weights;
    std::vector<float> bias;
    if (!r.get_floats(std::size_t{rows} * cols, weights) || !r.get_floats(rows, bias)) {
      throw AuditError(ErrorCode::kMalformedHeader, "truncated parameters in layer " +
                                                        std::to_string(k));
    }
    DenseLayer layer;
    layer.rows = rows;
    layer.cols = cols;
    layer.weights.assign(weights.begin(), weights.end());
    layer.bias.assign(bias.begin(), bias.end());
    head.layers.push_back(std::move(layer));
  }
  if (!r.at_end()) throw AuditError(ErrorCode::kMalformedHeader, "trailing bytes after layers");
  head.check();
  return head;
}

PredictorHead load_head(const std::filesystem::path& path) {
  return decode_head(detail::read_file(path));
}

void write_head(const PredictorHead& head, const std::filesystem::path& path) {
  detail::write_file(path, encode_head(head));
}

SimilaritySpec::SimilaritySpec(Metric metric, PredictorHead head)
    : metric_(metric), head_(std::make_shared<const PredictorHead>(std::move(head))) {
  head_->check();
}

void SimilaritySpec::check_dimension(std::size_t dimension) const {
  if (metric_ != Metric::kPred) return;
  if (!head_) throw AuditError(ErrorCode::kInvalidArgument, "Pred metric requires a head");
  if (head_->input_dim() != dimension) {
    throw AuditError(ErrorCode::kDimensionMismatch,
                     "head input width " + std::to_string(head_->input_dim()) +
                         " differs from feature dimension " + std::to_string(dimension));
  }
}

std::string SimilaritySpec::description() const {
  std::string out(metric_name(metric_));
  if (metric_ == Metric::kPred && head_) out += "[" + head_->fingerprint() + "]";
  return out;
}

double score(const SimilaritySpec& spec, FeatureVector a, FeatureVector b) {
  if (a.size() != b.size() || a.empty()) {
    throw AuditError(ErrorCode::kDimensionMismatch,
                     "cannot score vectors of length " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  switch (spec.metric()) {
    case Metric::kL1: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double{a[i]} - double{b[i]});
      return -s;
    }
    case Metric::kL2: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = double{a[i]} - double{b[i]};
        s += d * d;
      }
      return -std::sqrt(s);
    }
    case Metric::kCorr:
      return pearson(a, b);
    case Metric::kPred: {
      spec.check_dimension(a.size());
      std::vector<double> diff(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) diff[i] = std::abs(double{a[i]} - double{b[i]});
      return spec.head()->predict(diff);
    }
  }
  return 0.0;
}

int resolve_workers(int requested) {
  return requested > 0 ? requested : std::max(1, omp_get_max_threads());
}

Matrix score_block(const SimilaritySpec& spec, std::span<const FeatureVector> queries,
                   std::span<const FeatureVector> refs, int workers, BlockStats* stats) {
  Matrix out(queries.size(), refs.size());
  if (queries.empty() || refs.empty()) return out;
  if (queries.front().size() != refs.front().size()) {
    throw AuditError(ErrorCode::kDimensionMismatch, "query and reference dimensions differ");
  }
  const detail::ScoringKernel kernel(spec, refs);
  const detail::PackedRows packed = kernel.pack(queries);

  constexpr std::size_t kTile = 64;
  const auto n_tiles = static_cast<std::ptrdiff_t>((queries.size() + kTile - 1) / kTile);
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
  for (std::ptrdiff_t t = 0; t < n_tiles; ++t) {
    const std::size_t q0 = static_cast<std::size_t>(t) * kTile;
    const std::size_t qn = std::min(kTile, queries.size() - q0);
    kernel.score(packed, q0, qn, 0, refs.size(), &out(q0, 0), out.cols);
  }

  if (stats != nullptr && spec.metric() == Metric::kCorr) {
    const std::size_t dq = packed.degenerate;
    const std::size_t dr = kernel.degenerate_refs();
    stats->degenerate_correlations += dq * refs.size() + dr * queries.size() - dq * dr;
  }
  return out;
}

}  // namespace reid
