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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "reid/error.hpp"
#include "reid/seeding.hpp"
#include "text_format.hpp"

namespace reid {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr std::size_t kReduceChunk = 16;

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kEpochStream = 3;

// Loss of one example from its output logit, and d(loss)/d(logit).
// Clamping p to [lo, 1 - lo] equals clamping the complementary probability
// the same way, so each label only needs its own side.
struct ExampleLoss {
  double loss;
  double dlogit;
};

ExampleLoss example_loss(double z, int label) {
  const double p = sigmoid(z);
  const double q = sigmoid(-z);
  const double own = label == kSameLabel ? p : q;
  const double clamped = std::clamp(own, kProbFloor, 1.0 - kProbFloor);
  const bool active = own > kProbFloor && own < 1.0 - kProbFloor;
  double d = 0.0;
  if (active) d = label == kSameLabel ? -q : p;
  return {-std::log(clamped), d};
}

// Forward and backward passes for one network; buffers are reused.
class Backprop {
 public:
  explicit Backprop(const PredictorHead& head) : head_(head) {
    acts_.resize(head.layers.size());
    pre_.resize(head.layers.size());
    acts_[0].resize(head.input_dim());
    for (std::size_t k = 0; k < head.layers.size(); ++k) {
      pre_[k].resize(head.layers[k].rows);
      if (k + 1 < head.layers.size()) acts_[k + 1].resize(head.layers[k].rows);
    }
  }

  void load(const ResolvedPair& pair) {
    auto& x = acts_[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::abs(double{pair.a[i]} - double{pair.b[i]});
    }
  }

  double forward() {
    const auto& layers = head_.layers;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& layer = layers[k];
      const auto& in = acts_[k];
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const double* w = layer.weights.data() + r * layer.cols;
        double s = layer.bias[r];
        for (std::size_t c = 0; c < layer.cols; ++c) s += w[c] * in[c];
        pre_[k][r] = s;
        if (k + 1 < layers.size()) acts_[k + 1][r] = s > 0.0 ? s : 0.0;
      }
    }
    return pre_.back()[0];
  }

  // Accumulates d(loss)/d(params) into `grad` (flat, layer by layer: weights
  // then bias) given d(loss)/d(logit).
  void backward(double dlogit, double* grad) {
    const auto& layers = head_.layers;
    delta_.assign(1, dlogit);
    std::vector<std::size_t> offsets(layers.size());
    std::size_t off = 0;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      offsets[k] = off;
      off += layers[k].weights.size() + layers[k].bias.size();
    }
    for (std::size_t k = layers.size(); k-- > 0;) {
      const auto& layer = layers[k];
      const auto& in = acts_[k];
      double* gw = grad + offsets[k];
      double* gb = gw + layer.weights.size();
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const double d = delta_[r];
        if (d == 0.0) continue;
        for (std::size_t c = 0; c < layer.cols; ++c) gw[r * layer.cols + c] += d * in[c];
        gb[r] += d;
      }
      if (k == 0) break;
      next_.assign(layer.cols, 0.0);
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const double d = delta_[r];
        if (d == 0.0) continue;
        const double* w = layer.weights.data() + r * layer.cols;
        for (std::size_t c = 0; c < layer.cols; ++c) next_[c] += d * w[c];
      }
      for (std::size_t c = 0; c < layer.cols; ++c) {
        if (pre_[k - 1][c] <= 0.0) next_[c] = 0.0;
      }
      delta_.swap(next_);
    }
  }

 private:
  const PredictorHead& head_;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> pre_;
  std::vector<double> delta_;
  std::vector<double> next_;
};

void check_batch(const PredictorHead& head, std::span<const ResolvedPair> batch) {
  head.check();
  if (batch.empty()) throw AuditError(ErrorCode::kInvalidArgument, "empty batch");
  for (const auto& p : batch) {
    if (p.a.size() != head.input_dim() || p.b.size() != head.input_dim()) {
      throw AuditError(ErrorCode::kDimensionMismatch,
                       "pair features do not match head input width " +
                           std::to_string(head.input_dim()));
    }
  }
}

std::vector<double*> parameter_pointers(PredictorHead& head) {
  std::vector<double*> out;
  for (auto& layer : head.layers) {
    for (auto& w : layer.weights) out.push_back(&w);
    for (auto& b : layer.bias) out.push_back(&b);
  }
  return out;
}

void unflatten(std::span<const double> flat, PredictorHead& head) {
  std::size_t i = 0;
  for (auto& layer : head.layers) {
    for (auto& w : layer.weights) w = flat[i++];
    for (auto& b : layer.bias) b = flat[i++];
  }
}

bool all_finite(const PredictorHead& head) {
  for (const auto& layer : head.layers) {
    for (double w : layer.weights) if (!std::isfinite(w)) return false;
    for (double b : layer.bias) if (!std::isfinite(b)) return false;
  }
  return true;
}

[[noreturn]] void diverged(std::size_t epoch, double lr) {
  throw AuditError(ErrorCode::kNonFiniteLoss,
                   "training diverged in epoch " + std::to_string(epoch) +
                       " at learning_rate " + detail::format_number(lr) +
                       "; try a lower learning_rate");
}

}  // namespace

void TrainConfig::check() const {
  auto fail = [](const std::string& msg) { throw AuditError(ErrorCode::kInvalidConfig, msg); };
  if (batch_size == 0) fail("batch_size must be positive");
  if (hidden_size == 0) fail("hidden_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail("learning_rate must be positive and finite");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"hidden_size", c.hidden_size},
          {"seed", c.seed},               {"early_stop_patience", c.early_stop_patience}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.hidden_size = j.value("hidden_size", c.hidden_size);
    c.seed = j.value("seed", c.seed);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  } catch (const nlohmann::json::exception& e) {
    throw AuditError(ErrorCode::kInvalidConfig, std::string("train config: ") + e.what());
  }
  c.check();
  return c;
}

PairSet sample_training_pairs(const SplitView& split, std::size_t n, std::uint64_t seed) {
  if (split.size() < 2) {
    throw AuditError(ErrorCode::kInsufficientVideos,
                     "training pairs need at least 2 videos, split has " +
                         std::to_string(split.size()));
  }
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i].num_frames() == 0) {
      throw AuditError(ErrorCode::kInsufficientVideos,
                       "video '" + split[i].video_id + "' has no frames");
    }
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t m) {
    return std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
  };
  PairSet out;
  out.seed = seed;
  out.pairs.reserve(n);
  const std::size_t n_same = (n + 1) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    FramePair p;
    const std::size_t ia = uniform(split.size());
    const auto& a = split[ia];
    p.video_a = a.video_id;
    p.frame_a = uniform(a.num_frames());
    if (i < n_same) {
      p.label = kSameLabel;
      p.video_b = a.video_id;
      p.frame_b = uniform(a.num_frames());
    } else {
      p.label = kDifferentLabel;
      const std::size_t k = uniform(split.size() - 1);
      const auto& b = split[k < ia ? k : k + 1];
      p.video_b = b.video_id;
      p.frame_b = uniform(b.num_frames());
    }
    out.pairs.push_back(std::move(p));
  }
  std::shuffle(out.pairs.begin(), out.pairs.end(), rng);
  return out;
}

PredictorHead xavier_head(std::span<const std::size_t> widths, std::uint64_t seed) {
  PredictorHead head = PredictorHead::zeros(widths);
  std::mt19937_64 rng(seed);
  for (auto& layer : head.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Drawn at storage precision so saving the initialization is lossless.
    for (auto& w : layer.weights) w = static_cast<float>(dist(rng));
  }
  return head;
}

double bce_loss(const PredictorHead& head, std::span<const ResolvedPair> batch) {
  check_batch(head, batch);
  Backprop bp(head);
  double total = 0.0;
  for (const auto& pair : batch) {
    bp.load(pair);
    total += example_loss(bp.forward(), pair.label).loss;
  }
  return total / static_cast<double>(batch.size());
}

LossAndGrad loss_and_grad(const PredictorHead& head, std::span<const ResolvedPair> batch) {
  check_batch(head, batch);
  const std::size_t n_params = head.parameter_count();
  const std::size_t n_chunks = (batch.size() + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> chunk_grad(n_chunks * n_params, 0.0);
  std::vector<double> chunk_loss(n_chunks, 0.0);

  // Fixed chunks summed in index order: the result does not depend on how
  // chunks are spread over threads.
#pragma omp parallel if (n_chunks > 1)
  {
    Backprop bp(head);
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_chunks); ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * kReduceChunk;
      const std::size_t end = std::min(batch.size(), begin + kReduceChunk);
      double* g = chunk_grad.data() + static_cast<std::size_t>(c) * n_params;
      double loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        bp.load(batch[i]);
        const auto el = example_loss(bp.forward(), batch[i].label);
        loss += el.loss;
        bp.backward(el.dlogit, g);
      }
      chunk_loss[static_cast<std::size_t>(c)] = loss;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> flat(n_params, 0.0);
  double loss = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    loss += chunk_loss[c];
    const double* g = chunk_grad.data() + c * n_params;
    for (std::size_t i = 0; i < n_params; ++i) flat[i] += g[i];
  }
  for (double& v : flat) v *= inv_n;

  LossAndGrad out{loss * inv_n, head};
  unflatten(flat, out.grad);
  return out;
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,train_loss,heldout_loss\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + detail::format_number(e.train_loss) + "," +
           detail::format_number(e.heldout_loss) + "\n";
  }
  return out;
}

TrainResult train_head(const PairSet& pairs, const EmbeddingDataset& dataset,
                       const TrainConfig& config) {
  config.check();
  std::unordered_set<std::string_view> videos;
  for (const auto& p : pairs.pairs) {
    videos.insert(p.video_a);
    videos.insert(p.video_b);
  }
  if (videos.size() < 2 || pairs.pairs.size() < 2) {
    throw AuditError(ErrorCode::kInsufficientVideos,
                     "training needs at least 2 pairs over at least 2 videos");
  }
  const auto resolved = resolve_pairs(pairs, dataset);

  std::vector<std::size_t> order(resolved.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 split_rng(derive_seed(config.seed, kSplitStream, 0));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(resolved.size()))), 1,
      resolved.size() - 1);

  TrainResult result;
  std::vector<ResolvedPair> heldout;
  std::vector<ResolvedPair> train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_held) {
      heldout.push_back(resolved[order[i]]);
      result.heldout.pairs.push_back(pairs.pairs[order[i]]);
    } else {
      train.push_back(resolved[order[i]]);
    }
  }
  result.heldout.seed = pairs.seed;

  const std::vector<std::size_t> widths{dataset.dimension, config.hidden_size, 1};
  PredictorHead head = xavier_head(widths, derive_seed(config.seed, kInitStream, 0));
  auto params = parameter_pointers(head);

  auto& log = result.log;
  log.n_train_pairs = train.size();
  log.n_heldout_pairs = heldout.size();
  log.initial_heldout_loss = bce_loss(head, heldout);
  log.best_heldout_loss = log.initial_heldout_loss;
  PredictorHead best = head;

  std::vector<ResolvedPair> batch;
  batch.reserve(config.batch_size);
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, kEpochStream, epoch));
    std::shuffle(train.begin(), train.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < train.size(); begin += config.batch_size) {
      const std::size_t end = std::min(train.size(), begin + config.batch_size);
      const std::span<const ResolvedPair> b(train.data() + begin, end - begin);
      const auto lg = loss_and_grad(head, b);
      if (!std::isfinite(lg.loss)) diverged(epoch, config.learning_rate);
      loss_sum += lg.loss * static_cast<double>(b.size());
      std::size_t i = 0;
      for (const auto& layer : lg.grad.layers) {
        for (double g : layer.weights) *params[i++] -= config.learning_rate * g;
        for (double g : layer.bias) *params[i++] -= config.learning_rate * g;
      }
      if (!all_finite(head)) diverged(epoch, config.learning_rate);
    }
    const double held = bce_loss(head, heldout);
    if (!std::isfinite(held)) diverged(epoch, config.learning_rate);
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(train.size()), held});
    if (held < log.best_heldout_loss) {
      log.best_heldout_loss = held;
      log.best_epoch = epoch;
      best = head;
      stale = 0;
    } else if (++stale >= config.early_stop_patience) {
      break;
    }
  }
  result.head = best.rounded_to_storage();
  return result;
}

double gradient_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradientFloor});
  return std::abs(analytic - numeric) / scale;
}

double GradientCheckReport::overall_max() const {
  double m = 0.0;
  for (double v : max_relative_error) m = std::max(m, v);
  return m;
}

GradientCheckReport gradient_check(const PredictorHead& head,
                                   std::span<const ResolvedPair> batch, double epsilon,
                                   double tolerance) {
  if (!(epsilon > 0.0)) throw AuditError(ErrorCode::kInvalidArgument, "epsilon must be positive");
  const auto lg = loss_and_grad(head, batch);
  GradientCheckReport report;
  report.epsilon = epsilon;
  report.tolerance = tolerance;
  report.max_relative_error.assign(head.layers.size(), 0.0);

  PredictorHead probe = head;
  for (std::size_t k = 0; k < head.layers.size(); ++k) {
    for (int part = 0; part < 2; ++part) {
      auto& values = part == 0 ? probe.layers[k].weights : probe.layers[k].bias;
      const auto& grads = part == 0 ? lg.grad.layers[k].weights : lg.grad.layers[k].bias;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + epsilon;
        const double up = bce_loss(probe, batch);
        values[i] = saved - epsilon;
        const double down = bce_loss(probe, batch);
        values[i] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double rel = gradient_relative_error(grads[i], numeric);
        // NaN compares false everywhere; count it as a failure explicitly.
        const bool bad = !(rel <= tolerance);
        report.max_relative_error[k] =
            std::isnan(rel) ? rel : std::max(report.max_relative_error[k], rel);
        if (bad) report.flagged.push_back({k, part == 1, i, grads[i], numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace reid
