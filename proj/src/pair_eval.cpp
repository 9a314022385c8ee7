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

#include <algorithm>
#include <cmath>
#include <random>

#include "reid/error.hpp"
#include "reid/privacy_filter.hpp"
#include "reid/seeding.hpp"
#include "text_format.hpp"

namespace reid {
namespace {

constexpr std::uint64_t kBootstrapStream = 0xB007;
constexpr int kMaxRedraws = 100;

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw AuditError(ErrorCode::kNonFiniteValue, "non-finite score");
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PairSet sample_eval_pairs(const SplitView& split, std::uint64_t seed) {
  if (split.size() < 2) {
    throw AuditError(ErrorCode::kInsufficientVideos,
                     "evaluation pairs need at least 2 videos, split has " +
                         std::to_string(split.size()));
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  auto uniform = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  PairSet out;
  out.seed = seed;
  out.pairs.reserve(split.size());
  for (std::size_t v = 0; v < split.size(); ++v) {
    const auto& video = split[v];
    FramePair pair;
    pair.video_a = video.video_id;
    pair.frame_a = uniform(video.num_frames());
    if (coin(rng)) {
      pair.label = kSameLabel;
      pair.video_b = video.video_id;
      // Another frame of the same video; single-frame videos reuse frame 0.
      if (video.num_frames() > 1) {
        const std::size_t k = uniform(video.num_frames() - 1);
        pair.frame_b = k < pair.frame_a ? k : k + 1;
      }
    } else {
      pair.label = kDifferentLabel;
      const std::size_t k = uniform(split.size() - 1);
      const auto& other = split[k < v ? k : k + 1];
      pair.video_b = other.video_id;
      pair.frame_b = uniform(other.num_frames());
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

double auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) {
    throw AuditError(ErrorCode::kEmptyScoreList, "AUC needs positive and negative scores");
  }
  require_finite(pos);
  require_finite(neg);
  std::vector<std::pair<double, bool>> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.emplace_back(s, true);
  for (double s : neg) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midranks: a tie group occupying ranks i+1..j gets (i+1+j)/2 each.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      group_pos += all[j].second ? 1 : 0;
      ++j;
    }
    pos_rank_sum += 0.5 * static_cast<double>(i + 1 + j) * static_cast<double>(group_pos);
    i = j;
  }
  const auto p = static_cast<double>(pos.size());
  const auto n = static_cast<double>(neg.size());
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  const double m = p * n;
  // Above one half, divide the complement so that swapping the classes
  // yields exactly 1 - auc.
  if (2.0 * u > m) return 1.0 - (m - u) / m;
  return u / m;
}

double auc(std::span<const ScoredPair> records) {
  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& r : records) (r.label == kSameLabel ? pos : neg).push_back(r.score);
  return auc(pos, neg);
}

ConfidenceInterval bootstrap_ci(std::span<const ScoredPair> records,
                                BootstrapStatistic /*statistic*/, std::size_t n_resamples,
                                std::uint64_t seed, int workers) {
  if (n_resamples < 100) {
    throw AuditError(ErrorCode::kInvalidArgument, "bootstrap needs at least 100 resamples");
  }
  if (records.empty()) throw AuditError(ErrorCode::kEmptyScoreList, "no records to resample");
  for (const auto& r : records) {
    if (!std::isfinite(r.score)) throw AuditError(ErrorCode::kNonFiniteValue, "non-finite score");
  }

  const std::size_t n = records.size();
  std::vector<double> stats(n_resamples);
  std::vector<char> failed(n_resamples, 0);
  const auto total = static_cast<std::ptrdiff_t>(n_resamples);

#pragma omp parallel num_threads(resolve_workers(workers))
  {
    std::vector<double> pos;
    std::vector<double> neg;
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < total; ++r) {
      std::mt19937_64 rng(derive_seed(seed, kBootstrapStream, static_cast<std::uint64_t>(r)));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      int attempts = 0;
      while (true) {
        pos.clear();
        neg.clear();
        for (std::size_t i = 0; i < n; ++i) {
          const auto& rec = records[pick(rng)];
          (rec.label == kSameLabel ? pos : neg).push_back(rec.score);
        }
        if (!pos.empty() && !neg.empty()) break;
        if (++attempts == kMaxRedraws) break;
      }
      if (pos.empty() || neg.empty()) {
        failed[static_cast<std::size_t>(r)] = 1;
        continue;
      }
      stats[static_cast<std::size_t>(r)] = auc(pos, neg);
    }
  }
  if (std::find(failed.begin(), failed.end(), 1) != failed.end()) {
    throw AuditError(ErrorCode::kDegenerateResample,
                     "100 consecutive resamples lacked a positive or a negative pair");
  }
  std::sort(stats.begin(), stats.end());
  return {stats[nearest_rank(2.5, n_resamples) - 1], stats[nearest_rank(97.5, n_resamples) - 1]};
}

std::vector<ScoredPair> score_pairs(const PairSet& pairs, const EmbeddingDataset& dataset,
                                    const SimilaritySpec& spec) {
  spec.check_dimension(dataset.dimension);
  const auto resolved = resolve_pairs(pairs, dataset);
  std::vector<ScoredPair> out(resolved.size());
  const auto total = static_cast<std::ptrdiff_t>(resolved.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    const auto& p = resolved[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = {score(spec, p.a, p.b), p.label};
  }
  return out;
}

double youden_threshold(std::span<const ScoredPair> records) {
  std::vector<ScoredPair> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.score < b.score; });
  std::size_t total_pos = 0;
  for (const auto& r : sorted) total_pos += r.label == kSameLabel ? 1 : 0;
  const std::size_t total_neg = sorted.size() - total_pos;
  if (total_pos == 0 || total_neg == 0) {
    throw AuditError(ErrorCode::kEmptyScoreList, "Youden threshold needs both classes");
  }
  // J * P * N = pos_above * N - neg_above * P, compared exactly in integers.
  using Wide = long double;
  std::size_t pos_le = 0;
  std::size_t neg_le = 0;
  double best_threshold = sorted.front().score;
  Wide best_j = -1;
  for (std::size_t i = 0; i < sorted.size();) {
    const double value = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == value) {
      (sorted[i].label == kSameLabel ? pos_le : neg_le) += 1;
      ++i;
    }
    const Wide j = static_cast<Wide>(total_pos - pos_le) * static_cast<Wide>(total_neg) -
                   static_cast<Wide>(total_neg - neg_le) * static_cast<Wide>(total_pos);
    if (j > best_j) {
      best_j = j;
      best_threshold = value;
    }
  }
  return best_threshold;
}

EvalReport summarize(std::span<const ScoredPair> records, const std::string& metric,
                     std::optional<double> threshold, bool pred_default,
                     const BootstrapOptions& bootstrap) {
  EvalReport report;
  report.metric = metric;
  report.n_pairs = records.size();
  report.auc = auc(records);
  if (bootstrap.n_resamples > 0) {
    report.auc_ci = bootstrap_ci(records, BootstrapStatistic::kAuc, bootstrap.n_resamples,
                                 bootstrap.seed, bootstrap.workers);
    // A percentile interval can exclude a skewed point estimate; widen it so
    // the reported interval always brackets the estimate.
    report.auc_ci.low = std::min(report.auc_ci.low, report.auc);
    report.auc_ci.high = std::max(report.auc_ci.high, report.auc);
  } else {
    report.auc_ci = {report.auc, report.auc};
  }

  if (threshold) {
    report.threshold_used = *threshold;
    report.threshold_rule = "given";
  } else if (pred_default) {
    report.threshold_used = 0.5;
    report.threshold_rule = "pred_default";
  } else {
    report.threshold_used = youden_threshold(records);
    report.threshold_rule = "youden";
  }

  for (const auto& r : records) {
    const int predicted = r.score > report.threshold_used ? kSameLabel : kDifferentLabel;
    ++report.confusion[static_cast<std::size_t>(r.label)][static_cast<std::size_t>(predicted)];
  }
  const std::size_t tn = report.confusion[0][0];
  const std::size_t fp = report.confusion[0][1];
  const std::size_t fn = report.confusion[1][0];
  const std::size_t tp = report.confusion[1][1];
  report.accuracy = ratio(tp + tn, report.n_pairs);
  report.precision = ratio(tp, tp + fp);
  report.recall = ratio(tp, tp + fn);
  const double pr = report.precision + report.recall;
  report.f1 = pr == 0.0 ? 0.0 : 2.0 * report.precision * report.recall / pr;
  return report;
}

EvalReport evaluate(const PairSet& pairs, const EmbeddingDataset& dataset,
                    const SimilaritySpec& spec, std::optional<double> threshold,
                    const BootstrapOptions& bootstrap) {
  const auto records = score_pairs(pairs, dataset, spec);
  return summarize(records, spec.description(), threshold, spec.metric() == Metric::kPred,
                   bootstrap);
}

nlohmann::json to_json(const EvalReport& r) {
  return {
      {"metric", r.metric},
      {"auc", r.auc},
      {"auc_ci", {r.auc_ci.low, r.auc_ci.high}},
      {"accuracy", r.accuracy},
      {"f1", r.f1},
      {"precision", r.precision},
      {"recall", r.recall},
      {"confusion", {{r.confusion[0][0], r.confusion[0][1]}, {r.confusion[1][0], r.confusion[1][1]}}},
      {"confusion_layout", "rows=truth [different, same], cols=prediction [different, same]"},
      {"n_pairs", r.n_pairs},
      {"threshold_used", r.threshold_used},
      {"threshold_rule", r.threshold_rule},
  };
}

std::vector<CrossDatasetEntry> cross_dataset_matrix(std::span<const NamedDataset> datasets,
                                                    std::span<const NamedHead> heads,
                                                    Metric metric, std::uint64_t seed,
                                                    const BootstrapOptions& bootstrap) {
  std::vector<CrossDatasetEntry> table;
  for (const auto& head : heads) {
    const SimilaritySpec spec =
        metric == Metric::kPred ? SimilaritySpec::pred(head.head) : SimilaritySpec(metric);
    for (const auto& named : datasets) {
      const auto& dataset = *named.dataset;
      const auto pairs = sample_eval_pairs(dataset.split(Split::kTest), seed);
      table.push_back({head.name, named.name, evaluate(pairs, dataset, spec, std::nullopt, bootstrap)});
    }
  }
  return table;
}

std::string cross_dataset_csv(std::span<const CrossDatasetEntry> entries) {
  using detail::format_number;
  std::string out = "train,test,metric,auc,auc_lo,auc_hi,accuracy,f1,precision,recall,threshold\n";
  for (const auto& e : entries) {
    const auto& r = e.report;
    out += e.train + "," + e.test + "," + r.metric + "," + format_number(r.auc) + "," +
           format_number(r.auc_ci.low) + "," + format_number(r.auc_ci.high) + "," +
           format_number(r.accuracy) + "," + format_number(r.f1) + "," +
           format_number(r.precision) + "," + format_number(r.recall) + "," +
           format_number(r.threshold_used) + "\n";
  }
  return out;
}

}  // namespace reid
