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

#include "reid/recall_analyzer.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <unordered_map>

#include "binary_io.hpp"
#include "reid/error.hpp"
#include "text_format.hpp"

namespace reid {
namespace {

constexpr std::size_t kTopFrequencies = 20;

double fraction(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<FeatureVector> first_frames(const SplitView& view) {
  std::vector<FeatureVector> out;
  out.reserve(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) out.push_back(view[i].first_frame());
  return out;
}

}  // namespace

RecallReport analyze_recall(const PmaxTable& table, const PrivacyThreshold& threshold,
                            std::size_t n_train) {
  if (table.spec != threshold.spec || table.aggregation != threshold.aggregation) {
    throw AuditError(ErrorCode::kSpecMismatch,
                     "synthetic table (" + table.spec + ", " +
                         std::string(aggregation_name(table.aggregation)) +
                         ") differs from threshold (" + threshold.spec + ", " +
                         std::string(aggregation_name(threshold.aggregation)) + ")");
  }
  RecallReport r;
  r.spec = table.spec;
  r.threshold_value = threshold.value;
  r.n_train = n_train;
  r.n_synthetic = table.rows.size();

  // Per train id: number of attributing rows that are not memorized.
  std::map<std::string, std::size_t> clean;
  for (const auto& row : table.rows) {
    ++r.frequency[row.argmax_train_id];
    const bool memorized = row.pmax > threshold.value;
    if (memorized) ++r.memorized_count;
    clean[row.argmax_train_id] += memorized ? 0 : 1;
  }
  if (r.frequency.size() > n_train) {
    throw AuditError(ErrorCode::kInvalidArgument,
                     std::to_string(r.frequency.size()) + " attributed train ids exceed n_train " +
                         std::to_string(n_train));
  }
  for (const auto& [id, count] : r.frequency) {
    r.learned_ids.push_back(id);
    if (clean[id] == 0) r.learned_but_memorized_ids.push_back(id);
    if (count > r.max_frequency) {
      r.max_frequency = count;
      r.max_frequency_id = id;
    }
  }
  r.learned_count = r.learned_ids.size();
  r.learned_fraction = fraction(r.learned_count, n_train);
  r.memorized_fraction = fraction(r.memorized_count, r.n_synthetic);
  r.learned_but_memorized_count = r.learned_but_memorized_ids.size();
  return r;
}

std::string_view coverage_mode_name(CoverageMode mode) {
  return mode == CoverageMode::kArgmaxMembership ? "argmax_membership" : "nearest_is_train";
}

std::optional<CoverageMode> parse_coverage_mode(std::string_view text) {
  if (text == "argmax_membership") return CoverageMode::kArgmaxMembership;
  if (text == "nearest_is_train") return CoverageMode::kNearestIsTrain;
  return std::nullopt;
}

double baseline_coverage(const SplitView& test, const SplitView& train, const SimilaritySpec& spec,
                         CoverageMode mode, int workers) {
  if (test.empty() || train.empty()) {
    throw AuditError(ErrorCode::kEmptyReference, "coverage needs non-empty test and train splits");
  }
  const auto table = pmax_all(test, train, spec, Aggregation::kFirstVsFirst, workers);
  if (mode == CoverageMode::kArgmaxMembership) {
    std::set<std::string_view> hit;
    for (const auto& row : table.rows) hit.insert(row.argmax_train_id);
    return fraction(hit.size(), train.size());
  }

  const auto firsts = first_frames(test);
  const Matrix among = score_block(spec, firsts, firsts, workers);
  std::size_t nearest_train = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < test.size(); ++j) {
      if (j != i) best_other = std::max(best_other, among(i, j));
    }
    if (table.rows[i].pmax >= best_other) ++nearest_train;
  }
  return fraction(nearest_train, test.size());
}

std::vector<std::string> select_recall_subsets(const RecallReport& report,
                                               const PmaxTable& table, std::size_t k) {
  if (k == 0) throw AuditError(ErrorCode::kInvalidArgument, "k must be at least 1");
  std::map<std::string_view, std::vector<const PmaxRow*>> eligible;
  for (const auto& row : table.rows) {
    if (row.pmax > report.threshold_value) continue;
    eligible[row.argmax_train_id].push_back(&row);
  }
  std::vector<std::string> out;
  for (auto& [train_id, rows] : eligible) {
    std::sort(rows.begin(), rows.end(), [](const PmaxRow* a, const PmaxRow* b) {
      if (a->pmax != b->pmax) return a->pmax > b->pmax;
      return a->query_id < b->query_id;
    });
    const std::size_t take = std::min(k, rows.size());
    for (std::size_t i = 0; i < take; ++i) out.push_back(rows[i]->query_id);
  }
  return out;
}

void export_projection_table(const SplitView& train, const SplitView& synthetic,
                             const RecallReport& report, const std::filesystem::path& path) {
  const std::size_t dim = train.empty() ? synthetic.dimension() : train.dimension();
  std::string out = "id,role";
  for (std::size_t d = 0; d < dim; ++d) out += ",f" + std::to_string(d);
  out += '\n';
  auto emit = [&](const VideoEmbedding& v, std::string_view role) {
    out += v.video_id;
    out += ',';
    out += role;
    for (float x : v.first_frame()) {
      out += ',';
      out += detail::format_number(x);
    }
    out += '\n';
  };
  for (std::size_t i = 0; i < train.size(); ++i) {
    const bool learned = std::binary_search(report.learned_ids.begin(), report.learned_ids.end(),
                                            train[i].video_id);
    emit(train[i], learned ? "train_learned" : "train_unlearned");
  }
  for (std::size_t i = 0; i < synthetic.size(); ++i) emit(synthetic[i], "synthetic");
  detail::write_text_file(path, out);
}

nlohmann::json to_json(const RecallReport& r) {
  std::vector<std::pair<std::string, std::size_t>> top(r.frequency.begin(), r.frequency.end());
  std::stable_sort(top.begin(), top.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (top.size() > kTopFrequencies) top.resize(kTopFrequencies);
  nlohmann::json top_json = nlohmann::json::array();
  for (const auto& [id, count] : top) top_json.push_back({{"train_id", id}, {"count", count}});
  return {
      {"spec", r.spec},
      {"threshold", r.threshold_value},
      {"n_train", r.n_train},
      {"n_synthetic", r.n_synthetic},
      {"learned_count", r.learned_count},
      {"learned_fraction", r.learned_fraction},
      {"memorized_count", r.memorized_count},
      {"memorized_fraction", r.memorized_fraction},
      {"learned_but_memorized_count", r.learned_but_memorized_count},
      {"learned_but_memorized_ids", r.learned_but_memorized_ids},
      {"max_frequency_id", r.max_frequency_id},
      {"max_frequency", r.max_frequency},
      {"top_frequencies", top_json},
  };
}

std::string frequency_csv(const RecallReport& r) {
  std::string out = "train_id,count\n";
  for (const auto& [id, count] : r.frequency) out += id + "," + std::to_string(count) + "\n";
  return out;
}

}  // namespace reid
