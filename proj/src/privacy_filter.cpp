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

#include "reid/privacy_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "kernels.hpp"
#include "text_format.hpp"
#include "reid/error.hpp"

namespace reid {
namespace {

constexpr std::string_view kPmaxMetaPrefix = "# reid-pmax ";

struct Reference {
  std::vector<FeatureVector> frames;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> rank;
};

Reference build_reference(const SplitView& train, Aggregation aggregation) {
  Reference ref;
  ref.offsets.push_back(0);
  for (std::size_t v = 0; v < train.size(); ++v) {
    const auto& video = train[v];
    const std::size_t n = aggregation == Aggregation::kFirstVsFirst ? 1 : video.num_frames();
    for (std::size_t t = 0; t < n; ++t) ref.frames.push_back(video.frame(t));
    ref.offsets.push_back(ref.frames.size());
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return train[a].video_id < train[b].video_id; });
  ref.rank.resize(train.size());
  for (std::size_t k = 0; k < order.size(); ++k) ref.rank[order[k]] = k;
  return ref;
}

void check_inputs(std::size_t query_dim, const SplitView& train, const SimilaritySpec& spec) {
  if (train.empty()) throw AuditError(ErrorCode::kEmptyReference, "reference split is empty");
  if (query_dim != train.dimension()) {
    throw AuditError(ErrorCode::kDimensionMismatch,
                     "query dimension " + std::to_string(query_dim) +
                         " differs from reference dimension " + std::to_string(train.dimension()));
  }
  spec.check_dimension(train.dimension());
}

detail::SegmentArgmax run_pmax(std::span<const FeatureVector> queries, const SplitView& train,
                               const SimilaritySpec& spec, Aggregation aggregation, int workers) {
  const Reference ref = build_reference(train, aggregation);
  const detail::ScoringKernel kernel(spec, ref.frames);
  const auto packed = kernel.pack(queries);
  return detail::segment_argmax(kernel, packed, ref.offsets, ref.rank, workers);
}

}  // namespace

std::string_view aggregation_name(Aggregation aggregation) {
  switch (aggregation) {
    case Aggregation::kFirstVsFirst: return "first_vs_first";
    case Aggregation::kFirstVsAllMean: return "first_vs_all_mean";
  }
  return "unknown";
}

std::optional<Aggregation> parse_aggregation(std::string_view text) {
  if (text == "first_vs_first") return Aggregation::kFirstVsFirst;
  if (text == "first_vs_all_mean") return Aggregation::kFirstVsAllMean;
  return std::nullopt;
}

PmaxResult pmax(const VideoEmbedding& query, const SplitView& train, const SimilaritySpec& spec,
                Aggregation aggregation) {
  check_inputs(query.dimension, train, spec);
  const FeatureVector first = query.first_frame();
  const auto result = run_pmax(std::span(&first, 1), train, spec, aggregation, 1);
  return {result.best[0], train[result.segment[0]].video_id};
}

PmaxTable pmax_all(const SplitView& queries, const SplitView& train, const SimilaritySpec& spec,
                   Aggregation aggregation, int workers) {
  PmaxTable table;
  table.aggregation = aggregation;
  table.reference = train.dataset().provenance;
  table.spec = spec.description();
  if (train.empty()) throw AuditError(ErrorCode::kEmptyReference, "reference split is empty");
  if (queries.empty()) return table;
  check_inputs(queries.dimension(), train, spec);

  std::vector<FeatureVector> firsts;
  firsts.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) firsts.push_back(queries[i].first_frame());
  const auto result = run_pmax(firsts, train, spec, aggregation, workers);

  table.rows.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    table.rows.push_back({queries[i].video_id, result.best[i], train[result.segment[i]].video_id});
  }
  return table;
}

std::size_t nearest_rank(double percentile, std::size_t n) {
  const double exact = percentile * static_cast<double>(n) / 100.0;
  auto rank = static_cast<std::size_t>(std::ceil(exact));
  return std::clamp<std::size_t>(rank, 1, n);
}

PrivacyThreshold calibrate_threshold(const PmaxTable& test_table, double percentile) {
  if (test_table.rows.empty()) {
    throw AuditError(ErrorCode::kEmptyTable, "calibration table has no rows");
  }
  if (!(percentile > 0.0 && percentile < 100.0)) {
    throw AuditError(ErrorCode::kInvalidArgument, "percentile must lie in (0, 100)");
  }
  std::vector<double> values;
  values.reserve(test_table.rows.size());
  for (const auto& row : test_table.rows) values.push_back(row.pmax);
  const std::size_t rank = nearest_rank(percentile, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());

  PrivacyThreshold threshold;
  threshold.value = values[rank - 1];
  threshold.percentile = percentile;
  threshold.calibration_size = values.size();
  threshold.spec = test_table.spec;
  threshold.aggregation = test_table.aggregation;
  return threshold;
}

PrivacyReport apply_filter(const PmaxTable& synthetic_table, const PrivacyThreshold& threshold) {
  if (synthetic_table.spec != threshold.spec ||
      synthetic_table.aggregation != threshold.aggregation) {
    throw AuditError(ErrorCode::kSpecMismatch,
                     "synthetic table uses " + synthetic_table.spec + "/" +
                         std::string(aggregation_name(synthetic_table.aggregation)) +
                         " but the threshold was calibrated with " + threshold.spec + "/" +
                         std::string(aggregation_name(threshold.aggregation)));
  }
  PrivacyReport report;
  report.threshold = threshold;
  report.n_synthetic = synthetic_table.rows.size();
  for (const auto& row : synthetic_table.rows) {
    (row.pmax > threshold.value ? report.flagged_ids : report.retained_ids).push_back(row.query_id);
  }
  report.flagged_fraction =
      report.n_synthetic == 0
          ? 0.0
          : static_cast<double>(report.flagged_ids.size()) / static_cast<double>(report.n_synthetic);
  return report;
}

void write_pmax_csv(const PmaxTable& table, const std::filesystem::path& path) {
  std::string out;
  out += std::string(kPmaxMetaPrefix) + "spec=" + table.spec +
         " aggregation=" + std::string(aggregation_name(table.aggregation)) +
         " reference=" + table.reference + "\n";
  out += "query_id,pmax,argmax_train_id,aggregation\n";
  const std::string agg(aggregation_name(table.aggregation));
  for (const auto& row : table.rows) {
    out += row.query_id + "," + detail::format_number(row.pmax) + "," + row.argmax_train_id + "," + agg +
           "\n";
  }
  detail::write_text_file(path, out);
}

PmaxTable read_pmax_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw AuditError(ErrorCode::kIoFailure, "cannot open " + path.string());
  PmaxTable table;
  std::optional<Aggregation> declared;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.starts_with(kPmaxMetaPrefix)) {
      const std::string meta = line.substr(kPmaxMetaPrefix.size());
      const auto spec_pos = meta.find("spec=");
      const auto agg_pos = meta.find(" aggregation=");
      const auto ref_pos = meta.find(" reference=");
      if (spec_pos == std::string::npos || agg_pos == std::string::npos ||
          ref_pos == std::string::npos) {
        throw AuditError(ErrorCode::kMalformedHeader, path.string() + ": bad metadata line");
      }
      table.spec = meta.substr(spec_pos + 5, agg_pos - spec_pos - 5);
      declared = parse_aggregation(meta.substr(agg_pos + 13, ref_pos - agg_pos - 13));
      table.reference = meta.substr(ref_pos + 11);
      continue;
    }
    if (line.starts_with("#")) continue;
    if (!header_seen) {
      if (line != "query_id,pmax,argmax_train_id,aggregation") {
        throw AuditError(ErrorCode::kMalformedHeader, path.string() + ": unexpected header");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 4) throw AuditError(ErrorCode::kMalformedHeader, where + " expected 4 columns");
    const auto agg = parse_aggregation(fields[3]);
    if (!agg) throw AuditError(ErrorCode::kMalformedHeader, where + " unknown aggregation");
    if (declared && *agg != *declared) {
      throw AuditError(ErrorCode::kSpecMismatch, where + " mixes aggregation modes");
    }
    declared = agg;
    char* end = nullptr;
    const double value = std::strtod(fields[1].c_str(), &end);
    if (end == fields[1].c_str() || *end != '\0' || !std::isfinite(value)) {
      throw AuditError(ErrorCode::kNonFiniteValue, where + " bad pmax value");
    }
    table.rows.push_back({fields[0], value, fields[2]});
  }
  if (!header_seen) throw AuditError(ErrorCode::kMalformedHeader, path.string() + ": no header");
  table.aggregation = declared.value_or(Aggregation::kFirstVsFirst);
  return table;
}

nlohmann::json to_json(const PrivacyThreshold& threshold) {
  return {
      {"value", threshold.value},
      {"percentile", threshold.percentile},
      {"calibration_size", threshold.calibration_size},
      {"spec", threshold.spec},
      {"aggregation", aggregation_name(threshold.aggregation)},
  };
}

PrivacyThreshold threshold_from_json(const nlohmann::json& j) {
  try {
    PrivacyThreshold t;
    const auto& block = j.contains("threshold") ? j.at("threshold") : j;
    t.value = block.at("value").get<double>();
    t.percentile = block.at("percentile").get<double>();
    t.calibration_size = block.at("calibration_size").get<std::size_t>();
    t.spec = block.at("spec").get<std::string>();
    const auto agg = parse_aggregation(block.at("aggregation").get<std::string>());
    if (!agg) throw AuditError(ErrorCode::kMalformedHeader, "unknown aggregation in threshold");
    t.aggregation = *agg;
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw AuditError(ErrorCode::kMalformedHeader, std::string("threshold JSON: ") + e.what());
  }
}

nlohmann::json to_json(const PrivacyReport& report) {
  return {
      {"threshold", to_json(report.threshold)},
      {"n_synthetic", report.n_synthetic},
      {"n_flagged", report.flagged_ids.size()},
      {"n_retained", report.retained_ids.size()},
      {"flagged_fraction", report.flagged_fraction},
      {"flagged_ids", report.flagged_ids},
      {"retained_ids", report.retained_ids},
  };
}

}  // namespace reid
