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

#include "reid/consistency.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <random>

#include "reid/error.hpp"
#include "reid/seeding.hpp"
#include "text_format.hpp"

namespace reid {
namespace {

constexpr std::uint64_t kPartnerStream = 0xC0;

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

std::vector<std::size_t> kept_videos(const SplitView& videos, std::size_t min_frames,
                                     const SimilaritySpec& spec) {
  spec.check_dimension(videos.dimension());
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].num_frames() >= min_frames) kept.push_back(i);
  }
  return kept;
}

std::vector<FeatureVector> frames_of(const VideoEmbedding& v, std::size_t limit) {
  std::vector<FeatureVector> out;
  const std::size_t n = std::min(limit, v.num_frames());
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back(v.frame(t));
  return out;
}

// Runs body(i) for i < n in parallel; the first exception is rethrown.
template <typename Body>
void parallel_rows(std::size_t n, int workers, Body body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(reid_consistency_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

CurveMatrix curves_against(const SplitView& videos, const SimilaritySpec& spec,
                           const std::vector<std::size_t>& rows,
                           const std::vector<std::size_t>& partners, std::size_t max_offset,
                           int workers) {
  CurveMatrix m;
  m.max_offset = max_offset;
  m.scores.assign(rows.size() * max_offset, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    m.video_ids.push_back(videos[rows[r]].video_id);
    m.partner_ids.push_back(videos[partners[r]].video_id);
  }
  parallel_rows(rows.size(), workers, [&](std::size_t r) {
    const FeatureVector anchor = videos[rows[r]].first_frame();
    const auto frames = frames_of(videos[partners[r]], max_offset);
    const Matrix s = score_block(spec, std::span(&anchor, 1), frames, 1);
    for (std::size_t t = 0; t < frames.size(); ++t) m.scores[r * max_offset + t] = s(0, t);
  });
  return m;
}

void check_offset(std::size_t max_offset) {
  if (max_offset == 0) throw AuditError(ErrorCode::kInvalidArgument, "max_offset must be >= 1");
}

}  // namespace

std::string_view consistency_mode_name(ConsistencyMode mode) {
  return mode == ConsistencyMode::kAllPairs ? "all_pairs" : "first_vs_all";
}

std::optional<ConsistencyMode> parse_consistency_mode(std::string_view text) {
  if (text == "all_pairs") return ConsistencyMode::kAllPairs;
  if (text == "first_vs_all") return ConsistencyMode::kFirstVsAll;
  return std::nullopt;
}

ConsistencyReport mcc(const SplitView& videos, const SimilaritySpec& spec, std::size_t min_frames,
                      ConsistencyMode mode, int workers) {
  if (min_frames < 2) {
    throw AuditError(ErrorCode::kInvalidArgument, "min_frames must be at least 2");
  }
  const auto kept = kept_videos(videos, min_frames, spec);
  if (kept.empty()) {
    throw AuditError(ErrorCode::kAllVideosFiltered,
                     "no video has at least " + std::to_string(min_frames) + " frames");
  }
  ConsistencyReport report;
  report.spec = spec.description();
  report.min_frames = min_frames;
  report.mode = mode;
  report.n_filtered = videos.size() - kept.size();
  report.per_video.resize(kept.size());

  parallel_rows(kept.size(), workers, [&](std::size_t k) {
    const auto& video = videos[kept[k]];
    const auto frames = frames_of(video, video.num_frames());
    std::vector<double> pairs;
    if (mode == ConsistencyMode::kAllPairs) {
      const Matrix s = score_block(spec, frames, frames, 1);
      pairs.reserve(frames.size() * (frames.size() - 1));
      for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t j = 0; j < frames.size(); ++j) {
          if (i != j) pairs.push_back(s(i, j));
        }
      }
    } else {
      const Matrix s = score_block(spec, std::span(frames.data(), 1), frames, 1);
      for (std::size_t t = 1; t < frames.size(); ++t) pairs.push_back(s(0, t));
    }
    const auto ms = mean_std(pairs);
    report.per_video[k] = {video.video_id, ms.mean, ms.std, video.num_frames()};
  });

  std::vector<double> means;
  for (const auto& v : report.per_video) means.push_back(v.mean_score);
  const auto agg = mean_std(means);
  report.aggregate_mean = agg.mean;
  report.aggregate_std = agg.std;
  return report;
}

CurveMatrix first_frame_curves(const SplitView& videos, const SimilaritySpec& spec,
                               std::size_t min_frames, std::size_t max_offset, int workers) {
  check_offset(max_offset);
  const auto kept = kept_videos(videos, min_frames, spec);
  if (kept.empty()) {
    throw AuditError(ErrorCode::kAllVideosFiltered,
                     "no video has at least " + std::to_string(min_frames) + " frames");
  }
  return curves_against(videos, spec, kept, kept, max_offset, workers);
}

CurveMatrix cross_video_baseline(const SplitView& videos, const SimilaritySpec& spec,
                                 std::uint64_t seed, std::size_t min_frames,
                                 std::size_t max_offset, int workers) {
  check_offset(max_offset);
  const auto kept = kept_videos(videos, min_frames, spec);
  if (kept.size() < 2) {
    throw AuditError(ErrorCode::kInsufficientVideos,
                     "cross-video baseline needs 2 videos with at least " +
                         std::to_string(min_frames) + " frames, found " +
                         std::to_string(kept.size()));
  }
  std::vector<std::size_t> partners(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    std::mt19937_64 rng(derive_seed(seed, kPartnerStream, k));
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, kept.size() - 2)(rng);
    partners[k] = kept[j < k ? j : j + 1];
  }
  return curves_against(videos, spec, kept, partners, max_offset, workers);
}

std::size_t CurveMatrix::column_count(std::size_t offset) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < video_ids.size(); ++r) n += std::isnan(at(r, offset)) ? 0 : 1;
  return n;
}

double CurveMatrix::column_mean(std::size_t offset) const {
  std::vector<double> xs;
  for (std::size_t r = 0; r < video_ids.size(); ++r) {
    if (!std::isnan(at(r, offset))) xs.push_back(at(r, offset));
  }
  return xs.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_std(xs).mean;
}

double CurveMatrix::column_std(std::size_t offset) const {
  std::vector<double> xs;
  for (std::size_t r = 0; r < video_ids.size(); ++r) {
    if (!std::isnan(at(r, offset))) xs.push_back(at(r, offset));
  }
  return xs.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_std(xs).std;
}

nlohmann::json to_json(const ConsistencyReport& r) {
  nlohmann::json per_video = nlohmann::json::array();
  for (const auto& v : r.per_video) {
    per_video.push_back({{"video_id", v.video_id},
                         {"mean_score", v.mean_score},
                         {"std_score", v.std_score},
                         {"n_frames", v.n_frames}});
  }
  return {{"spec", r.spec},
          {"mode", consistency_mode_name(r.mode)},
          {"min_frames", r.min_frames},
          {"n_videos", r.per_video.size()},
          {"n_filtered", r.n_filtered},
          {"aggregate_mean", r.aggregate_mean},
          {"aggregate_std", r.aggregate_std},
          {"per_video", per_video}};
}

nlohmann::json curve_summary_json(const CurveMatrix& curves) {
  nlohmann::json mean = nlohmann::json::array();
  nlohmann::json std = nlohmann::json::array();
  nlohmann::json count = nlohmann::json::array();
  for (std::size_t t = 1; t <= curves.max_offset; ++t) {
    const std::size_t n = curves.column_count(t);
    count.push_back(n);
    // JSON has no NaN; empty columns are null.
    mean.push_back(n == 0 ? nlohmann::json() : nlohmann::json(curves.column_mean(t)));
    std.push_back(n == 0 ? nlohmann::json() : nlohmann::json(curves.column_std(t)));
  }
  return {{"max_offset", curves.max_offset},
          {"n_videos", curves.video_ids.size()},
          {"mean", mean},
          {"std", std},
          {"count", count}};
}

std::string curves_csv(const CurveMatrix& curves) {
  std::string out = "video_id,offset,score\n";
  for (std::size_t r = 0; r < curves.video_ids.size(); ++r) {
    for (std::size_t t = 1; t <= curves.max_offset; ++t) {
      const double s = curves.at(r, t);
      if (std::isnan(s)) continue;
      out += curves.video_ids[r] + "," + std::to_string(t) + "," + detail::format_number(s) + "\n";
    }
  }
  return out;
}

}  // namespace reid
