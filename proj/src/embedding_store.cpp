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

#include "reid/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "reid/error.hpp"

namespace reid {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

bool valid_ef(float ef) { return std::isfinite(ef) && ef >= 0.0f && ef <= 100.0f; }

std::string frame_location(const VideoEmbedding& video, std::size_t t) {
  return "video '" + video.video_id + "' frame " + std::to_string(t);
}

// Throws the error code a loader would raise for the first violated invariant.
void enforce_invariants(const EmbeddingDataset& dataset) {
  if (dataset.dimension == 0 || dataset.dimension > kMaxDimension) {
    throw AuditError(ErrorCode::kMalformedHeader,
                     "dimension " + std::to_string(dataset.dimension) + " outside [1, 4096]");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& video : dataset.videos) {
    if (video.dimension != dataset.dimension || video.values.size() % dataset.dimension != 0) {
      throw AuditError(ErrorCode::kDimensionMismatch,
                       "video '" + video.video_id + "' has dimension " +
                           std::to_string(video.dimension) + ", dataset declares " +
                           std::to_string(dataset.dimension));
    }
    const std::size_t frames = video.num_frames();
    if (frames == 0 || frames > kMaxFramesPerVideo) {
      throw AuditError(ErrorCode::kMalformedHeader,
                       "video '" + video.video_id + "' has " + std::to_string(frames) +
                           " frames, expected 1.." + std::to_string(kMaxFramesPerVideo));
    }
    if (static_cast<unsigned>(video.split) > 2) {
      throw AuditError(ErrorCode::kMalformedHeader,
                       "video '" + video.video_id + "' has an unknown split tag");
    }
    if (video.video_id.empty() || video.video_id.size() > 0xFFFF) {
      throw AuditError(ErrorCode::kInvalidMetadata, "video id length must be in [1, 65535]");
    }
    if (video.ef_value && !valid_ef(*video.ef_value)) {
      throw AuditError(ErrorCode::kInvalidMetadata,
                       "video '" + video.video_id + "' ef_value outside [0, 100]");
    }
    for (std::size_t i = 0; i < video.values.size(); ++i) {
      if (!std::isfinite(video.values[i])) {
        throw AuditError(ErrorCode::kNonFiniteValue,
                         frame_location(video, i / dataset.dimension) + " holds a non-finite value");
      }
    }
    if (!seen.insert(video.video_id).second) {
      throw AuditError(ErrorCode::kDuplicateVideoId, "video id '" + video.video_id + "' repeats");
    }
  }
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kSynthetic: return "synthetic";
  }
  return "unknown";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train" || text == "0") return Split::kTrain;
  if (text == "test" || text == "1") return Split::kTest;
  if (text == "synthetic" || text == "2") return Split::kSynthetic;
  return std::nullopt;
}

VideoEmbedding VideoEmbedding::from_frames(std::string id, Split split,
                                           const std::vector<std::vector<float>>& frames,
                                           std::optional<float> ef_value) {
  VideoEmbedding video;
  video.video_id = std::move(id);
  video.split = split;
  video.ef_value = ef_value;
  video.dimension = frames.empty() ? 0 : frames.front().size();
  for (const auto& f : frames) {
    if (f.size() != video.dimension) {
      throw AuditError(ErrorCode::kDimensionMismatch,
                       "frames of video '" + video.video_id + "' differ in length");
    }
    video.values.insert(video.values.end(), f.begin(), f.end());
  }
  return video;
}

std::vector<std::size_t> EmbeddingDataset::split_index(Split split) const {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].split == split) positions.push_back(i);
  }
  return positions;
}

std::size_t EmbeddingDataset::total_frames() const {
  std::size_t total = 0;
  for (const auto& v : videos) total += v.num_frames();
  return total;
}

std::unordered_map<std::string_view, std::size_t> EmbeddingDataset::id_index() const {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) index.emplace(videos[i].video_id, i);
  return index;
}

SplitView EmbeddingDataset::split(Split which) const { return SplitView(*this, split_index(which)); }

SplitView::SplitView(const EmbeddingDataset& dataset) : dataset_(&dataset) {
  positions_.resize(dataset.videos.size());
  for (std::size_t i = 0; i < positions_.size(); ++i) positions_[i] = i;
}

SplitView::SplitView(const EmbeddingDataset& dataset, std::vector<std::size_t> positions)
    : dataset_(&dataset), positions_(std::move(positions)) {
  for (auto p : positions_) {
    if (p >= dataset.videos.size()) {
      throw AuditError(ErrorCode::kInvalidArgument, "split position out of range");
    }
  }
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidationReport validate(const EmbeddingDataset& dataset) {
  ValidationCheck finite{std::string(kCheckFinite), true, {}};
  ValidationCheck dims{std::string(kCheckDimension), true, {}};
  ValidationCheck ids{std::string(kCheckUniqueIds), true, {}};
  ValidationCheck partition{std::string(kCheckSplitPartition), true, {}};
  ValidationCheck frames{std::string(kCheckFrameCount), true, {}};

  auto fail = [](ValidationCheck& check, const std::string& detail) {
    if (check.passed) check.detail = detail;  // keep the first offender
    check.passed = false;
  };

  if (dataset.dimension == 0 || dataset.dimension > kMaxDimension) {
    fail(dims, "dataset dimension " + std::to_string(dataset.dimension) + " outside [1, 4096]");
  }
  std::unordered_set<std::string_view> seen;
  std::size_t partitioned = 0;
  for (const auto& video : dataset.videos) {
    if (video.dimension != dataset.dimension || video.dimension == 0 ||
        video.values.size() % video.dimension != 0) {
      fail(dims, "video '" + video.video_id + "' has dimension " + std::to_string(video.dimension));
    }
    const std::size_t n = video.num_frames();
    if (n < 1 || n > kMaxFramesPerVideo) {
      fail(frames, "video '" + video.video_id + "' has " + std::to_string(n) + " frames");
    }
    for (std::size_t i = 0; i < video.values.size(); ++i) {
      if (!std::isfinite(video.values[i])) {
        fail(finite, frame_location(video, video.dimension ? i / video.dimension : 0));
        break;
      }
    }
    if (video.ef_value && !valid_ef(*video.ef_value)) {
      fail(finite, "video '" + video.video_id + "' ef_value outside [0, 100]");
    }
    if (!seen.insert(video.video_id).second) {
      fail(ids, "video id '" + video.video_id + "' repeats");
    }
    if (static_cast<unsigned>(video.split) <= 2) ++partitioned;
  }
  if (partitioned != dataset.videos.size()) {
    fail(partition, std::to_string(dataset.videos.size() - partitioned) +
                        " videos carry an unknown split tag");
  }
  return ValidationReport{{finite, dims, ids, partition, frames}};
}

std::vector<std::uint8_t> encode_dataset(const EmbeddingDataset& dataset) {
  enforce_invariants(dataset);
  detail::ByteWriter w;
  w.reserve(20 + dataset.total_frames() * dataset.dimension * sizeof(float) +
            dataset.videos.size() * 32);
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.dimension));
  w.put<std::uint64_t>(dataset.videos.size());
  for (const auto& video : dataset.videos) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(video.video_id.size()));
    w.put_bytes(video.video_id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(video.split));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(video.num_frames()));
    w.put<float>(video.ef_value ? *video.ef_value : std::numeric_limits<float>::quiet_NaN());
    w.put_floats(video.values);
  }
  return w.take();
}

EmbeddingDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  std::string magic;
  std::uint32_t version = 0;
  std::uint32_t dimension = 0;
  std::uint64_t num_videos = 0;
  if (!r.get_bytes(4, magic) || magic != std::string_view(kMagic, 4)) {
    throw AuditError(ErrorCode::kMalformedHeader, "missing EMB1 magic");
  }
  if (!r.get(version) || version != kVersion) {
    throw AuditError(ErrorCode::kMalformedHeader, "unsupported EMB1 version");
  }
  if (!r.get(dimension) || dimension == 0 || dimension > kMaxDimension) {
    throw AuditError(ErrorCode::kMalformedHeader, "dimension outside [1, 4096]");
  }
  if (!r.get(num_videos)) {
    throw AuditError(ErrorCode::kMalformedHeader, "truncated file header");
  }

  EmbeddingDataset dataset;
  dataset.dimension = dimension;
  // A record needs at least 11 header bytes plus one frame.
  const std::size_t min_record = 11 + std::size_t{4} * dimension;
  dataset.videos.reserve(std::min<std::uint64_t>(num_videos, r.remaining() / min_record + 1));
  std::unordered_set<std::string> seen;

  for (std::uint64_t v = 0; v < num_videos; ++v) {
    VideoEmbedding video;
    video.dimension = dimension;
    std::uint16_t id_len = 0;
    std::uint8_t split = 0;
    std::uint32_t num_frames = 0;
    float ef = 0.0f;
    if (!r.get(id_len) || !r.get_bytes(id_len, video.video_id) || !r.get(split) ||
        !r.get(num_frames) || !r.get(ef)) {
      throw AuditError(ErrorCode::kMalformedHeader,
                       "truncated record header for video " + std::to_string(v));
    }
    if (split > 2) {
      throw AuditError(ErrorCode::kMalformedHeader,
                       "video '" + video.video_id + "' has split tag " + std::to_string(split));
    }
    if (num_frames == 0 || num_frames > kMaxFramesPerVideo) {
      throw AuditError(ErrorCode::kMalformedHeader,
                       "video '" + video.video_id + "' declares " + std::to_string(num_frames) +
                           " frames");
    }
    if (video.video_id.empty()) {
      throw AuditError(ErrorCode::kInvalidMetadata, "empty video id");
    }
    video.split = static_cast<Split>(split);
    if (!std::isnan(ef)) {
      if (!valid_ef(ef)) {
        throw AuditError(ErrorCode::kInvalidMetadata,
                         "video '" + video.video_id + "' ef_value outside [0, 100]");
      }
      video.ef_value = ef;
    }
    if (!r.get_floats(std::size_t{num_frames} * dimension, video.values)) {
      throw AuditError(ErrorCode::kDimensionMismatch,
                       "video '" + video.video_id + "' declares " + std::to_string(num_frames) +
                           " frames of dimension " + std::to_string(dimension) +
                           " but the file ends early");
    }
    for (std::size_t i = 0; i < video.values.size(); ++i) {
      if (!std::isfinite(video.values[i])) {
        throw AuditError(ErrorCode::kNonFiniteValue,
                         frame_location(video, i / dimension) + " holds a non-finite value");
      }
    }
    if (!seen.insert(video.video_id).second) {
      throw AuditError(ErrorCode::kDuplicateVideoId, "video id '" + video.video_id + "' repeats");
    }
    dataset.videos.push_back(std::move(video));
  }
  if (!r.at_end()) {
    throw AuditError(ErrorCode::kDimensionMismatch,
                     std::to_string(r.remaining()) + " bytes beyond the declared frames");
  }
  return dataset;
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) {
  auto dataset = decode_dataset(detail::read_file(path));
  dataset.provenance = path.string();
  return dataset;
}

void write_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, encode_dataset(dataset));
}

EmbeddingDataset import_csv_manifest(const std::filesystem::path& manifest,
                                     std::optional<std::size_t> dimension) {
  std::ifstream in(manifest);
  if (!in) throw AuditError(ErrorCode::kIoFailure, "cannot open " + manifest.string());
  const auto base = manifest.parent_path();

  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) !=
          std::vector<std::string>{"video_id", "split", "ef_value", "feature_file", "num_frames"}) {
    throw AuditError(ErrorCode::kMalformedHeader,
                     "manifest header must be video_id,split,ef_value,feature_file,num_frames");
  }

  EmbeddingDataset dataset;
  dataset.provenance = manifest.string();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (fields.size() != 5) {
      throw AuditError(ErrorCode::kMalformedHeader, where + " expected 5 columns");
    }
    VideoEmbedding video;
    video.video_id = fields[0];
    const auto split = parse_split(fields[1]);
    if (!split) throw AuditError(ErrorCode::kInvalidMetadata, where + " unknown split");
    video.split = *split;
    if (!fields[2].empty() && fields[2] != "nan" && fields[2] != "NaN") {
      try {
        video.ef_value = std::stof(fields[2]);
      } catch (const std::exception&) {
        throw AuditError(ErrorCode::kInvalidMetadata, where + " unparseable ef_value");
      }
    }
    std::size_t num_frames = 0;
    try {
      num_frames = std::stoul(fields[4]);
    } catch (const std::exception&) {
      throw AuditError(ErrorCode::kMalformedHeader, where + " unparseable num_frames");
    }
    if (num_frames == 0) throw AuditError(ErrorCode::kMalformedHeader, where + " zero frames");

    std::filesystem::path feature_path = fields[3];
    if (feature_path.is_relative()) feature_path = base / feature_path;
    const auto raw = detail::read_file(feature_path);
    if (raw.size() % (num_frames * sizeof(float)) != 0) {
      throw AuditError(ErrorCode::kDimensionMismatch,
                       feature_path.string() + " size is not num_frames x D float32 values");
    }
    const std::size_t file_dim = raw.size() / (num_frames * sizeof(float));
    if (!dimension) dimension = file_dim;
    if (file_dim != *dimension) {
      throw AuditError(ErrorCode::kDimensionMismatch,
                       feature_path.string() + " has dimension " + std::to_string(file_dim) +
                           ", expected " + std::to_string(*dimension));
    }
    video.dimension = file_dim;
    video.values.resize(raw.size() / sizeof(float));
    std::memcpy(video.values.data(), raw.data(), raw.size());
    dataset.videos.push_back(std::move(video));
  }
  dataset.dimension = dimension.value_or(1);
  enforce_invariants(dataset);
  return dataset;
}

}  // namespace reid
