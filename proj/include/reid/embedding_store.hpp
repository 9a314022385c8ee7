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

// Embedding datasets: per-video frame-feature matrices with split labels, the
// EMB1 binary format, and a CSV-manifest import path.

#ifndef REID_EMBEDDING_STORE_HPP_
#define REID_EMBEDDING_STORE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reid {

inline constexpr std::size_t kMaxDimension = 4096;
inline constexpr std::size_t kMaxFramesPerVideo = std::size_t{1} << 16;

enum class Split : std::uint8_t { kTrain = 0, kTest = 1, kSynthetic = 2 };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view text);

// One frame's feature vector. Always a view into a VideoEmbedding.
using FeatureVector = std::span<const float>;

struct VideoEmbedding {
  std::string video_id;
  Split split = Split::kTrain;
  std::size_t dimension = 0;
  // num_frames x dimension, row-major, frame order as ingested.
  std::vector<float> values;
  // Ejection fraction in percent.
  std::optional<float> ef_value;

  std::size_t num_frames() const {
    return dimension == 0 ? 0 : values.size() / dimension;
  }
  FeatureVector frame(std::size_t t) const {
    return FeatureVector(values).subspan(t * dimension, dimension);
  }
  FeatureVector first_frame() const { return frame(0); }

  static VideoEmbedding from_frames(std::string id, Split split,
                                    const std::vector<std::vector<float>>& frames,
                                    std::optional<float> ef_value = std::nullopt);

  bool operator==(const VideoEmbedding&) const = default;
};

class SplitView;

struct EmbeddingDataset {
  std::size_t dimension = 0;
  std::vector<VideoEmbedding> videos;
  // Runtime source label; not persisted in EMB1.
  std::string provenance;

  std::vector<std::size_t> split_index(Split split) const;
  std::size_t total_frames() const;
  std::unordered_map<std::string_view, std::size_t> id_index() const;

  SplitView split(Split split) const;

  // Equality over persisted content (dimension and videos).
  bool operator==(const EmbeddingDataset& other) const {
    return dimension == other.dimension && videos == other.videos;
  }
};

// Ordered subset of a dataset's videos. Cheap to copy; the dataset must
// outlive the view. Implicitly covers every video of a dataset.
class SplitView {
 public:
  SplitView(const EmbeddingDataset& dataset);  // NOLINT(google-explicit-constructor)
  SplitView(const EmbeddingDataset& dataset, std::vector<std::size_t> positions);

  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }
  std::size_t dimension() const { return dataset_->dimension; }
  const VideoEmbedding& operator[](std::size_t i) const {
    return dataset_->videos[positions_[i]];
  }
  const EmbeddingDataset& dataset() const { return *dataset_; }
  std::span<const std::size_t> positions() const { return positions_; }

 private:
  const EmbeddingDataset* dataset_;
  std::vector<std::size_t> positions_;
};

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const;
  const ValidationCheck* find(std::string_view name) const;
};

// Check names used in ValidationReport.
inline constexpr std::string_view kCheckFinite = "finiteness";
inline constexpr std::string_view kCheckDimension = "dimension_uniformity";
inline constexpr std::string_view kCheckUniqueIds = "id_uniqueness";
inline constexpr std::string_view kCheckSplitPartition = "split_partition";
inline constexpr std::string_view kCheckFrameCount = "frame_count";

ValidationReport validate(const EmbeddingDataset& dataset);

// EMB1 encoding. Throws MalformedHeader, DimensionMismatch, NonFiniteValue,
// DuplicateVideoId or InvalidMetadata on bad input.
std::vector<std::uint8_t> encode_dataset(const EmbeddingDataset& dataset);
EmbeddingDataset decode_dataset(std::span<const std::uint8_t> bytes);

EmbeddingDataset load_dataset(const std::filesystem::path& path);
void write_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path);

// Reads a `video_id,split,ef_value,feature_file,num_frames` manifest. Each
// feature_file (relative paths resolve against the manifest's directory) holds
// raw little-endian float32 of shape (num_frames, D). D is inferred from the
// first file unless given.
EmbeddingDataset import_csv_manifest(const std::filesystem::path& manifest,
                                     std::optional<std::size_t> dimension = std::nullopt);

}  // namespace reid

#endif  // REID_EMBEDDING_STORE_HPP_
