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

#include "reid/audit.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <map>

#include "binary_io.hpp"
#include "reid/embedding_store.hpp"
#include "reid/error.hpp"
#include "reid/pair_eval.hpp"
#include "reid/recall_analyzer.hpp"
#include "reid/seeding.hpp"

#ifndef REID_AUDIT_VERSION
#define REID_AUDIT_VERSION "0.0.0"
#endif

namespace reid {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kEvalPairStream = 1;
constexpr std::uint64_t kBootstrapSeedStream = 2;
constexpr std::uint64_t kBaselineStream = 3;
constexpr std::string_view kStagingName = ".reid-audit-staging";

[[noreturn]] void config_error(const std::string& msg) {
  throw AuditError(ErrorCode::kInvalidConfig, msg);
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) config_error(std::string(what) + " path is not set");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    config_error(std::string(what) + " file not found: " + path.string());
  }
}

std::string read_text(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

// Loads each distinct path once.
class DatasetCache {
 public:
  const EmbeddingDataset& get(const fs::path& path) {
    const std::string key = fs::weakly_canonical(path).string();
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, load_dataset(path)).first;
    return it->second;
  }

 private:
  std::map<std::string, EmbeddingDataset> cache_;
};

// Staging directory inside out_dir; artifacts are moved out by commit().
class Bundle {
 public:
  explicit Bundle(const fs::path& out_dir) : out_dir_(out_dir) {
    std::error_code ec;
    created_out_dir_ = !fs::exists(out_dir_, ec);
    fs::create_directories(out_dir_, ec);
    if (ec) {
      throw AuditError(ErrorCode::kIoFailure,
                       "cannot create output directory " + out_dir_.string() + ": " + ec.message());
    }
    staging_ = out_dir_ / kStagingName;
    fs::remove_all(staging_, ec);
    fs::create_directories(staging_, ec);
    if (ec) {
      throw AuditError(ErrorCode::kIoFailure, "cannot create " + staging_.string());
    }
  }

  ~Bundle() {
    std::error_code ec;
    fs::remove_all(staging_, ec);
    if (!committed_ && created_out_dir_ && fs::is_empty(out_dir_, ec)) fs::remove(out_dir_, ec);
  }

  Bundle(const Bundle&) = delete;
  Bundle& operator=(const Bundle&) = delete;

  fs::path path(const std::string& name) const { return staging_ / name; }

  void write(const std::string& name, const std::string& text) {
    detail::write_text_file(path(name), text);
    names_.push_back(name);
  }
  void adopt(const std::string& name) { names_.push_back(name); }

  const std::vector<std::string>& names() const { return names_; }

  std::vector<fs::path> commit() {
    std::vector<fs::path> out;
    for (const auto& name : names_) {
      std::error_code ec;
      fs::rename(staging_ / name, out_dir_ / name, ec);
      if (ec) {
        throw AuditError(ErrorCode::kIoFailure,
                         "cannot move " + name + " into " + out_dir_.string() + ": " + ec.message());
      }
      out.push_back(out_dir_ / name);
    }
    committed_ = true;
    return out;
  }

 private:
  fs::path out_dir_;
  fs::path staging_;
  bool created_out_dir_ = false;
  bool committed_ = false;
  std::vector<std::string> names_;
};

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string_view tool_version() { return REID_AUDIT_VERSION; }

void AuditConfig::check() const {
  require_file(train_path, "train");
  require_file(test_path, "test");
  require_file(synthetic_path, "synthetic");
  if (metric == Metric::kPred) {
    if (!head_path) config_error("metric Pred requires a head file");
    require_file(*head_path, "head");
  }
  if (!(percentile > 0.0 && percentile < 100.0)) {
    config_error("percentile must lie in (0, 100)");
  }
  if (bootstrap_resamples != 0 && bootstrap_resamples < 100) {
    config_error("bootstrap_resamples must be 0 (disabled) or at least 100");
  }
  if (min_frames < 2) config_error("min_frames must be at least 2");
  if (max_offset == 0) config_error("max_offset must be at least 1");
  if (out_dir.empty()) config_error("output directory is not set");
}

nlohmann::json to_json(const AuditConfig& c) {
  return {
      {"train", c.train_path.string()},
      {"test", c.test_path.string()},
      {"synthetic", c.synthetic_path.string()},
      {"metric", metric_name(c.metric)},
      {"head", c.head_path ? nlohmann::json(c.head_path->string()) : nlohmann::json()},
      {"percentile", c.percentile},
      {"aggregation", aggregation_name(c.aggregation)},
      {"seed", c.seed},
      {"bootstrap_resamples", c.bootstrap_resamples},
      {"min_frames", c.min_frames},
      {"max_offset", c.max_offset},
      {"consistency_mode", consistency_mode_name(c.consistency_mode)},
      {"out_dir", c.out_dir.string()},
  };
}

AuditConfig audit_config_from_json(const nlohmann::json& j) {
  AuditConfig c;
  try {
    if (!j.is_object()) config_error("audit config must be a JSON object");
    auto path_of = [&](const char* key) {
      return fs::path(j.contains(key) ? j.at(key).get<std::string>() : std::string());
    };
    c.train_path = path_of("train");
    c.test_path = path_of("test");
    c.synthetic_path = path_of("synthetic");
    c.out_dir = path_of("out_dir");
    if (j.contains("metric")) {
      const auto m = parse_metric(j.at("metric").get<std::string>());
      if (!m) config_error("unknown metric " + j.at("metric").dump());
      c.metric = *m;
    }
    if (j.contains("head") && !j.at("head").is_null()) c.head_path = path_of("head");
    if (j.contains("aggregation")) {
      const auto a = parse_aggregation(j.at("aggregation").get<std::string>());
      if (!a) config_error("unknown aggregation " + j.at("aggregation").dump());
      c.aggregation = *a;
    }
    if (j.contains("consistency_mode")) {
      const auto m = parse_consistency_mode(j.at("consistency_mode").get<std::string>());
      if (!m) config_error("unknown consistency_mode " + j.at("consistency_mode").dump());
      c.consistency_mode = *m;
    }
    c.percentile = j.value("percentile", c.percentile);
    c.seed = j.value("seed", c.seed);
    c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
    c.min_frames = j.value("min_frames", c.min_frames);
    c.max_offset = j.value("max_offset", c.max_offset);
    c.workers = j.value("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("audit config: ") + e.what());
  }
  return c;
}

const std::vector<std::string>& audit_artifact_names() {
  static const std::vector<std::string> names{
      "eval_report.json",    "pmax_test.csv",           "pmax_synthetic.csv",
      "privacy_report.json", "recall_report.json",      "frequency.csv",
      "consistency_report.json", "curves.csv",          "projection.csv",
      "manifest.json"};
  return names;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw AuditError(ErrorCode::kIoFailure, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH"); fixed != nullptr && *fixed != '\0') {
    t = static_cast<std::time_t>(std::strtoll(fixed, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AuditResult run_audit(const AuditConfig& config) {
  config.check();
  const int workers = config.workers;

  DatasetCache cache;
  const auto& train_ds = cache.get(config.train_path);
  const auto& test_ds = cache.get(config.test_path);
  const auto& syn_ds = cache.get(config.synthetic_path);
  if (test_ds.dimension != train_ds.dimension || syn_ds.dimension != train_ds.dimension) {
    throw AuditError(ErrorCode::kDimensionMismatch,
                     "input files disagree on dimension (train " +
                         std::to_string(train_ds.dimension) + ", test " +
                         std::to_string(test_ds.dimension) + ", synthetic " +
                         std::to_string(syn_ds.dimension) + ")");
  }
  const auto train = train_ds.split(Split::kTrain);
  const auto test = test_ds.split(Split::kTest);
  const auto synthetic = syn_ds.split(Split::kSynthetic);

  SimilaritySpec spec(config.metric);
  if (config.metric == Metric::kPred) spec = SimilaritySpec::pred(load_head(*config.head_path));
  spec.check_dimension(train_ds.dimension);

  const std::uint64_t pair_seed = derive_seed(config.seed, kEvalPairStream, 0);
  const std::uint64_t bootstrap_seed = derive_seed(config.seed, kBootstrapSeedStream, 0);
  const std::uint64_t baseline_seed = derive_seed(config.seed, kBaselineStream, 0);

  // Every stage runs before anything is written.
  const auto pairs = sample_eval_pairs(test, pair_seed);
  const auto eval = evaluate(pairs, test_ds, spec, std::nullopt,
                             {config.bootstrap_resamples, bootstrap_seed, workers});

  const auto pmax_test = pmax_all(test, train, spec, config.aggregation, workers);
  const auto pmax_syn = pmax_all(synthetic, train, spec, config.aggregation, workers);
  const auto threshold = calibrate_threshold(pmax_test, config.percentile);
  const auto privacy = apply_filter(pmax_syn, threshold);

  const auto recall = analyze_recall(pmax_syn, threshold, train.size());
  auto recall_json = to_json(recall);
  recall_json["baseline_coverage"] = {
      {"argmax_membership",
       baseline_coverage(test, train, spec, CoverageMode::kArgmaxMembership, workers)},
      {"nearest_is_train",
       baseline_coverage(test, train, spec, CoverageMode::kNearestIsTrain, workers)}};
  recall_json["recall_subsets"] = {
      {"small_k1", select_recall_subsets(recall, pmax_syn, 1).size()},
      {"large_k5", select_recall_subsets(recall, pmax_syn, 5).size()}};

  const auto consistency =
      mcc(test, spec, config.min_frames, config.consistency_mode, workers);
  const auto curves =
      first_frame_curves(test, spec, config.min_frames, config.max_offset, workers);
  const auto baseline = cross_video_baseline(test, spec, baseline_seed, config.min_frames,
                                             config.max_offset, workers);
  auto consistency_json = to_json(consistency);
  consistency_json["first_frame_curve"] = curve_summary_json(curves);
  consistency_json["cross_video_baseline"] = curve_summary_json(baseline);

  Bundle bundle(config.out_dir);
  bundle.write("eval_report.json", dump(to_json(eval)));
  write_pmax_csv(pmax_test, bundle.path("pmax_test.csv"));
  bundle.adopt("pmax_test.csv");
  write_pmax_csv(pmax_syn, bundle.path("pmax_synthetic.csv"));
  bundle.adopt("pmax_synthetic.csv");
  bundle.write("privacy_report.json", dump(to_json(privacy)));
  bundle.write("recall_report.json", dump(recall_json));
  bundle.write("frequency.csv", frequency_csv(recall));
  bundle.write("consistency_report.json", dump(consistency_json));
  bundle.write("curves.csv", curves_csv(curves));
  export_projection_table(train, synthetic, recall, bundle.path("projection.csv"));
  bundle.adopt("projection.csv");

  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& name : bundle.names()) {
    const auto text = read_text(bundle.path(name));
    artifacts.push_back({{"name", name}, {"bytes", text.size()}, {"sha256", sha256_hex(text)}});
  }
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto* p : {&config.train_path, &config.test_path, &config.synthetic_path}) {
    inputs.push_back({{"path", p->string()}, {"sha256", sha256_hex(read_text(*p))}});
  }
  if (config.head_path) {
    inputs.push_back({{"path", config.head_path->string()},
                      {"sha256", sha256_hex(read_text(*config.head_path))}});
  }

  AuditResult result;
  result.manifest = {
      {"tool", "reid-audit"},
      {"version", tool_version()},
      {"created_at", utc_timestamp()},
      {"config", to_json(config)},
      {"spec", spec.description()},
      {"seeds",
       {{"seed", config.seed},
        {"eval_pairs", pair_seed},
        {"bootstrap", bootstrap_seed},
        {"cross_video_baseline", baseline_seed}}},
      {"counts",
       {{"train", train.size()}, {"test", test.size()}, {"synthetic", synthetic.size()}}},
      {"inputs", inputs},
      {"artifacts", artifacts},
  };
  bundle.write("manifest.json", dump(result.manifest));
  result.artifacts = bundle.commit();
  return result;
}

}  // namespace reid
