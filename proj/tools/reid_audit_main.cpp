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

// reid-audit command-line tool.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "reid/audit.hpp"
#include "reid/consistency.hpp"
#include "reid/embedding_store.hpp"
#include "reid/error.hpp"
#include "reid/head_trainer.hpp"
#include "reid/pair_eval.hpp"
#include "reid/privacy_filter.hpp"
#include "reid/recall_analyzer.hpp"
#include "reid/similarity.hpp"
#include "reid/synthbench.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using reid::AuditError;
using reid::ErrorCode;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.\n"
    "Errors are reported on stderr as a JSON object.\n"
    "REID_AUDIT_WORKERS, when set, overrides --workers.";

// Options every subcommand accepts.
struct Common {
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help, bool out_required) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--workers", c.workers, "Worker threads (0 = all cores)")->capture_default_str();
  auto* out = cmd->add_option("--out", c.out, out_help);
  if (out_required) out->required();
}

int workers_of(const Common& c) {
  if (const char* env = std::getenv("REID_AUDIT_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) {
      throw AuditError(ErrorCode::kInvalidConfig,
                       std::string("REID_AUDIT_WORKERS is not a worker count: ") + env);
    }
    return static_cast<int>(v);
  }
  return c.workers;
}

void require_input(const std::string& path, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw AuditError(ErrorCode::kInvalidConfig, std::string(what) + " file not found: " + path);
  }
}

reid::EmbeddingDataset load_input(const std::string& path, const char* what) {
  require_input(path, what);
  return reid::load_dataset(path);
}

reid::Split split_of(const std::string& text) {
  const auto s = reid::parse_split(text);
  if (!s) throw AuditError(ErrorCode::kInvalidArgument, "unknown split '" + text + "'");
  return *s;
}

reid::SimilaritySpec spec_of(const std::string& metric, const std::string& head) {
  const auto m = reid::parse_metric(metric);
  if (!m) throw AuditError(ErrorCode::kInvalidArgument, "unknown metric '" + metric + "'");
  if (*m != reid::Metric::kPred) return reid::SimilaritySpec(*m);
  if (head.empty()) throw AuditError(ErrorCode::kInvalidArgument, "metric Pred requires --head");
  require_input(head, "head");
  return reid::SimilaritySpec::pred(reid::load_head(head));
}

reid::Aggregation aggregation_of(const std::string& text) {
  const auto a = reid::parse_aggregation(text);
  if (!a) throw AuditError(ErrorCode::kInvalidArgument, "unknown aggregation '" + text + "'");
  return *a;
}

json read_json(const std::string& path, const char* what) {
  require_input(path, what);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw AuditError(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw AuditError(ErrorCode::kIoFailure, "cannot write " + path.string());
}

// Writes to --out when given, otherwise to stdout.
void emit(const Common& c, const json& j) {
  if (c.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text(c.out, j.dump(2) + "\n");
  }
}

int exit_code_for(reid::ErrorCategory category) {
  switch (category) {
    case reid::ErrorCategory::kConfig: return kExitConfig;
    case reid::ErrorCategory::kNumeric: return kExitNumeric;
    case reid::ErrorCategory::kData: return kExitData;
  }
  return kExitData;
}

std::string_view category_name(reid::ErrorCategory category) {
  switch (category) {
    case reid::ErrorCategory::kConfig: return "config";
    case reid::ErrorCategory::kNumeric: return "numeric";
    case reid::ErrorCategory::kData: return "data";
  }
  return "data";
}

void report_error(std::string_view code, std::string_view category, const std::string& message,
                  int exit_code) {
  const json err = {{"error",
                     {{"code", code},
                      {"category", category},
                      {"message", message},
                      {"exit_code", exit_code}}}};
  std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Re-identification based privacy audit for embedding datasets", "reid-audit"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(reid::tool_version()));

  std::function<void()> action;

  // ingest-csv
  Common ingest_c;
  std::string ingest_manifest;
  std::optional<std::size_t> ingest_dim;
  auto* ingest = app.add_subcommand("ingest-csv", "Convert a CSV manifest of raw float32 files to EMB1");
  ingest->add_option("--manifest", ingest_manifest,
                     "CSV with video_id,split,ef_value,feature_file,num_frames")->required();
  ingest->add_option("--dim", ingest_dim, "Feature dimension (default: inferred)");
  add_common(ingest, ingest_c, "Output EMB1 file", true);
  ingest->callback([&] {
    action = [&] {
      require_input(ingest_manifest, "manifest");
      const auto d = reid::import_csv_manifest(ingest_manifest, ingest_dim);
      reid::write_dataset(d, ingest_c.out);
      std::cout << json{{"videos", d.videos.size()},
                        {"dimension", d.dimension},
                        {"frames", d.total_frames()},
                        {"out", ingest_c.out}}.dump() << "\n";
    };
  });

  // gen-synth
  Common gen_c;
  std::string gen_config;
  reid::synthbench::ClusterConfig gen;
  std::vector<double> gen_fractions;
  std::string gen_mode = "independent";
  auto* gen_cmd = app.add_subcommand("gen-synth", "Generate a cluster-structured EMB1 dataset");
  gen_cmd->add_option("--config", gen_config, "ClusterConfig JSON; flags given explicitly override it");
  auto* o_ids = gen_cmd->add_option("--identities", gen.n_identities, "Number of videos")->capture_default_str();
  auto* o_frames = gen_cmd->add_option("--frames", gen.frames_per_video, "Frames per video")->capture_default_str();
  auto* o_dim = gen_cmd->add_option("--dim", gen.dimension, "Feature dimension")->capture_default_str();
  auto* o_si = gen_cmd->add_option("--sigma-intra", gen.sigma_intra, "Within-video noise scale")->capture_default_str();
  auto* o_se = gen_cmd->add_option("--sigma-inter", gen.sigma_inter, "Center spread")->capture_default_str();
  auto* o_fr = gen_cmd->add_option("--fractions", gen_fractions, "Train, test and synthetic fractions")->expected(3);
  auto* o_mode = gen_cmd->add_option("--mode", gen_mode, "independent, resample_identity or copy_with_noise")->capture_default_str();
  auto* o_noise = gen_cmd->add_option("--copy-noise", gen.copy_noise, "Noise added to copies")->capture_default_str();
  add_common(gen_cmd, gen_c, "Output EMB1 file", true);
  gen_cmd->callback([&] {
    action = [&] {
      reid::synthbench::ClusterConfig c;
      if (!gen_config.empty()) c = reid::synthbench::cluster_config_from_json(read_json(gen_config, "config"));
      if (o_ids->count()) c.n_identities = gen.n_identities;
      if (o_frames->count()) c.frames_per_video = gen.frames_per_video;
      if (o_dim->count()) c.dimension = gen.dimension;
      if (o_si->count()) c.sigma_intra = gen.sigma_intra;
      if (o_se->count()) c.sigma_inter = gen.sigma_inter;
      if (o_noise->count()) c.copy_noise = gen.copy_noise;
      if (o_fr->count()) {
        c.train_fraction = gen_fractions[0];
        c.test_fraction = gen_fractions[1];
        c.synthetic_fraction = gen_fractions[2];
      }
      if (o_mode->count() || gen_config.empty()) {
        auto j = reid::synthbench::to_json(c);
        j["synthetic_mode"] = gen_mode;
        c = reid::synthbench::cluster_config_from_json(j);
      }
      if (gen_cmd->get_option("--seed")->count() || gen_config.empty()) c.seed = gen_c.seed;
      const auto d = reid::synthbench::generate_clustered_dataset(c, workers_of(gen_c));
      reid::write_dataset(d, gen_c.out);
      std::cout << json{{"config", reid::synthbench::to_json(c)},
                        {"videos", d.videos.size()},
                        {"out", gen_c.out}}.dump() << "\n";
    };
  });

  // train-head
  Common train_c;
  std::string train_data;
  std::string train_split = "train";
  std::size_t train_pairs = 2000;
  std::string train_log;
  reid::TrainConfig tc;
  auto* train_cmd = app.add_subcommand("train-head", "Train a predictor head on frame pairs");
  train_cmd->add_option("--data", train_data, "EMB1 dataset")->required();
  train_cmd->add_option("--split", train_split, "Split to sample pairs from")->capture_default_str();
  train_cmd->add_option("--pairs", train_pairs, "Number of training pairs")->capture_default_str();
  train_cmd->add_option("--epochs", tc.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", tc.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--learning-rate", tc.learning_rate, "SGD step size")->capture_default_str();
  train_cmd->add_option("--hidden", tc.hidden_size, "Hidden layer width")->capture_default_str();
  train_cmd->add_option("--patience", tc.early_stop_patience, "Early-stopping patience in epochs")->capture_default_str();
  train_cmd->add_option("--log", train_log, "Per-epoch loss CSV");
  add_common(train_cmd, train_c, "Output HEAD1 file", true);
  train_cmd->callback([&] {
    action = [&] {
      const auto d = load_input(train_data, "data");
      tc.seed = train_c.seed;
      const auto pairs = reid::sample_training_pairs(d.split(split_of(train_split)), train_pairs, train_c.seed);
      const auto r = reid::train_head(pairs, d, tc);
      reid::write_head(r.head, train_c.out);
      if (!train_log.empty()) write_text(train_log, r.log.to_csv());
      std::cout << json{{"head", train_c.out},
                        {"fingerprint", r.head.fingerprint()},
                        {"epochs_run", r.log.epochs.size()},
                        {"best_epoch", r.log.best_epoch},
                        {"initial_heldout_loss", r.log.initial_heldout_loss},
                        {"best_heldout_loss", r.log.best_heldout_loss},
                        {"config", reid::to_json(tc)}}.dump() << "\n";
    };
  });

  // eval
  Common eval_c;
  std::string eval_data, eval_split = "test", eval_metric = "Corr", eval_head;
  std::optional<double> eval_threshold;
  std::size_t eval_bootstrap = 10000;
  auto* eval_cmd = app.add_subcommand("eval", "Pair-verification metrics with bootstrap AUC interval");
  eval_cmd->add_option("--data", eval_data, "EMB1 dataset")->required();
  eval_cmd->add_option("--split", eval_split, "Split to evaluate")->capture_default_str();
  eval_cmd->add_option("--metric", eval_metric, "L1, L2, Corr or Pred")->capture_default_str();
  eval_cmd->add_option("--head", eval_head, "HEAD1 file for Pred");
  eval_cmd->add_option("--threshold", eval_threshold, "Decision threshold (default: 0.5 for Pred, Youden otherwise)");
  eval_cmd->add_option("--bootstrap", eval_bootstrap, "Bootstrap resamples (0 disables)")->capture_default_str();
  add_common(eval_cmd, eval_c, "Output JSON (default: stdout)", false);
  eval_cmd->callback([&] {
    action = [&] {
      const auto d = load_input(eval_data, "data");
      const auto spec = spec_of(eval_metric, eval_head);
      const auto pairs = reid::sample_eval_pairs(d.split(split_of(eval_split)), eval_c.seed);
      emit(eval_c, reid::to_json(reid::evaluate(pairs, d, spec, eval_threshold,
                                                {eval_bootstrap, eval_c.seed, workers_of(eval_c)})));
    };
  });

  // pmax
  Common pmax_c;
  std::string pmax_queries, pmax_query_split = "synthetic", pmax_train, pmax_metric = "Corr",
                            pmax_head, pmax_agg = "first_vs_first";
  auto* pmax_cmd = app.add_subcommand("pmax", "P_max of every query video against the training split");
  pmax_cmd->add_option("--queries", pmax_queries, "EMB1 file holding the query videos")->required();
  pmax_cmd->add_option("--query-split", pmax_query_split, "Split of the query file")->capture_default_str();
  pmax_cmd->add_option("--train", pmax_train, "EMB1 file whose train split is the reference")->required();
  pmax_cmd->add_option("--metric", pmax_metric, "L1, L2, Corr or Pred")->capture_default_str();
  pmax_cmd->add_option("--head", pmax_head, "HEAD1 file for Pred");
  pmax_cmd->add_option("--aggregation", pmax_agg, "first_vs_first or first_vs_all_mean")->capture_default_str();
  add_common(pmax_cmd, pmax_c, "Output P_max CSV", true);
  pmax_cmd->callback([&] {
    action = [&] {
      const auto q = load_input(pmax_queries, "queries");
      const auto t = fs::equivalent(pmax_queries, pmax_train) ? q : load_input(pmax_train, "train");
      const auto table = reid::pmax_all(q.split(split_of(pmax_query_split)), t.split(reid::Split::kTrain),
                                        spec_of(pmax_metric, pmax_head), aggregation_of(pmax_agg),
                                        workers_of(pmax_c));
      reid::write_pmax_csv(table, pmax_c.out);
      std::cout << json{{"rows", table.rows.size()}, {"spec", table.spec}, {"out", pmax_c.out}}.dump()
                << "\n";
    };
  });

  // calibrate
  Common cal_c;
  std::string cal_pmax;
  double cal_percentile = 95.0;
  auto* cal_cmd = app.add_subcommand("calibrate", "Nearest-rank percentile threshold from a test P_max table");
  cal_cmd->add_option("--pmax", cal_pmax, "Test P_max CSV")->required();
  cal_cmd->add_option("--percentile", cal_percentile, "Percentile in (0, 100)")->capture_default_str();
  add_common(cal_cmd, cal_c, "Output threshold JSON (also printed)", false);
  cal_cmd->callback([&] {
    action = [&] {
      require_input(cal_pmax, "pmax");
      const auto j = reid::to_json(reid::calibrate_threshold(reid::read_pmax_csv(cal_pmax), cal_percentile));
      if (!cal_c.out.empty()) write_text(cal_c.out, j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
    };
  });

  // filter
  Common filt_c;
  std::string filt_threshold, filt_pmax;
  auto* filt_cmd = app.add_subcommand("filter", "Flag synthetic videos above the privacy threshold");
  filt_cmd->add_option("--threshold", filt_threshold, "Threshold JSON from calibrate")->required();
  filt_cmd->add_option("--pmax", filt_pmax, "Synthetic P_max CSV")->required();
  add_common(filt_cmd, filt_c, "Output privacy report JSON (default: stdout)", false);
  filt_cmd->callback([&] {
    action = [&] {
      const auto th = reid::threshold_from_json(read_json(filt_threshold, "threshold"));
      require_input(filt_pmax, "pmax");
      emit(filt_c, reid::to_json(reid::apply_filter(reid::read_pmax_csv(filt_pmax), th)));
    };
  });

  // recall
  Common rec_c;
  std::string rec_pmax, rec_threshold, rec_train, rec_synthetic;
  auto* rec_cmd = app.add_subcommand("recall", "Learned / memorized accounting over a synthetic P_max table");
  rec_cmd->add_option("--pmax", rec_pmax, "Synthetic P_max CSV")->required();
  rec_cmd->add_option("--threshold", rec_threshold, "Threshold JSON")->required();
  rec_cmd->add_option("--train", rec_train, "EMB1 file whose train split was the reference")->required();
  rec_cmd->add_option("--synthetic", rec_synthetic, "EMB1 file with the synthetic split; enables projection.csv");
  add_common(rec_cmd, rec_c, "Output directory", true);
  rec_cmd->callback([&] {
    action = [&] {
      const auto th = reid::threshold_from_json(read_json(rec_threshold, "threshold"));
      require_input(rec_pmax, "pmax");
      const auto table = reid::read_pmax_csv(rec_pmax);
      const auto train = load_input(rec_train, "train");
      const auto report = reid::analyze_recall(table, th, train.split(reid::Split::kTrain).size());
      const fs::path dir = rec_c.out;
      write_text(dir / "recall_report.json", reid::to_json(report).dump(2) + "\n");
      write_text(dir / "frequency.csv", reid::frequency_csv(report));
      if (!rec_synthetic.empty()) {
        const auto syn = load_input(rec_synthetic, "synthetic");
        reid::export_projection_table(train.split(reid::Split::kTrain),
                                      syn.split(reid::Split::kSynthetic), report,
                                      dir / "projection.csv");
      }
      std::cout << json{{"learned_count", report.learned_count},
                        {"learned_fraction", report.learned_fraction},
                        {"memorized_count", report.memorized_count},
                        {"learned_but_memorized_count", report.learned_but_memorized_count},
                        {"out", rec_c.out}}.dump() << "\n";
    };
  });

  // select-subset
  Common sel_c;
  std::string sel_pmax, sel_threshold, sel_train;
  std::size_t sel_k = 1;
  auto* sel_cmd = app.add_subcommand("select-subset", "Recall-informed synthetic subset (k per learned video)");
  sel_cmd->add_option("--pmax", sel_pmax, "Synthetic P_max CSV")->required();
  sel_cmd->add_option("--threshold", sel_threshold, "Threshold JSON")->required();
  sel_cmd->add_option("--train", sel_train, "EMB1 file whose train split was the reference")->required();
  sel_cmd->add_option("--k", sel_k, "Synthetic videos per learned train video")->capture_default_str();
  add_common(sel_cmd, sel_c, "Output id list, one per line", true);
  sel_cmd->callback([&] {
    action = [&] {
      const auto th = reid::threshold_from_json(read_json(sel_threshold, "threshold"));
      require_input(sel_pmax, "pmax");
      const auto table = reid::read_pmax_csv(sel_pmax);
      const auto train = load_input(sel_train, "train");
      const auto report = reid::analyze_recall(table, th, train.split(reid::Split::kTrain).size());
      const auto ids = reid::select_recall_subsets(report, table, sel_k);
      std::string text;
      for (const auto& id : ids) text += id + "\n";
      write_text(sel_c.out, text);
      std::cout << json{{"k", sel_k},
                        {"selected", ids.size()},
                        {"learned_count", report.learned_count},
                        {"learned_but_memorized_count", report.learned_but_memorized_count},
                        {"out", sel_c.out}}.dump() << "\n";
    };
  });

  // consistency
  Common con_c;
  std::string con_data, con_split = "test", con_metric = "Corr", con_head, con_mode = "all_pairs";
  std::size_t con_min_frames = reid::kDefaultMinFrames, con_max_offset = reid::kDefaultMaxOffset;
  auto* con_cmd = app.add_subcommand("consistency", "Per-video MCC, first-frame curves and cross-video baseline");
  con_cmd->add_option("--data", con_data, "EMB1 dataset")->required();
  con_cmd->add_option("--split", con_split, "Split to analyze")->capture_default_str();
  con_cmd->add_option("--metric", con_metric, "L1, L2, Corr or Pred")->capture_default_str();
  con_cmd->add_option("--head", con_head, "HEAD1 file for Pred");
  con_cmd->add_option("--mode", con_mode, "all_pairs or first_vs_all")->capture_default_str();
  con_cmd->add_option("--min-frames", con_min_frames, "Skip videos with fewer frames")->capture_default_str();
  con_cmd->add_option("--max-offset", con_max_offset, "Curve length in frames")->capture_default_str();
  add_common(con_cmd, con_c, "Output directory", true);
  con_cmd->callback([&] {
    action = [&] {
      const auto d = load_input(con_data, "data");
      const auto view = d.split(split_of(con_split));
      const auto spec = spec_of(con_metric, con_head);
      const auto mode = reid::parse_consistency_mode(con_mode);
      if (!mode) throw AuditError(ErrorCode::kInvalidArgument, "unknown mode '" + con_mode + "'");
      const int w = workers_of(con_c);
      auto j = reid::to_json(reid::mcc(view, spec, con_min_frames, *mode, w));
      const auto curves = reid::first_frame_curves(view, spec, con_min_frames, con_max_offset, w);
      j["first_frame_curve"] = reid::curve_summary_json(curves);
      if (view.size() >= 2) {
        j["cross_video_baseline"] = reid::curve_summary_json(
            reid::cross_video_baseline(view, spec, con_c.seed, con_min_frames, con_max_offset, w));
      }
      const fs::path dir = con_c.out;
      write_text(dir / "consistency_report.json", j.dump(2) + "\n");
      write_text(dir / "curves.csv", reid::curves_csv(curves));
      std::cout << json{{"aggregate_mean", j["aggregate_mean"]},
                        {"aggregate_std", j["aggregate_std"]},
                        {"n_videos", j["n_videos"]},
                        {"out", con_c.out}}.dump() << "\n";
    };
  });

  // audit
  Common aud_c;
  std::string aud_config, aud_train, aud_test, aud_syn, aud_metric, aud_head, aud_agg, aud_mode;
  double aud_percentile = 95.0;
  std::size_t aud_bootstrap = 10000, aud_min_frames = 0, aud_max_offset = 0;
  auto* aud_cmd = app.add_subcommand("audit", "Run the whole pipeline and write the report bundle");
  aud_cmd->add_option("--config", aud_config, "AuditConfig JSON; flags given explicitly override it");
  auto* a_train = aud_cmd->add_option("--train", aud_train, "EMB1 file providing the train split");
  auto* a_test = aud_cmd->add_option("--test", aud_test, "EMB1 file providing the test split");
  auto* a_syn = aud_cmd->add_option("--synthetic", aud_syn, "EMB1 file providing the synthetic split");
  auto* a_metric = aud_cmd->add_option("--metric", aud_metric, "L1, L2, Corr (default) or Pred");
  auto* a_head = aud_cmd->add_option("--head", aud_head, "HEAD1 file for Pred");
  auto* a_pct = aud_cmd->add_option("--percentile", aud_percentile, "Threshold percentile (default 95)");
  auto* a_agg = aud_cmd->add_option("--aggregation", aud_agg, "first_vs_first (default) or first_vs_all_mean");
  auto* a_boot = aud_cmd->add_option("--bootstrap", aud_bootstrap, "Bootstrap resamples (default 10000, 0 disables)");
  auto* a_minf = aud_cmd->add_option("--min-frames", aud_min_frames, "Consistency frame filter (default 80)");
  auto* a_maxo = aud_cmd->add_option("--max-offset", aud_max_offset, "Curve length (default 80)");
  auto* a_mode = aud_cmd->add_option("--mode", aud_mode, "Consistency mode (default all_pairs)");
  add_common(aud_cmd, aud_c, "Output directory", false);
  aud_cmd->callback([&] {
    action = [&] {
      json j = aud_config.empty() ? json::object() : read_json(aud_config, "config");
      if (a_train->count()) j["train"] = aud_train;
      if (a_test->count()) j["test"] = aud_test;
      if (a_syn->count()) j["synthetic"] = aud_syn;
      if (a_metric->count()) j["metric"] = aud_metric;
      if (a_head->count()) j["head"] = aud_head;
      if (a_pct->count()) j["percentile"] = aud_percentile;
      if (a_agg->count()) j["aggregation"] = aud_agg;
      if (a_boot->count()) j["bootstrap_resamples"] = aud_bootstrap;
      if (a_minf->count()) j["min_frames"] = aud_min_frames;
      if (a_maxo->count()) j["max_offset"] = aud_max_offset;
      if (a_mode->count()) j["consistency_mode"] = aud_mode;
      if (aud_cmd->get_option("--seed")->count()) j["seed"] = aud_c.seed;
      if (!aud_c.out.empty()) j["out_dir"] = aud_c.out;
      auto config = reid::audit_config_from_json(j);
      if (aud_cmd->get_option("--workers")->count()) config.workers = aud_c.workers;
      config.workers = workers_of({0, config.workers, ""});
      const auto result = reid::run_audit(config);
      json files = json::array();
      for (const auto& p : result.artifacts) files.push_back(p.string());
      std::cout << json{{"out_dir", config.out_dir.string()}, {"artifacts", files}}.dump() << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", "config", e.what(), kExitConfig);
    return kExitConfig;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const AuditError& e) {
    const auto category = reid::error_category(e.code());
    const int code = exit_code_for(category);
    report_error(reid::error_code_name(e.code()), category_name(category), e.detail(), code);
    return code;
  } catch (const fs::filesystem_error& e) {
    report_error("IoFailure", "data", e.what(), kExitData);
    return kExitData;
  } catch (const std::exception& e) {
    report_error("InternalError", "data", e.what(), kExitData);
    return kExitData;
  }
}
