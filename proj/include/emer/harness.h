#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "emer/dataset.h"
#include "emer/gateway.h"
#include "emer/label_space.h"
#include "emer/llm_tasks.h"
#include "emer/metrics.h"
#include "emer/prompts.h"
#include "emer/report.h"

namespace emer {

struct ExperimentConfig {
  std::string system_name;
  std::filesystem::path predictions_path;
  // whole, train or test.
  std::string split = "whole";
  Language language = Language::kEn;
  int n_runs = 2;
  // "lexicon" or a backend name.
  std::string grouper = "lexicon";
  std::string extractor = "lexicon";
  std::optional<ModalityFlags> flags;
  std::string section;
  // Report column group; defaults to "English" / "Chinese".
  std::string column;
  // Each run issues its own grouping/extraction calls (separate cache
  // salts). Without it, repeated runs replay the first run's cached replies.
  bool independent_runs = true;
  int parallelism = 1;

  std::string column_name() const;
  nlohmann::ordered_json to_json() const;
  // sha256 of to_json().
  std::string digest() const;
};

struct Prediction {
  std::string sample_id;
  // Free text (labels are extracted) or a label list (used directly).
  std::variant<std::string, std::vector<std::string>> output;
};

// JSONL {"sample_id": ..., "output": "text" | ["label", ...]}; the shape is
// detected per record. A repeated sample_id keeps its last record.
std::vector<Prediction> parse_predictions(std::string_view content);
// Throws PredictionsMissing if the file does not exist.
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

struct Coverage {
  std::size_t split_size = 0;
  std::size_t scored = 0;
  std::size_t missing = 0;
  // Predictions for ids outside the split; ignored.
  std::size_t extra = 0;
  std::vector<std::string> missing_ids;
};

struct RunRecord {
  int run = 0;
  std::string group_map_digest;
  std::string grouper_version;
  std::size_t group_count = 0;
  std::size_t oov_extensions = 0;
  // Percentages.
  MetricResult corpus;
};

struct ExperimentResult {
  ExperimentConfig config;
  MetricTriple metrics;
  std::vector<RunRecord> runs;
  Coverage coverage;

  ReportRow row() const;
  nlohmann::ordered_json run_log() const;
};

// Where groupers and extractors come from. The factories receive the
// 1-based run index; when unset, "lexicon" maps to the built-in tables and
// anything else to a backend registered on `gateway`.
struct HarnessContext {
  Gateway* gateway = nullptr;
  PromptLibrary prompts = PromptLibrary::defaults();
  // Required for split "train"/"test".
  std::optional<nlohmann::json> split_manifest;
  std::function<std::unique_ptr<Grouper>(const ExperimentConfig&, int run)> grouper_factory;
  std::function<std::shared_ptr<LabelExtractor>(const ExperimentConfig&, int run)>
      extractor_factory;
};

// Scores predictions against the annotations of the configured split, once
// per run. Each run builds one GroupMap over the union of annotated and
// predicted labels before scoring its samples in parallel. Missing
// predictions score as empty. Backend errors propagate.
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetHandle& dataset,
                                const std::vector<Prediction>& predictions,
                                const HarnessContext& context = {});
// Loads config.predictions_path.
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetHandle& dataset,
                                const HarnessContext& context = {});

// Runs the experiments concurrently; results come back in input order. The
// first failure is rethrown after every experiment has finished.
std::vector<ExperimentResult> run_batch(const std::vector<ExperimentConfig>& configs,
                                        const DatasetHandle& dataset,
                                        const HarnessContext& context = {});

// One row per (system, split), in first-appearance order; each experiment
// fills the column group named by its config.
ReportTable build_table(const std::vector<ExperimentResult>& results, std::string title = {});

}  // namespace emer
