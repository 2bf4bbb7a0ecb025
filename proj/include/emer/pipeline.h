#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "emer/dataset.h"
#include "emer/gateway.h"
#include "emer/llm_tasks.h"
#include "emer/prompts.h"
#include "emer/record.h"

namespace emer {

enum class Modality { kAudio, kVideo };

std::string_view to_string(Modality modality);

// Which backend runs the second (subtitle reconciliation) call of
// pre-labeling.
enum class ReconcileWith { kDisambiguationBackend, kModalityBackend };

struct PipelineConfig {
  std::string audio_backend;
  std::string video_backend;
  std::string merge_backend;
  std::string disambiguate_backend;
  std::string translate_backend;
  // "lexicon" or the name of a backend.
  std::string extractor = "lexicon";
  int parallelism = 1;
  bool resume = false;
  bool disambiguate = true;
  ReconcileWith reconcile_with = ReconcileWith::kDisambiguationBackend;
  bool record_wall_time = false;
  PromptLibrary prompts = PromptLibrary::defaults();

  // Throws ConfigError when a backend does not resolve, parallelism < 1, or
  // the disambiguation backend does not decode at temperature 0.
  void validate(const Gateway& gateway) const;
};

struct FailureEntry {
  std::string sample_id;
  std::string stage;
  std::string error;
  std::string message;

  nlohmann::ordered_json to_json() const;
};

struct PipelineResult {
  DatasetHandle dataset;
  std::vector<FailureEntry> failures;
  // Samples already complete before this run (resume).
  std::size_t reused = 0;
};

struct RunOptions {
  std::filesystem::path output_path;
  // Defaults to <output>.failures.jsonl.
  std::filesystem::path failures_path;
  // Defaults to <output>.journal.jsonl.
  std::filesystem::path journal_path;
  // Called after each completed sample with the number completed so far;
  // an exception thrown here aborts the run (used for crash testing).
  std::function<void(std::size_t)> on_sample_complete;
};

// Builds coarse emotion descriptions: two-step pre-labeling per modality,
// clue merging, subtitle disambiguation, translation and label extraction.
// There is no manual-check stage.
//
// Every stage method writes its field and provenance only after the backend
// call succeeded, and wraps failures in StageFailed.
class Pipeline {
 public:
  Pipeline(Gateway& gateway, PipelineConfig config,
           std::shared_ptr<LabelExtractor> extractor = nullptr);

  // Stage names in execution order.
  static const std::vector<std::string>& stage_graph();

  std::string prelabel_modality(SampleRecord& sample, Modality modality);
  std::string merge_clues(SampleRecord& sample);
  std::string disambiguate(SampleRecord& sample);
  std::string translate(SampleRecord& sample, Language target);
  std::vector<EmotionLabel> extract_labels(SampleRecord& sample, Language language);

  // All stages for one sample. `after_stage` runs after each committed stage.
  void process(SampleRecord& sample,
               const std::function<void(const SampleRecord&)>& after_stage = {});

  static bool is_complete(const SampleRecord& sample);

  // Throws ManifestInvalid on duplicate ids. Per-sample failures are
  // collected, never thrown. With config.resume, completed samples found in
  // the output file or journal are reused without backend calls.
  PipelineResult run(const std::vector<SampleRecord>& manifest, const RunOptions& options = {});

  const PipelineConfig& config() const { return config_; }

 private:
  struct StageOutput {
    std::string value;
    std::vector<ProvenanceEntry> entries;
  };

  StageOutput compute_prelabel(const SampleRecord& sample, Modality modality);
  void commit_prelabel(SampleRecord& sample, Modality modality, StageOutput output);
  ProvenanceEntry entry_for(const SampleRecord& sample, std::string field, std::string stage,
                            const BackendSpec& backend, const PromptTemplate& prompt,
                            const Completion& completion) const;
  std::string call(const SampleRecord& sample, std::string_view stage,
                   const BackendSpec& backend, const PromptTemplate& prompt,
                   const Bindings& bindings, Completion* completion);

  Gateway& gateway_;
  PipelineConfig config_;
  std::shared_ptr<LabelExtractor> extractor_;
};

}  // namespace emer
