#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emer/gateway.h"
#include "emer/harness.h"
#include "emer/pipeline.h"

namespace emer {

// One YAML file drives every subcommand:
//
//   cache_dir: .cache/replies
//   backends:
//     salmonn: {endpoint_url: "http://...", model_id: salmonn-13b, temperature: 0}
//   prompts:
//     - {id: merge, version: v2, role: merge, body: "..."}
//   pipeline:
//     audio_backend: salmonn
//     ...
//   eval:
//     dataset: fine.jsonl
//     split_manifest: split.json
//     title: "Main results"
//     baselines: [Empty]
//     defaults: {n_runs: 2, grouper: lexicon, extractor: lexicon}
//     experiments:
//       - {system: "A+V", predictions: av.jsonl, language: en, flags: LVA}
//
// Relative paths resolve against the file's directory. Unknown keys are
// errors.
struct AppConfig {
  std::filesystem::path base_dir;
  std::vector<BackendSpec> backends;
  std::optional<std::filesystem::path> cache_dir;
  PipelineConfig pipeline;
  bool has_pipeline = false;

  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> split_manifest;
  std::string title;
  std::vector<std::string> baselines;
  std::vector<ExperimentConfig> experiments;
};

using Environment = std::map<std::string, std::string>;

// The process environment.
Environment process_environment();

// Variables named EMER_<SECTION>__<KEY>[__<KEY>...] override the matching
// YAML entry; segments compare case-insensitively with non-alphanumerics
// read as '_' (EMER_BACKENDS__GPT_4__MODEL_ID sets backends.gpt-4.model_id).
// Throws ConfigError naming the key and line.
AppConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir = {},
                       const Environment& env = {});
AppConfig load_config(const std::filesystem::path& path,
                      const Environment& env = process_environment());

}  // namespace emer
