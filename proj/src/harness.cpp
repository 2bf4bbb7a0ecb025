#include "emer/harness.h"

#include <algorithm>
#include <atomic>
#include <future>
#include <map>
#include <thread>
#include <unordered_map>

#include "emer/errors.h"
#include "emer/text.h"

namespace emer {

std::string ExperimentConfig::column_name() const {
  if (!column.empty()) return column;
  return language == Language::kEn ? "English" : "Chinese";
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["system_name"] = system_name;
  j["predictions_path"] = predictions_path.generic_string();
  j["split"] = split;
  j["language"] = std::string(to_string(language));
  j["n_runs"] = n_runs;
  j["grouper"] = grouper;
  j["extractor"] = extractor;
  j["flags"] = flags ? nlohmann::ordered_json(flags->to_string()) : nlohmann::ordered_json();
  j["column"] = column_name();
  j["independent_runs"] = independent_runs;
  return j;
}

std::string ExperimentConfig::digest() const { return text::sha256_hex(to_json().dump()); }

std::vector<Prediction> parse_predictions(std::string_view content) {
  std::vector<Prediction> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaViolation(line_no, "", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("sample_id") || !j["sample_id"].is_string()) {
      throw SchemaViolation(line_no, "sample_id", "missing or not a string");
    }
    Prediction p;
    p.sample_id = j["sample_id"].get<std::string>();
    const auto& output = j.contains("output") ? j["output"] : nlohmann::json();
    if (output.is_string()) {
      p.output = output.get<std::string>();
    } else if (output.is_array()) {
      std::vector<std::string> labels;
      for (const auto& item : output) {
        if (!item.is_string()) throw SchemaViolation(line_no, "output", "label is not a string");
        labels.push_back(item.get<std::string>());
      }
      p.output = std::move(labels);
    } else {
      throw SchemaViolation(line_no, "output", "must be a string or a list of strings");
    }
    if (auto it = seen.find(p.sample_id); it != seen.end()) {
      out[it->second] = std::move(p);
    } else {
      seen.emplace(p.sample_id, out.size());
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw PredictionsMissing("predictions file not found: " + path.string());
  }
  return parse_predictions(text::read_file(path));
}

namespace {

std::unique_ptr<Grouper> default_grouper(const ExperimentConfig& config, int run,
                                         const HarnessContext& context) {
  if (config.grouper == "lexicon") {
    return std::make_unique<LexiconGrouper>(Lexicon::builtin(config.language));
  }
  if (!context.gateway || !context.gateway->has_backend(config.grouper)) {
    throw ConfigError("grouper", 0, "unknown backend '" + config.grouper + "'");
  }
  auto grouper = std::make_unique<LlmGrouper>(*context.gateway,
                                              context.gateway->backend(config.grouper),
                                              context.prompts.get(prompt_ids::kGroup));
  if (config.independent_runs) grouper->set_cache_salt("run-" + std::to_string(run));
  return grouper;
}

std::shared_ptr<LabelExtractor> default_extractor(const ExperimentConfig& config, int run,
                                                  const HarnessContext& context) {
  if (config.extractor == "lexicon") return std::make_shared<LexiconExtractor>();
  if (!context.gateway || !context.gateway->has_backend(config.extractor)) {
    throw ConfigError("extractor", 0, "unknown backend '" + config.extractor + "'");
  }
  auto extractor = std::make_shared<LlmExtractor>(*context.gateway,
                                                  context.gateway->backend(config.extractor),
                                                  context.prompts.get(prompt_ids::kExtractLabels));
  if (config.independent_runs) extractor->set_cache_salt("run-" + std::to_string(run));
  return extractor;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
// exception after all threads stop.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::size_t threads = std::min<std::size_t>(std::max(workers, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; !stop && (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

const std::vector<EmotionLabel>& annotations_of(const SampleRecord& record, Language language) {
  const auto& labels = language == Language::kEn ? record.labels_en : record.labels_zh;
  if (!labels) {
    throw MissingPrerequisite("sample '" + record.sample_id + "' has no " +
                              std::string(to_string(language)) + " annotations");
  }
  return *labels;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetHandle& dataset,
                                const std::vector<Prediction>& predictions,
                                const HarnessContext& context) {
  if (config.n_runs < 1) throw ConfigError("n_runs", 0, "must be a positive integer");
  if (config.parallelism < 1) throw ConfigError("parallelism", 0, "must be at least 1");

  DatasetHandle split_data;
  if (config.split == "whole") {
    split_data = dataset;
  } else if (config.split == "train" || config.split == "test") {
    if (!context.split_manifest) {
      throw MissingPrerequisite("split '" + config.split + "' needs a split manifest");
    }
    split_data = select_split(dataset, *context.split_manifest, config.split);
  } else {
    throw ConfigError("split", 0, "must be whole, train or test");
  }
  const auto& records = split_data.records();
  if (records.empty()) throw EmptyCorpus();

  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id[p.sample_id] = &p;

  ExperimentResult result;
  result.config = config;
  result.coverage.split_size = records.size();
  std::vector<const Prediction*> matched(records.size(), nullptr);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = by_id.find(records[i].sample_id);
    if (it == by_id.end()) {
      ++result.coverage.missing;
      result.coverage.missing_ids.push_back(records[i].sample_id);
    } else {
      matched[i] = it->second;
      ++result.coverage.scored;
    }
  }
  for (const auto& p : predictions) {
    if (!split_data.find(p.sample_id)) ++result.coverage.extra;
  }

  std::vector<double> avg_runs, acc_runs, rec_runs;
  for (int run = 1; run <= config.n_runs; ++run) {
    // Predicted labels for this run.
    std::shared_ptr<LabelExtractor> extractor;
    std::mutex extractor_mutex;
    std::vector<std::vector<EmotionLabel>> predicted(records.size());
    parallel_for(records.size(), config.parallelism, [&](std::size_t i) {
      if (!matched[i]) return;
      if (const auto* list = std::get_if<std::vector<std::string>>(&matched[i]->output)) {
        predicted[i] = normalize_labels(*list, config.language);
        return;
      }
      const auto& text_output = std::get<std::string>(matched[i]->output);
      if (text::is_blank(text_output)) return;
      {
        std::lock_guard lock(extractor_mutex);
        if (!extractor) {
          extractor = context.extractor_factory ? context.extractor_factory(config, run)
                                                : default_extractor(config, run, context);
        }
      }
      predicted[i] = extractor->extract(text_output, config.language);
    });

    // One grouping call per run, over the union vocabulary.
    std::set<EmotionLabel> vocabulary;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& annotated = annotations_of(records[i], config.language);
      vocabulary.insert(annotated.begin(), annotated.end());
      vocabulary.insert(predicted[i].begin(), predicted[i].end());
    }
    auto grouper = context.grouper_factory ? context.grouper_factory(config, run)
                                           : default_grouper(config, run, context);
    GroupMap map = build_group_map(vocabulary, *grouper);

    std::vector<std::pair<GroupedLabelSet, GroupedLabelSet>> pairs(records.size());
    parallel_for(records.size(), config.parallelism, [&](std::size_t i) {
      pairs[i] = {map_to_groups(annotations_of(records[i], config.language), map,
                                LabelOrigin::kAnnotated),
                  map_to_groups(predicted[i], map, LabelOrigin::kPredicted)};
    });
    MetricResult corpus = score_corpus(pairs);

    RunRecord record;
    record.run = run;
    record.group_map_digest = map.digest();
    record.grouper_version = grouper->version();
    record.group_count = map.group_count();
    record.oov_extensions = map.oov_extensions().size();
    record.corpus = {corpus.accuracy_s * 100.0, corpus.recall_s * 100.0, corpus.avg * 100.0};
    avg_runs.push_back(record.corpus.avg);
    acc_runs.push_back(record.corpus.accuracy_s);
    rec_runs.push_back(record.corpus.recall_s);
    result.runs.push_back(std::move(record));
  }
  result.metrics.avg = aggregate_runs(avg_runs);
  result.metrics.accuracy_s = aggregate_runs(acc_runs);
  result.metrics.recall_s = aggregate_runs(rec_runs);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetHandle& dataset,
                                const HarnessContext& context) {
  return run_experiment(config, dataset, load_predictions(config.predictions_path), context);
}

ReportRow ExperimentResult::row() const {
  ReportRow row;
  row.system = config.system_name;
  row.flags = config.flags;
  row.split = config.split;
  row.section = config.section;
  row.groups.push_back(ColumnGroup{config.column_name(), metrics});
  return row;
}

nlohmann::ordered_json ExperimentResult::run_log() const {
  nlohmann::ordered_json j;
  j["system"] = config.system_name;
  j["config_digest"] = config.digest();
  j["config"] = config.to_json();
  j["averaging"] = "macro";
  j["coverage"] = {{"split_size", coverage.split_size},
                   {"scored", coverage.scored},
                   {"missing", coverage.missing},
                   {"extra", coverage.extra},
                   {"missing_ids", coverage.missing_ids}};
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) {
    nlohmann::ordered_json rj;
    rj["run"] = r.run;
    rj["group_map_digest"] = r.group_map_digest;
    rj["grouper"] = r.grouper_version;
    rj["groups"] = r.group_count;
    rj["oov_extensions"] = r.oov_extensions;
    rj["avg"] = r.corpus.avg;
    rj["accuracy_s"] = r.corpus.accuracy_s;
    rj["recall_s"] = r.corpus.recall_s;
    j["runs"].push_back(std::move(rj));
  }
  // Which components can make runs differ.
  nlohmann::ordered_json sources = nlohmann::ordered_json::array();
  if (config.grouper != "lexicon") {
    sources.push_back(config.independent_runs ? "grouping" : "grouping (cached across runs)");
  }
  if (config.extractor != "lexicon") {
    sources.push_back(config.independent_runs ? "extraction" : "extraction (cached across runs)");
  }
  j["variance_sources"] = std::move(sources);
  std::set<std::string> digests;
  for (const auto& r : runs) digests.insert(r.group_map_digest);
  j["distinct_group_maps"] = digests.size();
  j["result"] = {{"avg", metrics.avg.format()},
                 {"accuracy_s", metrics.accuracy_s.format()},
                 {"recall_s", metrics.recall_s.format()}};
  return j;
}

std::vector<ExperimentResult> run_batch(const std::vector<ExperimentConfig>& configs,
                                        const DatasetHandle& dataset,
                                        const HarnessContext& context) {
  std::vector<std::future<ExperimentResult>> futures;
  futures.reserve(configs.size());
  for (const auto& config : configs) {
    futures.push_back(std::async(std::launch::async, [&config, &dataset, &context] {
      return run_experiment(config, dataset, context);
    }));
  }
  std::vector<ExperimentResult> results;
  std::exception_ptr error;
  for (auto& f : futures) {
    try {
      results.push_back(f.get());
    } catch (...) {
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return results;
}

ReportTable build_table(const std::vector<ExperimentResult>& results, std::string title) {
  ReportTable table;
  table.title = std::move(title);
  for (const auto& result : results) {
    auto it = std::find_if(table.rows.begin(), table.rows.end(), [&](const ReportRow& r) {
      return r.system == result.config.system_name && r.split == result.config.split;
    });
    if (it == table.rows.end()) {
      table.rows.push_back(result.row());
      continue;
    }
    it->groups.push_back(ColumnGroup{result.config.column_name(), result.metrics});
    if (!it->flags) it->flags = result.config.flags;
  }
  return table;
}

}  // namespace emer
