#include "emer/pipeline.h"

#include <atomic>
#include <exception>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "emer/errors.h"
#include "emer/text.h"

namespace emer {

std::string_view to_string(Modality modality) {
  return modality == Modality::kAudio ? "audio" : "video";
}

namespace {

std::string language_name(Language language) {
  return language == Language::kEn ? "English" : "Chinese";
}

[[noreturn]] void fail_stage(const SampleRecord& sample, std::string_view stage,
                             const std::string& code, const std::string& message) {
  throw StageFailed(sample.sample_id, std::string(stage), code, message);
}

void require_backend(const Gateway& gateway, const std::string& name, const std::string& key) {
  if (name.empty()) throw ConfigError(key, 0, "no backend configured");
  if (!gateway.has_backend(name)) {
    throw ConfigError(key, 0, "backend '" + name + "' is not defined");
  }
}

}  // namespace

void PipelineConfig::validate(const Gateway& gateway) const {
  require_backend(gateway, audio_backend, "pipeline.audio_backend");
  require_backend(gateway, video_backend, "pipeline.video_backend");
  require_backend(gateway, merge_backend, "pipeline.merge_backend");
  require_backend(gateway, translate_backend, "pipeline.translate_backend");
  if (disambiguate || reconcile_with == ReconcileWith::kDisambiguationBackend) {
    require_backend(gateway, disambiguate_backend, "pipeline.disambiguate_backend");
    if (gateway.backend(disambiguate_backend).decode.temperature != 0.0) {
      throw ConfigError("backends." + disambiguate_backend + ".temperature", 0,
                        "the disambiguation backend must decode with temperature 0");
    }
  }
  if (extractor != "lexicon") require_backend(gateway, extractor, "pipeline.extractor");
  if (parallelism < 1) throw ConfigError("pipeline.parallelism", 0, "must be at least 1");
}

nlohmann::ordered_json FailureEntry::to_json() const {
  nlohmann::ordered_json j;
  j["sample_id"] = sample_id;
  j["stage"] = stage;
  j["error"] = error;
  j["message"] = message;
  return j;
}

Pipeline::Pipeline(Gateway& gateway, PipelineConfig config,
                   std::shared_ptr<LabelExtractor> extractor)
    : gateway_(gateway), config_(std::move(config)), extractor_(std::move(extractor)) {
  if (!extractor_) {
    if (config_.extractor == "lexicon") {
      extractor_ = std::make_shared<LexiconExtractor>();
    } else {
      extractor_ = std::make_shared<LlmExtractor>(
          gateway_, gateway_.backend(config_.extractor),
          config_.prompts.get(prompt_ids::kExtractLabels));
    }
  }
}

const std::vector<std::string>& Pipeline::stage_graph() {
  static const std::vector<std::string> stages{"prelabel_audio", "prelabel_video", "merge",
                                               "disambiguate",   "translate",      "extract"};
  return stages;
}

std::string Pipeline::call(const SampleRecord& sample, std::string_view stage,
                           const BackendSpec& backend, const PromptTemplate& prompt,
                           const Bindings& bindings, Completion* completion) {
  try {
    *completion = gateway_.complete_ex(backend, prompt, bindings);
    return completion->reply;
  } catch (const StageFailed&) {
    throw;
  } catch (const Error& e) {
    fail_stage(sample, stage, e.code(), e.what());
  }
}

ProvenanceEntry Pipeline::entry_for(const SampleRecord& sample, std::string field,
                                    std::string stage, const BackendSpec& backend,
                                    const PromptTemplate& prompt,
                                    const Completion& completion) const {
  ProvenanceEntry entry;
  entry.field = std::move(field);
  entry.stage = std::move(stage);
  entry.backend = backend.name;
  entry.prompt_id = prompt.id;
  entry.prompt_version = prompt.version;
  entry.cache_key = completion.cache_key;
  entry.timestamp = sample.next_timestamp();
  if (config_.record_wall_time) entry.wall_time = text::utc_now_iso8601();
  return entry;
}

Pipeline::StageOutput Pipeline::compute_prelabel(const SampleRecord& sample, Modality modality) {
  const std::string stage = "prelabel_" + std::string(to_string(modality));
  const std::string field = modality == Modality::kAudio ? "audio_desc" : "video_desc";
  if (sample.media_ref.empty()) {
    fail_stage(sample, stage, "MissingPrerequisite", "media_ref is empty");
  }
  const auto& modality_name =
      modality == Modality::kAudio ? config_.audio_backend : config_.video_backend;
  const BackendSpec& modality_backend = gateway_.backend(modality_name);
  const BackendSpec& reconcile_backend =
      config_.reconcile_with == ReconcileWith::kDisambiguationBackend
          ? gateway_.backend(config_.disambiguate_backend)
          : modality_backend;
  const PromptTemplate& clue_prompt = config_.prompts.get(
      modality == Modality::kAudio ? prompt_ids::kPrelabelAudio : prompt_ids::kPrelabelVideo);
  const PromptTemplate& reconcile_prompt = config_.prompts.get(prompt_ids::kPrelabelReconcile);

  Completion clue_call;
  std::string clues =
      call(sample, stage, modality_backend, clue_prompt, {{"media_ref", sample.media_ref}}, &clue_call);
  Completion reconcile_call;
  std::string description = call(
      sample, stage, reconcile_backend, reconcile_prompt,
      {{"subtitle", sample.subtitle()},
       {"modality", modality == Modality::kAudio ? "audio" : "visual"},
       {"clues", clues}},
      &reconcile_call);

  StageOutput out;
  out.value = std::move(description);
  out.entries.push_back(
      entry_for(sample, field, stage + "_clues", modality_backend, clue_prompt, clue_call));
  out.entries.push_back(
      entry_for(sample, field, stage, reconcile_backend, reconcile_prompt, reconcile_call));
  return out;
}

void Pipeline::commit_prelabel(SampleRecord& sample, Modality modality, StageOutput output) {
  for (auto& entry : output.entries) {
    entry.timestamp = sample.next_timestamp();
    sample.provenance.push_back(std::move(entry));
  }
  (modality == Modality::kAudio ? sample.audio_desc : sample.video_desc) = std::move(output.value);
}

std::string Pipeline::prelabel_modality(SampleRecord& sample, Modality modality) {
  auto& slot = modality == Modality::kAudio ? sample.audio_desc : sample.video_desc;
  if (config_.resume && slot) return *slot;
  StageOutput out = compute_prelabel(sample, modality);
  std::string value = out.value;
  commit_prelabel(sample, modality, std::move(out));
  return value;
}

std::string Pipeline::merge_clues(SampleRecord& sample) {
  if (config_.resume && sample.merged_desc_en) return *sample.merged_desc_en;
  if (!sample.audio_desc || !sample.video_desc) {
    std::string missing = !sample.audio_desc ? "audio_desc" : "video_desc";
    throw MissingPrerequisite("sample '" + sample.sample_id + "': merge needs " + missing);
  }
  const BackendSpec& backend = gateway_.backend(config_.merge_backend);
  const PromptTemplate& prompt = config_.prompts.get(prompt_ids::kMerge);
  Completion completion;
  std::string merged = call(sample, "merge", backend, prompt,
                            {{"audio_desc", *sample.audio_desc},
                             {"video_desc", *sample.video_desc},
                             {"subtitle", sample.subtitle()}},
                            &completion);
  sample.provenance.push_back(entry_for(sample, "merged_desc_en", "merge", backend, prompt, completion));
  sample.merged_desc_en = merged;
  return merged;
}

std::string Pipeline::disambiguate(SampleRecord& sample) {
  if (!sample.merged_desc_en) {
    throw MissingPrerequisite("sample '" + sample.sample_id + "': disambiguation needs merged_desc_en");
  }
  if (sample.has_stage("disambiguate") && (config_.resume || !config_.disambiguate)) {
    return *sample.merged_desc_en;
  }
  if (!config_.disambiguate) {
    ProvenanceEntry skipped;
    skipped.field = "merged_desc_en";
    skipped.stage = "disambiguate";
    skipped.note = "skipped: disambiguation disabled";
    skipped.timestamp = sample.next_timestamp();
    if (config_.record_wall_time) skipped.wall_time = text::utc_now_iso8601();
    sample.provenance.push_back(std::move(skipped));
    return *sample.merged_desc_en;
  }
  const BackendSpec& backend = gateway_.backend(config_.disambiguate_backend);
  const PromptTemplate& prompt = config_.prompts.get(prompt_ids::kDisambiguate);
  Completion completion;
  std::string revised = call(sample, "disambiguate", backend, prompt,
                             {{"subtitle", sample.subtitle()}, {"description", *sample.merged_desc_en}},
                             &completion);
  ProvenanceEntry entry =
      entry_for(sample, "merged_desc_en", "disambiguate", backend, prompt, completion);
  entry.pre_digest = text::sha256_hex(*sample.merged_desc_en);
  entry.post_digest = text::sha256_hex(revised);
  sample.provenance.push_back(std::move(entry));
  sample.merged_desc_en = revised;
  return revised;
}

std::string Pipeline::translate(SampleRecord& sample, Language target) {
  auto& target_slot = target == Language::kZh ? sample.merged_desc_zh : sample.merged_desc_en;
  auto& source_slot = target == Language::kZh ? sample.merged_desc_en : sample.merged_desc_zh;
  const Language source = target == Language::kZh ? Language::kEn : Language::kZh;
  if (config_.resume && target_slot && sample.has_stage("translate")) return *target_slot;
  if (!source_slot) {
    throw MissingPrerequisite("sample '" + sample.sample_id + "': translation needs the " +
                              language_name(source) + " description");
  }
  const BackendSpec& backend = gateway_.backend(config_.translate_backend);
  const PromptTemplate& prompt = config_.prompts.get(prompt_ids::kTranslate);
  Completion completion;
  std::string translated = call(sample, "translate", backend, prompt,
                                {{"source_language", language_name(source)},
                                 {"target_language", language_name(target)},
                                 {"text", *source_slot}},
                                &completion);
  const std::string field = target == Language::kZh ? "merged_desc_zh" : "merged_desc_en";
  sample.provenance.push_back(entry_for(sample, field, "translate", backend, prompt, completion));
  target_slot = translated;
  return translated;
}

std::vector<EmotionLabel> Pipeline::extract_labels(SampleRecord& sample, Language language) {
  auto& slot = language == Language::kEn ? sample.labels_en : sample.labels_zh;
  if (config_.resume && slot) return *slot;
  const auto& description = language == Language::kEn ? sample.merged_desc_en : sample.merged_desc_zh;
  const std::string field = language == Language::kEn ? "labels_en" : "labels_zh";
  if (!description) {
    throw MissingPrerequisite("sample '" + sample.sample_id + "': extraction needs a description");
  }
  std::vector<EmotionLabel> labels;
  try {
    labels = extractor_->extract(*description, language);
  } catch (const Error& e) {
    fail_stage(sample, "extract", e.code(), e.what());
  }
  ProvenanceEntry entry;
  entry.field = field;
  entry.stage = "extract";
  entry.backend = extractor_->name();
  entry.prompt_id = extractor_->name() == "lexicon" ? "lexicon" : std::string(prompt_ids::kExtractLabels);
  entry.prompt_version = extractor_->version();
  entry.timestamp = sample.next_timestamp();
  if (config_.record_wall_time) entry.wall_time = text::utc_now_iso8601();
  sample.provenance.push_back(std::move(entry));
  slot = labels;
  return labels;
}

bool Pipeline::is_complete(const SampleRecord& sample) {
  return sample.labels_en.has_value() && sample.labels_zh.has_value();
}

void Pipeline::process(SampleRecord& sample,
                       const std::function<void(const SampleRecord&)>& after_stage) {
  auto stage_done = [&] {
    if (after_stage) after_stage(sample);
  };
  const bool need_audio = !(config_.resume && sample.audio_desc);
  const bool need_video = !(config_.resume && sample.video_desc);

  // Both pre-label calls read the record concurrently; writes happen after
  // both have returned, audio first, so provenance order is fixed.
  std::optional<StageOutput> audio;
  std::optional<StageOutput> video;
  std::exception_ptr audio_error;
  std::exception_ptr video_error;
  std::future<StageOutput> video_future;
  if (need_video && need_audio) {
    video_future = std::async(std::launch::async,
                              [this, &sample] { return compute_prelabel(sample, Modality::kVideo); });
  }
  if (need_audio) {
    try {
      audio = compute_prelabel(sample, Modality::kAudio);
    } catch (...) {
      audio_error = std::current_exception();
    }
  }
  if (need_video) {
    try {
      video = video_future.valid() ? video_future.get() : compute_prelabel(sample, Modality::kVideo);
    } catch (...) {
      video_error = std::current_exception();
    }
  }
  if (audio) {
    commit_prelabel(sample, Modality::kAudio, std::move(*audio));
    stage_done();
  }
  if (video) {
    commit_prelabel(sample, Modality::kVideo, std::move(*video));
    stage_done();
  }
  if (audio_error) std::rethrow_exception(audio_error);
  if (video_error) std::rethrow_exception(video_error);

  const bool had_merge = sample.merged_desc_en.has_value() && config_.resume;
  merge_clues(sample);
  if (!had_merge) stage_done();
  disambiguate(sample);
  stage_done();
  translate(sample, Language::kZh);
  stage_done();
  extract_labels(sample, Language::kEn);
  extract_labels(sample, Language::kZh);
  stage_done();
}

PipelineResult Pipeline::run(const std::vector<SampleRecord>& manifest, const RunOptions& options) {
  {
    std::set<std::string> ids;
    for (const auto& stub : manifest) {
      if (stub.sample_id.empty()) throw ManifestInvalid("empty sample_id in manifest");
      if (!ids.insert(stub.sample_id).second) {
        throw ManifestInvalid("duplicate sample_id '" + stub.sample_id + "'");
      }
    }
  }
  const bool persist = !options.output_path.empty();
  std::filesystem::path journal_path = options.journal_path;
  std::filesystem::path failures_path = options.failures_path;
  if (persist && journal_path.empty()) {
    journal_path = options.output_path;
    journal_path += ".journal.jsonl";
  }
  if (persist && failures_path.empty()) {
    failures_path = options.output_path;
    failures_path += ".failures.jsonl";
  }

  std::map<std::string, SampleRecord> prior;
  if (persist && config_.resume) {
    if (std::filesystem::exists(options.output_path)) {
      auto existing =
          parse_dataset(text::read_file(options.output_path), "output", DatasetKind::kCoarse);
      for (const auto& r : existing.records()) prior[r.sample_id] = r;
    }
    if (std::filesystem::exists(journal_path)) {
      auto lines = text::split_lines(text::read_file(journal_path));
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::is_blank(lines[i])) continue;
        try {
          SampleRecord r = record_from_json(nlohmann::json::parse(lines[i]), i + 1);
          if (auto it = prior.find(r.sample_id); it != prior.end() && is_complete(it->second)) {
            continue;
          }
          prior[r.sample_id] = std::move(r);
        } catch (const std::exception&) {
          // A torn final line from an interrupted write.
        }
      }
    }
  } else if (persist && std::filesystem::exists(journal_path)) {
    std::filesystem::remove(journal_path);
  }

  const std::size_t n = manifest.size();
  std::vector<std::optional<SampleRecord>> completed(n);
  std::vector<std::optional<FailureEntry>> failed(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done_count{0};
  std::atomic<std::size_t> reused{0};
  std::atomic<bool> abort{false};
  std::exception_ptr abort_error;
  std::mutex abort_mutex;
  std::mutex journal_mutex;
  std::ofstream journal;
  if (persist) {
    if (journal_path.has_parent_path()) std::filesystem::create_directories(journal_path.parent_path());
    journal.open(journal_path, std::ios::app | std::ios::binary);
    if (!journal) throw IoError("cannot open journal " + journal_path.string());
  }
  auto commit = [&](const SampleRecord& record) {
    if (!persist) return;
    std::string line = to_jsonl_line(record) + "\n";
    std::lock_guard lock(journal_mutex);
    journal.write(line.data(), static_cast<std::streamsize>(line.size()));
    journal.flush();
  };

  auto worker = [&] {
    while (!abort.load()) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const auto& stub = manifest[i];
      SampleRecord record = stub;
      if (auto it = prior.find(stub.sample_id); it != prior.end()) record = it->second;
      if (is_complete(record)) {
        completed[i] = std::move(record);
        ++reused;
        continue;
      }
      try {
        process(record, commit);
        completed[i] = std::move(record);
      } catch (const StageFailed& e) {
        failed[i] = FailureEntry{e.sample_id(), e.stage(), e.code(), e.cause()};
        continue;
      } catch (const Error& e) {
        failed[i] = FailureEntry{stub.sample_id, "pipeline", e.code(), e.what()};
        continue;
      }
      std::size_t count = ++done_count;
      if (options.on_sample_complete) {
        try {
          options.on_sample_complete(count);
        } catch (...) {
          std::lock_guard lock(abort_mutex);
          if (!abort_error) abort_error = std::current_exception();
          abort = true;
          return;
        }
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::max(1, config_.parallelism));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, std::max<std::size_t>(n, 1)); ++t) {
    pool.emplace_back(worker);
  }
  for (auto& thread : pool) thread.join();
  if (journal.is_open()) journal.close();
  if (abort_error) std::rethrow_exception(abort_error);

  PipelineResult result;
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    if (completed[i]) records.push_back(std::move(*completed[i]));
    if (failed[i]) result.failures.push_back(std::move(*failed[i]));
  }
  result.reused = reused.load();
  std::string name = persist ? options.output_path.stem().string() : std::string("pipeline");
  result.dataset = DatasetHandle(name, DatasetKind::kCoarse, std::move(records));

  if (persist) {
    save_dataset(result.dataset, options.output_path);
    std::string report;
    for (const auto& f : result.failures) report += f.to_json().dump() + "\n";
    text::write_file_atomic(failures_path, report);
    if (result.failures.empty()) std::filesystem::remove(journal_path);
  }
  return result;
}

}  // namespace emer
