#include "emer/record.h"

#include <algorithm>

#include "emer/errors.h"
#include "emer/text.h"

namespace emer {

const ProvenanceEntry* SampleRecord::provenance_for(std::string_view field) const {
  const ProvenanceEntry* found = nullptr;
  for (const auto& entry : provenance) {
    if (entry.field == field) found = &entry;
  }
  return found;
}

bool SampleRecord::has_stage(std::string_view stage) const {
  return std::any_of(provenance.begin(), provenance.end(),
                     [stage](const ProvenanceEntry& e) { return e.stage == stage; });
}

long long SampleRecord::next_timestamp() const {
  long long latest = 0;
  for (const auto& entry : provenance) latest = std::max(latest, entry.timestamp);
  return latest + 1;
}

const std::string& SampleRecord::subtitle() const {
  return subtitle_en.empty() ? subtitle_zh : subtitle_en;
}

namespace {

nlohmann::ordered_json optional_string(const std::optional<std::string>& value) {
  return value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json optional_labels(const std::optional<std::vector<EmotionLabel>>& labels) {
  if (!labels) return nullptr;
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& label : *labels) out.push_back(label.text);
  return out;
}

nlohmann::ordered_json provenance_json(const ProvenanceEntry& e) {
  nlohmann::ordered_json j;
  j["field"] = e.field;
  j["stage"] = e.stage;
  j["backend"] = e.backend;
  j["prompt_id"] = e.prompt_id;
  j["prompt_version"] = e.prompt_version;
  j["timestamp"] = e.timestamp;
  if (!e.cache_key.empty()) j["cache_key"] = e.cache_key;
  if (!e.note.empty()) j["note"] = e.note;
  if (!e.pre_digest.empty()) j["pre_digest"] = e.pre_digest;
  if (!e.post_digest.empty()) j["post_digest"] = e.post_digest;
  if (!e.wall_time.empty()) j["wall_time"] = e.wall_time;
  return j;
}

std::string require_string(const nlohmann::json& j, std::string_view field, std::size_t line,
                           bool required) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    if (required) throw SchemaViolation(line, std::string(field), "missing");
    return {};
  }
  if (!it->is_string()) throw SchemaViolation(line, std::string(field), "expected a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_field(const nlohmann::json& j, std::string_view field,
                                          std::size_t line) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaViolation(line, std::string(field), "expected a string");
  return it->get<std::string>();
}

std::optional<std::vector<EmotionLabel>> labels_field(const nlohmann::json& j,
                                                      std::string_view field,
                                                      Language language, std::size_t line) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) throw SchemaViolation(line, std::string(field), "expected a list");
  std::vector<std::string> raw;
  for (const auto& item : *it) {
    if (!item.is_string() || text::is_blank(item.get<std::string>())) {
      throw SchemaViolation(line, std::string(field), "labels must be non-empty strings");
    }
    raw.push_back(item.get<std::string>());
  }
  try {
    return normalize_labels(raw, language);
  } catch (const EmptyLabel&) {
    throw SchemaViolation(line, std::string(field), "blank label");
  }
}

}  // namespace

nlohmann::ordered_json to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["media_ref"] = r.media_ref;
  j["subtitle_zh"] = r.subtitle_zh;
  j["subtitle_en"] = r.subtitle_en;
  j["audio_desc"] = optional_string(r.audio_desc);
  j["video_desc"] = optional_string(r.video_desc);
  j["merged_desc_en"] = optional_string(r.merged_desc_en);
  j["merged_desc_zh"] = optional_string(r.merged_desc_zh);
  j["labels_en"] = optional_labels(r.labels_en);
  j["labels_zh"] = optional_labels(r.labels_zh);
  j["provenance"] = nlohmann::ordered_json::array();
  for (const auto& e : r.provenance) j["provenance"].push_back(provenance_json(e));
  return j;
}

std::string to_jsonl_line(const SampleRecord& record) { return to_json(record).dump(); }

SampleRecord record_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaViolation(line, "<record>", "expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kRecordFields), std::end(kRecordFields), key) ==
        std::end(kRecordFields)) {
      throw SchemaViolation(line, key, "unknown field");
    }
  }
  SampleRecord r;
  r.sample_id = require_string(j, "sample_id", line, true);
  if (r.sample_id.empty()) throw SchemaViolation(line, "sample_id", "empty");
  r.media_ref = require_string(j, "media_ref", line, false);
  r.subtitle_zh = require_string(j, "subtitle_zh", line, false);
  r.subtitle_en = require_string(j, "subtitle_en", line, false);
  r.audio_desc = optional_field(j, "audio_desc", line);
  r.video_desc = optional_field(j, "video_desc", line);
  r.merged_desc_en = optional_field(j, "merged_desc_en", line);
  r.merged_desc_zh = optional_field(j, "merged_desc_zh", line);
  r.labels_en = labels_field(j, "labels_en", Language::kEn, line);
  r.labels_zh = labels_field(j, "labels_zh", Language::kZh, line);

  if (auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw SchemaViolation(line, "provenance", "expected a list");
    for (const auto& e : *it) {
      if (!e.is_object()) throw SchemaViolation(line, "provenance", "entries must be objects");
      ProvenanceEntry entry;
      try {
        entry.field = e.at("field").get<std::string>();
        entry.stage = e.at("stage").get<std::string>();
        entry.backend = e.value("backend", "");
        entry.prompt_id = e.value("prompt_id", "");
        entry.prompt_version = e.value("prompt_version", "");
        entry.timestamp = e.at("timestamp").get<long long>();
        entry.cache_key = e.value("cache_key", "");
        entry.note = e.value("note", "");
        entry.pre_digest = e.value("pre_digest", "");
        entry.post_digest = e.value("post_digest", "");
        entry.wall_time = e.value("wall_time", "");
      } catch (const nlohmann::json::exception& ex) {
        throw SchemaViolation(line, "provenance", ex.what());
      }
      r.provenance.push_back(std::move(entry));
    }
  }
  return r;
}

}  // namespace emer
