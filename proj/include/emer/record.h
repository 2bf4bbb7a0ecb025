#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "emer/label_space.h"

namespace emer {

// One provenance event. `timestamp` is a per-record logical clock: each
// stage commit gets the next integer, so ordering is reproducible across
// runs. `wall_time` is only filled when wall-clock recording is enabled.
struct ProvenanceEntry {
  std::string field;
  std::string stage;
  std::string backend;
  std::string prompt_id;
  std::string prompt_version;
  long long timestamp = 0;
  std::string cache_key;
  std::string note;
  std::string pre_digest;
  std::string post_digest;
  std::string wall_time;

  friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

struct SampleRecord {
  std::string sample_id;
  std::string media_ref;
  std::string subtitle_zh;
  std::string subtitle_en;
  std::optional<std::string> audio_desc;
  std::optional<std::string> video_desc;
  std::optional<std::string> merged_desc_en;
  std::optional<std::string> merged_desc_zh;
  std::optional<std::vector<EmotionLabel>> labels_en;
  std::optional<std::vector<EmotionLabel>> labels_zh;
  std::vector<ProvenanceEntry> provenance;

  // Latest entry for `field`, if any.
  const ProvenanceEntry* provenance_for(std::string_view field) const;
  bool has_stage(std::string_view stage) const;
  long long next_timestamp() const;
  // Subtitle bound into prompts: English when present, else Chinese.
  const std::string& subtitle() const;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

// Schema field order; also the serialized key order.
inline constexpr std::string_view kRecordFields[] = {
    "sample_id",      "media_ref",      "subtitle_zh", "subtitle_en",
    "audio_desc",     "video_desc",     "merged_desc_en", "merged_desc_zh",
    "labels_en",      "labels_zh",      "provenance"};

nlohmann::ordered_json to_json(const SampleRecord& record);
// Throws SchemaViolation (with `line`) on missing/mistyped/unknown fields.
// Labels are normalized on the way in.
SampleRecord record_from_json(const nlohmann::json& j, std::size_t line);

// Single-line JSON, the JSONL representation.
std::string to_jsonl_line(const SampleRecord& record);

}  // namespace emer
