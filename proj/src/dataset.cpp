#include "emer/dataset.h"

#include <algorithm>
#include <random>
#include <set>

#include "emer/errors.h"
#include "emer/text.h"

namespace emer {

std::string_view to_string(DatasetKind kind) {
  return kind == DatasetKind::kFine ? "fine" : "coarse";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "fine") return DatasetKind::kFine;
  if (name == "coarse") return DatasetKind::kCoarse;
  throw Error("UnknownDatasetKind", "unknown dataset kind '" + std::string(name) + "'");
}

namespace {

constexpr std::string_view kStageFields[] = {"audio_desc",     "video_desc", "merged_desc_en",
                                             "merged_desc_zh", "labels_en",  "labels_zh"};

bool populated(const SampleRecord& r, std::string_view field) {
  if (field == "audio_desc") return r.audio_desc.has_value();
  if (field == "video_desc") return r.video_desc.has_value();
  if (field == "merged_desc_en") return r.merged_desc_en.has_value();
  if (field == "merged_desc_zh") return r.merged_desc_zh.has_value();
  if (field == "labels_en") return r.labels_en.has_value();
  if (field == "labels_zh") return r.labels_zh.has_value();
  return false;
}

void validate(const SampleRecord& r, DatasetKind kind, std::size_t line) {
  if (kind == DatasetKind::kFine) {
    if (!r.labels_en) throw SchemaViolation(line, "labels_en", "required in a fine dataset");
    if (!r.labels_zh) throw SchemaViolation(line, "labels_zh", "required in a fine dataset");
    return;
  }
  if (r.merged_desc_en && !(r.audio_desc && r.video_desc)) {
    throw SchemaViolation(line, "merged_desc_en", "present without both clue descriptions");
  }
  if (r.merged_desc_zh && !r.merged_desc_en) {
    throw SchemaViolation(line, "merged_desc_zh", "present without merged_desc_en");
  }
  for (auto field : kStageFields) {
    if (populated(r, field) && !r.provenance_for(field)) {
      throw SchemaViolation(line, std::string(field), "populated without a provenance entry");
    }
  }
}

}  // namespace

DatasetHandle::DatasetHandle(std::string name, DatasetKind kind, std::vector<SampleRecord> records)
    : name_(std::move(name)), kind_(kind), records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    validate(records_[i], kind_, i + 1);
    if (!index_.emplace(records_[i].sample_id, i).second) {
      throw SchemaViolation(i + 1, "sample_id",
                            "duplicate sample_id '" + records_[i].sample_id + "'");
    }
  }
}

const SampleRecord* DatasetHandle::find(std::string_view sample_id) const {
  auto it = index_.find(std::string(sample_id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

DatasetHandle parse_dataset(std::string_view content, std::string name,
                            std::optional<DatasetKind> kind) {
  std::vector<SampleRecord> records;
  std::vector<std::size_t> lines;
  std::set<std::string> seen;
  auto raw_lines = text::split_lines(content);
  for (std::size_t i = 0; i < raw_lines.size(); ++i) {
    const auto& raw = raw_lines[i];
    if (text::is_blank(raw)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaViolation(i + 1, "<record>", std::string("invalid JSON: ") + e.what());
    }
    SampleRecord record = record_from_json(j, i + 1);
    if (!seen.insert(record.sample_id).second) {
      throw SchemaViolation(i + 1, "sample_id", "duplicate sample_id '" + record.sample_id + "'");
    }
    records.push_back(std::move(record));
    lines.push_back(i + 1);
  }
  DatasetKind resolved = kind.value_or(
      std::all_of(records.begin(), records.end(),
                  [](const SampleRecord& r) { return r.provenance.empty(); }) &&
              !records.empty()
          ? DatasetKind::kFine
          : DatasetKind::kCoarse);
  // Re-run the kind checks with real file line numbers.
  for (std::size_t i = 0; i < records.size(); ++i) validate(records[i], resolved, lines[i]);
  return DatasetHandle(std::move(name), resolved, std::move(records));
}

DatasetHandle load_dataset(const std::filesystem::path& path, std::optional<DatasetKind> kind) {
  return parse_dataset(text::read_file(path), path.stem().string(), kind);
}

std::string serialize_dataset(const DatasetHandle& handle) {
  std::string out;
  for (const auto& record : handle.records()) {
    out += to_jsonl_line(record);
    out += '\n';
  }
  return out;
}

void save_dataset(const DatasetHandle& handle, const std::filesystem::path& path) {
  text::write_file_atomic(path, serialize_dataset(handle));
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        field_started = false;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ManifestInvalid("unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SampleRecord> parse_manifest(std::string_view content, bool csv) {
  std::vector<SampleRecord> stubs;
  auto add = [&stubs](SampleRecord r, std::size_t line) {
    if (r.sample_id.empty()) {
      throw ManifestInvalid("line " + std::to_string(line) + ": empty sample_id");
    }
    stubs.push_back(std::move(r));
  };

  if (csv) {
    auto rows = parse_csv(content);
    if (rows.empty()) return stubs;
    const auto& header = rows.front();
    auto column = [&header](std::string_view name) -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
      }
      return std::nullopt;
    };
    auto id_col = column("sample_id");
    if (!id_col) throw ManifestInvalid("CSV header lacks a sample_id column");
    auto media_col = column("media_ref");
    auto zh_col = column("subtitle_zh");
    auto en_col = column("subtitle_en");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.size() != header.size()) {
        throw ManifestInvalid("row " + std::to_string(i + 1) + " has " +
                              std::to_string(row.size()) + " fields, header has " +
                              std::to_string(header.size()));
      }
      SampleRecord r;
      r.sample_id = row[*id_col];
      if (media_col) r.media_ref = row[*media_col];
      if (zh_col) r.subtitle_zh = row[*zh_col];
      if (en_col) r.subtitle_en = row[*en_col];
      add(std::move(r), i + 1);
    }
  } else {
    auto lines = text::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (text::is_blank(lines[i])) continue;
      try {
        auto j = nlohmann::json::parse(lines[i]);
        SampleRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.media_ref = j.value("media_ref", "");
        r.subtitle_zh = j.value("subtitle_zh", "");
        r.subtitle_en = j.value("subtitle_en", "");
        add(std::move(r), i + 1);
      } catch (const nlohmann::json::exception& e) {
        throw ManifestInvalid("line " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }

  std::set<std::string> seen;
  for (const auto& r : stubs) {
    if (!seen.insert(r.sample_id).second) {
      throw ManifestInvalid("duplicate sample_id '" + r.sample_id + "'");
    }
  }
  return stubs;
}

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
  std::string content = text::read_file(path);
  bool csv = path.extension() == ".csv";
  return parse_manifest(content, csv);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> seeded_permutation(std::size_t n, std::int64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
  auto bounded = [&gen](std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t r;
    do {
      r = gen();
    } while (r < threshold);
    return r % bound;
  };
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

SplitResult split(const DatasetHandle& handle, const SplitSpec& spec) {
  if (spec.train_count + spec.test_count != handle.size()) {
    throw CountMismatch("train " + std::to_string(spec.train_count) + " + test " +
                        std::to_string(spec.test_count) + " != " +
                        std::to_string(handle.size()) + " records");
  }
  auto order = seeded_permutation(handle.size(), spec.seed);
  std::vector<bool> in_train(handle.size(), false);
  for (std::size_t i = 0; i < spec.train_count; ++i) in_train[order[i]] = true;

  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;
  nlohmann::ordered_json manifest;
  manifest["seed"] = spec.seed;
  manifest["train"] = nlohmann::ordered_json::array();
  manifest["test"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < handle.size(); ++i) {
    const auto& record = handle.records()[i];
    if (in_train[i]) {
      manifest["train"].push_back(record.sample_id);
      train.push_back(record);
    } else {
      manifest["test"].push_back(record.sample_id);
      test.push_back(record);
    }
  }
  return SplitResult{DatasetHandle(handle.name() + ".train", handle.kind(), std::move(train)),
                     DatasetHandle(handle.name() + ".test", handle.kind(), std::move(test)),
                     std::move(manifest)};
}

DatasetHandle select_split(const DatasetHandle& handle, const nlohmann::json& manifest,
                           std::string_view side) {
  if (side == "whole") return handle;
  if (side != "train" && side != "test") {
    throw Error("UnknownSplit", "unknown split '" + std::string(side) + "'");
  }
  std::set<std::string> ids;
  try {
    for (const auto& id : manifest.at(std::string(side))) ids.insert(id.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("InvalidSplitManifest", e.what());
  }
  std::vector<SampleRecord> kept;
  for (const auto& record : handle.records()) {
    if (ids.contains(record.sample_id)) kept.push_back(record);
  }
  if (kept.size() != ids.size()) {
    throw Error("InvalidSplitManifest", "split manifest names ids absent from " + handle.name());
  }
  return DatasetHandle(handle.name() + "." + std::string(side), handle.kind(), std::move(kept));
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json DatasetStats::to_json() const {
  nlohmann::ordered_json j;
  j["count"] = count;
  j["label_histogram"]["en"] = nlohmann::ordered_json::object();
  for (const auto& [label, n] : histogram_en) j["label_histogram"]["en"][label] = n;
  j["label_histogram"]["zh"] = nlohmann::ordered_json::object();
  for (const auto& [label, n] : histogram_zh) j["label_histogram"]["zh"][label] = n;
  j["population"] = nlohmann::ordered_json::object();
  for (const auto& [field, rate] : population) j["population"][field] = rate;
  return j;
}

DatasetStats stats(const DatasetHandle& handle) {
  DatasetStats s;
  s.count = handle.size();
  std::map<std::string, std::size_t> populated_counts;
  for (auto field : kStageFields) populated_counts[std::string(field)] = 0;
  for (const auto& r : handle.records()) {
    for (auto field : kStageFields) {
      if (populated(r, field)) ++populated_counts[std::string(field)];
    }
    if (r.labels_en) {
      for (const auto& label : *r.labels_en) ++s.histogram_en[label.text];
    }
    if (r.labels_zh) {
      for (const auto& label : *r.labels_zh) ++s.histogram_zh[label.text];
    }
  }
  if (s.count > 0) {
    for (const auto& [field, n] : populated_counts) {
      s.population[field] = static_cast<double>(n) / static_cast<double>(s.count);
    }
  }
  return s;
}

}  // namespace emer
