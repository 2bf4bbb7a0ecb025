#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "emer/record.h"

namespace emer {

enum class DatasetKind { kFine, kCoarse };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

// An ordered, immutable set of records with unique ids.
//
// Fine datasets carry ground-truth labels in both languages. Coarse datasets
// are pipeline output: merged descriptions require both clue descriptions and
// every populated stage field must have a provenance entry.
class DatasetHandle {
 public:
  DatasetHandle() = default;
  // Validates the kind invariants; throws SchemaViolation (line = 1-based
  // record position).
  DatasetHandle(std::string name, DatasetKind kind, std::vector<SampleRecord> records);

  const std::string& name() const noexcept { return name_; }
  DatasetKind kind() const noexcept { return kind_; }
  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const SampleRecord* find(std::string_view sample_id) const;

 private:
  std::string name_;
  DatasetKind kind_ = DatasetKind::kCoarse;
  std::vector<SampleRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parses JSONL. Without an explicit kind, a file whose records all lack
// provenance is treated as fine, otherwise as coarse.
DatasetHandle parse_dataset(std::string_view content, std::string name,
                            std::optional<DatasetKind> kind = std::nullopt);
DatasetHandle load_dataset(const std::filesystem::path& path,
                           std::optional<DatasetKind> kind = std::nullopt);

std::string serialize_dataset(const DatasetHandle& handle);
// Atomic (temp file + rename).
void save_dataset(const DatasetHandle& handle, const std::filesystem::path& path);

// Pipeline input: CSV with a header row or JSONL; columns sample_id,
// media_ref, subtitle_zh, subtitle_en. Throws ManifestInvalid.
std::vector<SampleRecord> parse_manifest(std::string_view content, bool csv);
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);

// RFC 4180 reader used for manifests and CSV reports.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

struct SplitSpec {
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::int64_t seed = 0;
};

struct SplitResult {
  DatasetHandle train;
  DatasetHandle test;
  // {"seed":..., "train":[ids], "test":[ids]}
  nlohmann::ordered_json manifest;
};

// Seeded Fisher-Yates shuffle (mt19937_64 with an unbiased bounded draw, so
// results are identical across standard libraries); the first train_count
// shuffled ids form the train side. Both sides keep the input record order.
// Throws CountMismatch unless train + test == size.
SplitResult split(const DatasetHandle& handle, const SplitSpec& spec);

// Permutation of [0, n) used by split().
std::vector<std::size_t> seeded_permutation(std::size_t n, std::int64_t seed);

// Restricts `handle` to the ids listed under `side` ("train"/"test") of a
// split manifest; "whole" returns the handle unchanged.
DatasetHandle select_split(const DatasetHandle& handle, const nlohmann::json& manifest,
                           std::string_view side);

struct DatasetStats {
  std::size_t count = 0;
  std::map<std::string, std::size_t> histogram_en;
  std::map<std::string, std::size_t> histogram_zh;
  // Fraction of records with each optional field populated.
  std::map<std::string, double> population;

  nlohmann::ordered_json to_json() const;
};

DatasetStats stats(const DatasetHandle& handle);

}  // namespace emer
