#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace emer {

enum class Language { kEn, kZh };

std::string_view to_string(Language language);
// Accepts "en"/"zh" (case-insensitive) plus "english"/"chinese".
Language parse_language(std::string_view name);

// A normalized open-vocabulary emotion label. Construct through
// normalize_label(); the text is NFC, whitespace-collapsed and, for English,
// lowercased.
struct EmotionLabel {
  std::string text;
  Language language = Language::kEn;

  friend auto operator<=>(const EmotionLabel&, const EmotionLabel&) = default;
};

// Throws EmptyLabel when `raw` is blank.
EmotionLabel normalize_label(std::string_view raw, Language language);

// Normalizes each entry, dropping blanks and duplicates while keeping the
// first-seen order.
std::vector<EmotionLabel> normalize_labels(const std::vector<std::string>& raw,
                                           Language language);

using GroupId = std::uint32_t;

enum class GroupSource { kLlm, kLexicon, kMerged };

std::string_view to_string(GroupSource source);
GroupSource parse_group_source(std::string_view name);

struct GroupTable {
  // groups[id] lists the member label texts in insertion order.
  std::vector<std::vector<std::string>> groups;
  std::unordered_map<std::string, GroupId> index;
  // Labels added at scoring time because they were outside the vocabulary.
  std::vector<std::string> oov_extensions;
};

// The label -> group id function. Immutable after construction apart from
// out-of-vocabulary extension, which is serialized by a mutex while readers
// work lock-free on an atomically published snapshot.
class GroupMap {
 public:
  // `groups` must be a partition: non-empty groups, no label listed twice.
  GroupMap(Language language, GroupSource source, std::string prompt_version,
           std::vector<std::vector<std::string>> groups);

  GroupMap(const GroupMap& other);
  GroupMap& operator=(const GroupMap& other);

  Language language() const noexcept { return language_; }
  GroupSource source() const noexcept { return source_; }
  const std::string& prompt_version() const noexcept { return prompt_version_; }

  std::optional<GroupId> find(std::string_view label) const;
  // Returns the label's group, adding a fresh singleton group if the label
  // is not yet known.
  GroupId lookup_or_extend(const EmotionLabel& label);

  std::shared_ptr<const GroupTable> snapshot() const;
  std::size_t group_count() const { return snapshot()->groups.size(); }
  // The labels the map was built from (excludes OOV extensions).
  const std::set<std::string>& vocabulary() const noexcept { return vocabulary_; }
  std::vector<std::string> oov_extensions() const { return snapshot()->oov_extensions; }

  // {"version":..., "language":..., "source":..., "groups":[[...],...]}
  nlohmann::ordered_json to_json() const;
  static GroupMap from_json(const nlohmann::json& j);
  // sha256 of the serialized form.
  std::string digest() const;

 private:
  Language language_;
  GroupSource source_;
  std::string prompt_version_;
  std::set<std::string> vocabulary_;
  std::shared_ptr<const GroupTable> table_;
  mutable std::mutex extend_mutex_;
};

enum class LabelOrigin { kAnnotated, kPredicted };

struct GroupedLabelSet {
  std::set<GroupId> group_ids;
  LabelOrigin origin = LabelOrigin::kPredicted;

  std::size_t size() const noexcept { return group_ids.size(); }
  bool empty() const noexcept { return group_ids.empty(); }
};

// {G(x) | x in labels}; unknown labels extend `map` with singleton groups.
GroupedLabelSet map_to_groups(const std::vector<EmotionLabel>& labels, GroupMap& map,
                              LabelOrigin origin = LabelOrigin::kPredicted);

// Synonym table: one group per line, comma separated, '#' comments.
class Lexicon {
 public:
  Lexicon() = default;
  static Lexicon parse(std::string_view content, Language language);
  static Lexicon load(const std::string& path, Language language);
  // The table shipped with the library.
  static const Lexicon& builtin(Language language);

  Language language() const noexcept { return language_; }
  const std::vector<std::vector<std::string>>& groups() const noexcept { return groups_; }
  // Index of the line holding `label`, if any.
  std::optional<std::size_t> group_of(std::string_view label) const;
  // All surface forms, in table order.
  std::vector<std::string> surface_forms() const;
  // Content digest; identifies the table version.
  const std::string& version() const noexcept { return version_; }

 private:
  Language language_ = Language::kEn;
  std::vector<std::vector<std::string>> groups_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string version_;
};

// Produces a partition of a vocabulary. Implementations may omit labels or
// list them more than once; build_group_map repairs both.
class Grouper {
 public:
  virtual ~Grouper() = default;
  // `vocabulary` is sorted and duplicate free.
  virtual std::vector<std::vector<std::string>> group(
      const std::vector<EmotionLabel>& vocabulary) = 0;
  virtual GroupSource source() const = 0;
  virtual std::string version() const = 0;
};

// Deterministic grouping from a synonym table. Groups are numbered in table
// order; labels absent from the table become singletons after them.
class LexiconGrouper : public Grouper {
 public:
  explicit LexiconGrouper(const Lexicon& lexicon) : lexicon_(lexicon) {}

  std::vector<std::vector<std::string>> group(
      const std::vector<EmotionLabel>& vocabulary) override;
  GroupSource source() const override { return GroupSource::kLexicon; }
  std::string version() const override { return "lexicon:" + lexicon_.version(); }

 private:
  const Lexicon& lexicon_;
};

// Covers every vocabulary label: reply labels are normalized, labels outside
// the vocabulary are ignored, a label placed in several groups stays in the
// first, and omitted labels get fresh singleton groups in sorted order.
GroupMap build_group_map(const std::set<EmotionLabel>& vocabulary, Grouper& grouper);

}  // namespace emer
