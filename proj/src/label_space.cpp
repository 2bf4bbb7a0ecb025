#include "emer/label_space.h"

#include <algorithm>
#include <atomic>
#include <cctype>

#include "emer/errors.h"
#include "emer/text.h"

namespace emer {

namespace detail {
extern const std::string_view kBuiltinLexiconEn;
extern const std::string_view kBuiltinLexiconZh;
}  // namespace detail

std::string_view to_string(Language language) {
  return language == Language::kEn ? "en" : "zh";
}

Language parse_language(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "en" || lower == "english") return Language::kEn;
  if (lower == "zh" || lower == "chinese") return Language::kZh;
  throw Error("UnknownLanguage", "unknown language '" + std::string(name) + "'");
}

EmotionLabel normalize_label(std::string_view raw, Language language) {
  std::string text = text::collapse_whitespace(text::nfc(raw));
  if (text.empty()) throw EmptyLabel(std::string(raw));
  if (language == Language::kEn) {
    // Lowercasing can produce decomposed sequences, so compose again.
    text = text::nfc(text::to_lower(text));
  }
  return EmotionLabel{std::move(text), language};
}

std::vector<EmotionLabel> normalize_labels(const std::vector<std::string>& raw,
                                           Language language) {
  std::vector<EmotionLabel> out;
  std::set<std::string> seen;
  for (const auto& r : raw) {
    if (text::is_blank(r)) continue;
    EmotionLabel label = normalize_label(r, language);
    if (seen.insert(label.text).second) out.push_back(std::move(label));
  }
  return out;
}

std::string_view to_string(GroupSource source) {
  switch (source) {
    case GroupSource::kLlm: return "llm";
    case GroupSource::kLexicon: return "lexicon";
    case GroupSource::kMerged: return "merged";
  }
  return "merged";
}

GroupSource parse_group_source(std::string_view name) {
  if (name == "llm") return GroupSource::kLlm;
  if (name == "lexicon") return GroupSource::kLexicon;
  if (name == "merged") return GroupSource::kMerged;
  throw Error("UnknownGroupSource", "unknown group source '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

GroupMap::GroupMap(Language language, GroupSource source, std::string prompt_version,
                   std::vector<std::vector<std::string>> groups)
    : language_(language), source_(source), prompt_version_(std::move(prompt_version)) {
  auto table = std::make_shared<GroupTable>();
  for (auto& group : groups) {
    if (group.empty()) throw Error("InvalidGroupMap", "empty group");
    auto id = static_cast<GroupId>(table->groups.size());
    for (const auto& label : group) {
      if (!table->index.emplace(label, id).second) {
        throw Error("InvalidGroupMap", "label '" + label + "' appears in two groups");
      }
      vocabulary_.insert(label);
    }
    table->groups.push_back(std::move(group));
  }
  table_ = std::move(table);
}

GroupMap::GroupMap(const GroupMap& other)
    : language_(other.language_),
      source_(other.source_),
      prompt_version_(other.prompt_version_),
      vocabulary_(other.vocabulary_),
      table_(other.snapshot()) {}

GroupMap& GroupMap::operator=(const GroupMap& other) {
  if (this != &other) {
    std::lock_guard lock(extend_mutex_);
    language_ = other.language_;
    source_ = other.source_;
    prompt_version_ = other.prompt_version_;
    vocabulary_ = other.vocabulary_;
    std::atomic_store(&table_, other.snapshot());
  }
  return *this;
}

std::shared_ptr<const GroupTable> GroupMap::snapshot() const {
  return std::atomic_load(&table_);
}

std::optional<GroupId> GroupMap::find(std::string_view label) const {
  auto table = snapshot();
  auto it = table->index.find(std::string(label));
  if (it == table->index.end()) return std::nullopt;
  return it->second;
}

GroupId GroupMap::lookup_or_extend(const EmotionLabel& label) {
  if (auto id = find(label.text)) return *id;
  std::lock_guard lock(extend_mutex_);
  auto current = snapshot();
  if (auto it = current->index.find(label.text); it != current->index.end()) {
    return it->second;
  }
  auto next = std::make_shared<GroupTable>(*current);
  auto id = static_cast<GroupId>(next->groups.size());
  next->groups.push_back({label.text});
  next->index.emplace(label.text, id);
  next->oov_extensions.push_back(label.text);
  std::atomic_store(&table_, std::shared_ptr<const GroupTable>(std::move(next)));
  return id;
}

nlohmann::ordered_json GroupMap::to_json() const {
  auto table = snapshot();
  nlohmann::ordered_json j;
  j["version"] = prompt_version_;
  j["language"] = to_string(language_);
  j["source"] = to_string(source_);
  j["groups"] = table->groups;
  j["oov_extensions"] = table->oov_extensions;
  return j;
}

GroupMap GroupMap::from_json(const nlohmann::json& j) {
  try {
    GroupMap map(parse_language(j.value("language", "en")),
                 parse_group_source(j.value("source", "merged")),
                 j.at("version").get<std::string>(),
                 j.at("groups").get<std::vector<std::vector<std::string>>>());
    if (j.contains("oov_extensions")) {
      auto oov = j.at("oov_extensions").get<std::vector<std::string>>();
      auto table = std::make_shared<GroupTable>(*map.snapshot());
      table->oov_extensions = oov;
      for (const auto& label : oov) map.vocabulary_.erase(label);
      map.table_ = std::move(table);
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw Error("InvalidGroupMap", std::string("malformed group map JSON: ") + e.what());
  }
}

std::string GroupMap::digest() const { return text::sha256_hex(to_json().dump()); }

GroupedLabelSet map_to_groups(const std::vector<EmotionLabel>& labels, GroupMap& map,
                              LabelOrigin origin) {
  GroupedLabelSet out;
  out.origin = origin;
  for (const auto& label : labels) out.group_ids.insert(map.lookup_or_extend(label));
  return out;
}

// ---------------------------------------------------------------------------

Lexicon Lexicon::parse(std::string_view content, Language language) {
  Lexicon lexicon;
  lexicon.language_ = language;
  lexicon.version_ = text::sha256_hex(content).substr(0, 16);
  for (const auto& raw_line : text::split_lines(content)) {
    std::string_view line = raw_line;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    std::vector<std::string> group;
    std::size_t start = 0;
    std::string normalized_line(line);
    // Full-width comma is accepted as a separator in Chinese tables.
    for (std::size_t p; (p = normalized_line.find("\xEF\xBC\x8C")) != std::string::npos;) {
      normalized_line.replace(p, 3, ",");
    }
    line = normalized_line;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string_view::npos) end = line.size();
      std::string_view item = line.substr(start, end - start);
      if (!text::is_blank(item)) {
        EmotionLabel label = normalize_label(item, language);
        if (!lexicon.index_.contains(label.text)) {
          lexicon.index_.emplace(label.text, lexicon.groups_.size());
          group.push_back(label.text);
        }
      }
      start = end + 1;
    }
    if (!group.empty()) lexicon.groups_.push_back(std::move(group));
  }
  return lexicon;
}

Lexicon Lexicon::load(const std::string& path, Language language) {
  return parse(text::read_file(path), language);
}

const Lexicon& Lexicon::builtin(Language language) {
  static const Lexicon en = parse(detail::kBuiltinLexiconEn, Language::kEn);
  static const Lexicon zh = parse(detail::kBuiltinLexiconZh, Language::kZh);
  return language == Language::kEn ? en : zh;
}

std::optional<std::size_t> Lexicon::group_of(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Lexicon::surface_forms() const {
  std::vector<std::string> out;
  for (const auto& group : groups_) out.insert(out.end(), group.begin(), group.end());
  return out;
}

std::vector<std::vector<std::string>> LexiconGrouper::group(
    const std::vector<EmotionLabel>& vocabulary) {
  std::map<std::size_t, std::vector<std::string>> by_line;
  std::vector<std::vector<std::string>> unknown;
  for (const auto& label : vocabulary) {
    if (auto line = lexicon_.group_of(label.text)) {
      by_line[*line].push_back(label.text);
    } else {
      unknown.push_back({label.text});
    }
  }
  std::vector<std::vector<std::string>> groups;
  for (auto& [line, members] : by_line) groups.push_back(std::move(members));
  for (auto& single : unknown) groups.push_back(std::move(single));
  return groups;
}

GroupMap build_group_map(const std::set<EmotionLabel>& vocabulary, Grouper& grouper) {
  if (vocabulary.empty()) {
    throw Error("EmptyVocabulary", "cannot group an empty vocabulary");
  }
  const Language language = vocabulary.begin()->language;
  std::vector<EmotionLabel> sorted(vocabulary.begin(), vocabulary.end());
  std::set<std::string> known;
  for (const auto& label : sorted) known.insert(label.text);

  std::vector<std::vector<std::string>> reply = grouper.group(sorted);

  std::set<std::string> assigned;
  std::vector<std::vector<std::string>> groups;
  for (const auto& raw_group : reply) {
    std::vector<std::string> members;
    for (const auto& raw : raw_group) {
      if (text::is_blank(raw)) continue;
      std::string label = normalize_label(raw, language).text;
      if (known.contains(label) && assigned.insert(label).second) {
        members.push_back(std::move(label));
      }
    }
    if (!members.empty()) groups.push_back(std::move(members));
  }
  for (const auto& label : sorted) {
    if (!assigned.contains(label.text)) groups.push_back({label.text});
  }
  return GroupMap(language, grouper.source(), grouper.version(), std::move(groups));
}

}  // namespace emer
