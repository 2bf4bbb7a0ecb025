#include "emer/llm_tasks.h"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "emer/errors.h"
#include "emer/reply_parser.h"
#include "emer/text.h"

namespace emer {

LlmGrouper::LlmGrouper(Gateway& gateway, BackendSpec spec, PromptTemplate prompt)
    : gateway_(gateway), spec_(std::move(spec)), prompt_(std::move(prompt)) {
  if (spec_.decode.temperature != 0.0) {
    throw ConfigError("backends." + spec_.name + ".temperature", 0,
                      "the grouping backend must decode with temperature 0");
  }
}

std::string LlmGrouper::version() const {
  return prompt_.id + "@" + prompt_.version + "/" + spec_.model_id;
}

std::vector<std::vector<std::string>> LlmGrouper::group(
    const std::vector<EmotionLabel>& vocabulary) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& label : vocabulary) labels.push_back(label.text);
  try {
    last_reply_ = gateway_.complete(spec_, prompt_, {{"emotions", labels.dump()}},
                                    CallOptions{.use_cache = true, .cache_salt = salt_});
  } catch (const ParseFailure&) {
    throw;
  } catch (const Error& e) {
    throw GrouperUnavailable("grouping backend '" + spec_.name + "' failed: " + e.code() +
                             ": " + e.what());
  }
  return parse_list_of_lists(last_reply_);
}

// ---------------------------------------------------------------------------

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_'; }

std::string normalized_text(std::string_view description, Language language) {
  std::string out = text::collapse_whitespace(text::nfc(description));
  if (language == Language::kEn) out = text::nfc(text::to_lower(out));
  return out;
}

void require_description(std::string_view description) {
  if (text::is_blank(description)) {
    throw Error("EmptyDescription", "cannot extract labels from an empty description");
  }
}

}  // namespace

std::vector<EmotionLabel> LexiconExtractor::extract(std::string_view description,
                                                    Language language) {
  require_description(description);
  const Lexicon& lexicon = language == Language::kEn ? en_ : zh_;
  const std::string haystack = normalized_text(description, language);

  struct Match {
    std::size_t begin;
    std::size_t end;
    const std::string* form;
  };
  std::vector<Match> matches;
  for (const auto& group : lexicon.groups()) {
    for (const auto& form : group) {
      for (std::size_t pos = haystack.find(form); pos != std::string::npos;
           pos = haystack.find(form, pos + 1)) {
        std::size_t end = pos + form.size();
        if (language == Language::kEn) {
          bool left_ok = pos == 0 || !is_word_byte(haystack[pos - 1]);
          bool right_ok = end == haystack.size() || !is_word_byte(haystack[end]);
          if (!left_ok || !right_ok) continue;
        }
        matches.push_back({pos, end, &form});
      }
    }
  }
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    return a.end > b.end;
  });

  std::vector<EmotionLabel> labels;
  std::set<std::string> seen;
  std::size_t covered_until = 0;
  bool any = false;
  for (const auto& m : matches) {
    if (any && m.end <= covered_until) continue;  // nested in a longer match
    covered_until = std::max(covered_until, m.end);
    any = true;
    if (seen.insert(*m.form).second) labels.push_back(EmotionLabel{*m.form, language});
  }
  return labels;
}

LlmExtractor::LlmExtractor(Gateway& gateway, BackendSpec spec, PromptTemplate prompt)
    : gateway_(gateway), spec_(std::move(spec)), prompt_(std::move(prompt)) {}

std::vector<EmotionLabel> LlmExtractor::extract(std::string_view description,
                                                Language language) {
  require_description(description);
  std::string reply = gateway_.complete(spec_, prompt_, {{"description", std::string(description)}},
                                        CallOptions{.use_cache = true, .cache_salt = salt_});
  return normalize_labels(parse_label_list(reply), language);
}

}  // namespace emer
