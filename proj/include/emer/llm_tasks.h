#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "emer/gateway.h"
#include "emer/label_space.h"

namespace emer {

// Groups a vocabulary by asking a chat model with the grouping prompt and
// parsing its list-of-lists reply. Replies are cached through the gateway, so
// one vocabulary yields one frozen grouping per (prompt, model).
class LlmGrouper : public Grouper {
 public:
  // Requires spec.decode.temperature == 0 (ConfigError otherwise).
  LlmGrouper(Gateway& gateway, BackendSpec spec, PromptTemplate prompt);

  std::vector<std::vector<std::string>> group(
      const std::vector<EmotionLabel>& vocabulary) override;
  GroupSource source() const override { return GroupSource::kLlm; }
  std::string version() const override;

  // Separates cache entries, e.g. per repeated run.
  void set_cache_salt(std::string salt) { salt_ = std::move(salt); }
  const std::string& last_reply() const { return last_reply_; }

 private:
  Gateway& gateway_;
  BackendSpec spec_;
  PromptTemplate prompt_;
  std::string salt_;
  std::string last_reply_;
};

// Pulls open-vocabulary labels out of a free-text description.
class LabelExtractor {
 public:
  virtual ~LabelExtractor() = default;
  // `description` must be non-blank (Error "EmptyDescription" otherwise).
  virtual std::vector<EmotionLabel> extract(std::string_view description, Language language) = 0;
  virtual std::string name() const = 0;
  // Identifies the table or prompt version, for provenance.
  virtual std::string version() const = 0;
};

// Returns every lexicon surface form that occurs in the description, in order
// of first occurrence. English matches respect word boundaries; Chinese is a
// plain substring scan. A form nested inside a longer matched form is not
// reported separately.
class LexiconExtractor : public LabelExtractor {
 public:
  LexiconExtractor(const Lexicon& en, const Lexicon& zh) : en_(en), zh_(zh) {}
  LexiconExtractor() : LexiconExtractor(Lexicon::builtin(Language::kEn),
                                        Lexicon::builtin(Language::kZh)) {}

  std::vector<EmotionLabel> extract(std::string_view description, Language language) override;
  std::string name() const override { return "lexicon"; }
  std::string version() const override { return en_.version() + "/" + zh_.version(); }

 private:
  const Lexicon& en_;
  const Lexicon& zh_;
};

// Asks a chat model for a label list and parses it (JSON-style bracketed or
// comma separated). Throws ParseFailure for unreadable replies.
class LlmExtractor : public LabelExtractor {
 public:
  LlmExtractor(Gateway& gateway, BackendSpec spec, PromptTemplate prompt);

  std::vector<EmotionLabel> extract(std::string_view description, Language language) override;
  std::string name() const override { return spec_.name; }
  std::string version() const override { return prompt_.id + "@" + prompt_.version; }
  void set_cache_salt(std::string salt) { salt_ = std::move(salt); }

 private:
  Gateway& gateway_;
  BackendSpec spec_;
  PromptTemplate prompt_;
  std::string salt_;
};

}  // namespace emer
