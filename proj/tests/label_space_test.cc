#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "emer/errors.h"
#include "emer/label_space.h"
#include "support.h"

namespace emer {
namespace {

TEST(NormalizeLabel, Examples) {
  EXPECT_EQ(normalize_label("  Happy ", Language::kEn).text, "happy");
  EXPECT_EQ(normalize_label("开心", Language::kZh).text, "开心");
  EXPECT_EQ(normalize_label("JOY  FUL", Language::kEn).text, "joy ful");
  EXPECT_EQ(normalize_label("  开心  ", Language::kZh).text, "开心");
}

TEST(NormalizeLabel, ChineseKeepsCase) {
  EXPECT_EQ(normalize_label("OK 开心", Language::kZh).text, "OK 开心");
}

TEST(NormalizeLabel, BlankThrows) {
  EXPECT_THROW(normalize_label("   ", Language::kEn), EmptyLabel);
  EXPECT_THROW(normalize_label("", Language::kZh), EmptyLabel);
  EXPECT_THROW(normalize_label("\t\xE3\x80\x80", Language::kZh), EmptyLabel);
}

TEST(NormalizeLabel, Idempotent) {
  std::mt19937 rng(7);
  const std::vector<std::string> pieces = {"A", "b", " ", "\t", "\xC3\x89", "e\xCC\x81", "开", "心", "  ",
                                           "Joy", "\xE3\x80\x80"};
  for (int i = 0; i < 500; ++i) {
    std::string raw = "x";
    for (int k = 0; k < 6; ++k) raw += pieces[rng() % pieces.size()];
    for (auto lang : {Language::kEn, Language::kZh}) {
      auto once = normalize_label(raw, lang);
      EXPECT_EQ(normalize_label(once.text, lang), once) << raw;
    }
  }
}

TEST(NormalizeLabel, NfcEquivalentFormsMatch) {
  EXPECT_EQ(normalize_label("e\xCC\x81mu", Language::kEn), normalize_label("\xC3\x89MU", Language::kEn));
}

TEST(NormalizeLabels, DedupsKeepingOrder) {
  auto labels = normalize_labels({"Sad", " happy", "sad ", "", "Happy"}, Language::kEn);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[0].text, "sad");
  EXPECT_EQ(labels[1].text, "happy");
}

TEST(GroupMap, RejectsNonPartition) {
  EXPECT_THROW(GroupMap(Language::kEn, GroupSource::kLexicon, "v", {{"a"}, {}}), Error);
  EXPECT_THROW(GroupMap(Language::kEn, GroupSource::kLexicon, "v", {{"a"}, {"a"}}), Error);
}

TEST(GroupMap, ContiguousIdsAndLookup) {
  GroupMap map(Language::kEn, GroupSource::kLlm, "group@v1", {{"happy", "joyful"}, {"angry"}});
  EXPECT_EQ(map.group_count(), 2u);
  EXPECT_EQ(map.find("happy"), 0u);
  EXPECT_EQ(map.find("joyful"), 0u);
  EXPECT_EQ(map.find("angry"), 1u);
  EXPECT_FALSE(map.find("sad").has_value());
  EXPECT_EQ(map.vocabulary(), (std::set<std::string>{"angry", "happy", "joyful"}));
}

TEST(GroupMap, OovExtensionIsRecorded) {
  GroupMap map(Language::kEn, GroupSource::kLexicon, "v", {{"happy"}});
  auto sad = normalize_label("sad", Language::kEn);
  GroupId id = map.lookup_or_extend(sad);
  EXPECT_EQ(id, 1u);
  EXPECT_EQ(map.lookup_or_extend(sad), 1u);
  EXPECT_EQ(map.oov_extensions(), std::vector<std::string>{"sad"});
  EXPECT_EQ(map.vocabulary().count("sad"), 0u);
}

TEST(GroupMap, ConcurrentExtensionIsConsistent) {
  GroupMap map(Language::kEn, GroupSource::kLexicon, "v", {{"happy"}});
  std::vector<std::thread> threads;
  std::vector<std::vector<GroupId>> seen(8);
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 200; ++i) {
        auto label = normalize_label("label" + std::to_string(i % 50), Language::kEn);
        seen[t].push_back(map.lookup_or_extend(label));
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(map.group_count(), 51u);
  for (int t = 0; t < 8; ++t) {
    for (int i = 0; i < 200; ++i) {
      EXPECT_EQ(seen[t][i], *map.find("label" + std::to_string(i % 50)));
    }
  }
}

TEST(GroupMap, JsonRoundTrip) {
  GroupMap map(Language::kZh, GroupSource::kLlm, "group@v1/gpt", {{"开心", "高兴"}, {"生气"}});
  auto back = GroupMap::from_json(nlohmann::json::parse(map.to_json().dump()));
  EXPECT_EQ(back.digest(), map.digest());
  EXPECT_EQ(back.find("高兴"), 0u);
  EXPECT_EQ(back.source(), GroupSource::kLlm);
}

TEST(MapToGroups, SetSemantics) {
  GroupMap map(Language::kEn, GroupSource::kLexicon, "v", {{"happy", "joyful"}, {"angry"}});
  auto set = map_to_groups(testing::en_labels({"happy", "joyful", "angry"}), map, LabelOrigin::kAnnotated);
  EXPECT_EQ(set.group_ids, (std::set<GroupId>{0, 1}));
  EXPECT_EQ(set.origin, LabelOrigin::kAnnotated);
  EXPECT_TRUE(map_to_groups({}, map).empty());
}

TEST(Lexicon, ParsesLinesAndComments) {
  auto lex = Lexicon::parse("# comment\nhappy, joyful\n\n开心，高兴 # trailing\nangry\n", Language::kEn);
  ASSERT_EQ(lex.groups().size(), 3u);
  EXPECT_EQ(lex.group_of("joyful"), 0u);
  EXPECT_EQ(lex.group_of("高兴"), 1u);
  EXPECT_EQ(lex.group_of("angry"), 2u);
  EXPECT_FALSE(lex.group_of("sad").has_value());
  EXPECT_EQ(lex.version().size(), 16u);
}

TEST(Lexicon, BuiltinTablesAreDisjoint) {
  for (auto lang : {Language::kEn, Language::kZh}) {
    const auto& lex = Lexicon::builtin(lang);
    std::set<std::string> seen;
    for (const auto& group : lex.groups()) {
      for (const auto& label : group) {
        EXPECT_TRUE(seen.insert(label).second) << label;
        EXPECT_EQ(normalize_label(label, lang).text, label);
      }
    }
    EXPECT_GT(seen.size(), 50u);
  }
}

TEST(BuildGroupMap, LexiconExample) {
  std::set<EmotionLabel> vocab;
  for (const auto& l : testing::en_labels({"happy", "joyful", "angry"})) vocab.insert(l);
  LexiconGrouper grouper(Lexicon::builtin(Language::kEn));
  auto map = build_group_map(vocab, grouper);
  EXPECT_EQ(map.find("happy"), 0u);
  EXPECT_EQ(map.find("joyful"), 0u);
  EXPECT_EQ(map.find("angry"), 1u);
  EXPECT_EQ(map.source(), GroupSource::kLexicon);
}

using Replies = std::vector<std::vector<std::string>>;

class ScriptedGrouper : public Grouper {
 public:
  explicit ScriptedGrouper(std::vector<std::vector<std::string>> reply) : reply_(std::move(reply)) {}
  std::vector<std::vector<std::string>> group(const std::vector<EmotionLabel>&) override {
    return reply_;
  }
  GroupSource source() const override { return GroupSource::kLlm; }
  std::string version() const override { return "scripted"; }

 private:
  std::vector<std::vector<std::string>> reply_;
};

std::set<EmotionLabel> vocab_of(std::vector<std::string> raw) {
  auto labels = testing::en_labels(raw);
  return {labels.begin(), labels.end()};
}

TEST(BuildGroupMap, OmittedLabelsBecomeSingletons) {
  ScriptedGrouper grouper(Replies{{"happy", "joyful"}});
  auto map = build_group_map(vocab_of({"happy", "joyful", "sad", "angry"}), grouper);
  EXPECT_EQ(map.group_count(), 3u);
  EXPECT_EQ(map.find("angry"), 1u);
  EXPECT_EQ(map.find("sad"), 2u);
}

TEST(BuildGroupMap, DuplicatePlacementKeepsFirst) {
  ScriptedGrouper grouper(Replies{{"happy", "joyful"}, {"joyful", "glad"}});
  auto map = build_group_map(vocab_of({"happy", "joyful", "glad"}), grouper);
  EXPECT_EQ(map.find("joyful"), 0u);
  EXPECT_EQ(map.find("glad"), 1u);
}

TEST(BuildGroupMap, IgnoresUnknownAndNormalizesReply) {
  ScriptedGrouper grouper(Replies{{" HAPPY ", "ecstatic"}, {"sad"}});
  auto map = build_group_map(vocab_of({"happy", "sad"}), grouper);
  EXPECT_EQ(map.find("happy"), 0u);
  EXPECT_FALSE(map.find("ecstatic").has_value());
  EXPECT_EQ(map.group_count(), 2u);
}

TEST(BuildGroupMap, TotalOnVocabulary) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> raw;
    for (int i = 0; i < 12; ++i) raw.push_back("l" + std::to_string(rng() % 20));
    std::vector<std::vector<std::string>> reply(3);
    for (int i = 0; i < 10; ++i) reply[rng() % 3].push_back("l" + std::to_string(rng() % 25));
    ScriptedGrouper grouper(reply);
    auto vocab = vocab_of(raw);
    auto map = build_group_map(vocab, grouper);
    auto table = map.snapshot();
    std::set<GroupId> used;
    for (const auto& label : vocab) {
      auto id = map.find(label.text);
      ASSERT_TRUE(id.has_value());
      used.insert(*id);
    }
    EXPECT_EQ(used.size(), map.group_count());
    EXPECT_EQ(*used.rbegin() + 1, map.group_count());
  }
}

TEST(BuildGroupMap, EmptyVocabularyThrows) {
  ScriptedGrouper grouper(Replies{});
  EXPECT_THROW(build_group_map({}, grouper), Error);
}

}  // namespace
}  // namespace emer
