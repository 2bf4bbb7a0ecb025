#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "emer/errors.h"
#include "emer/metrics.h"

namespace emer {
namespace {

GroupedLabelSet groups(std::set<GroupId> ids, LabelOrigin origin = LabelOrigin::kPredicted) {
  return GroupedLabelSet{std::move(ids), origin};
}

TEST(ScorePair, Examples) {
  auto r = score_pair(groups({0, 1}, LabelOrigin::kAnnotated), groups({0}));
  EXPECT_DOUBLE_EQ(r.accuracy_s, 1.0);
  EXPECT_DOUBLE_EQ(r.recall_s, 0.5);
  EXPECT_DOUBLE_EQ(r.avg, 0.75);

  r = score_pair(groups({0}, LabelOrigin::kAnnotated), groups({0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(r.accuracy_s, 0.25);
  EXPECT_DOUBLE_EQ(r.recall_s, 1.0);

  r = score_pair(groups({3}, LabelOrigin::kAnnotated), groups({4}));
  EXPECT_EQ(r.avg, 0.0);
}

TEST(ScorePair, EmptyPredictionScoresZero) {
  auto r = score_pair(groups({0, 1}, LabelOrigin::kAnnotated), groups({}));
  EXPECT_EQ(r.accuracy_s, 0.0);
  EXPECT_EQ(r.recall_s, 0.0);
  EXPECT_EQ(r.avg, 0.0);
}

TEST(ScorePair, EmptyAnnotationThrows) {
  EXPECT_THROW(score_pair(groups({}, LabelOrigin::kAnnotated), groups({1})), EmptyAnnotation);
}

TEST(ScoreCorpus, MacroAverage) {
  std::vector<std::pair<GroupedLabelSet, GroupedLabelSet>> pairs = {
      {groups({0, 1}), groups({0})},  // 1, .5
      {groups({2}), groups({3})},     // 0, 0
  };
  auto r = score_corpus(pairs);
  EXPECT_DOUBLE_EQ(r.accuracy_s, 0.5);
  EXPECT_DOUBLE_EQ(r.recall_s, 0.25);
  EXPECT_DOUBLE_EQ(r.avg, 0.375);
  EXPECT_THROW(score_corpus({}), EmptyCorpus);
}

TEST(ScoreCorpus, OrderInvariantWithinTolerance) {
  std::mt19937 rng(3);
  std::vector<std::pair<GroupedLabelSet, GroupedLabelSet>> pairs;
  for (int i = 0; i < 200; ++i) {
    std::set<GroupId> y{static_cast<GroupId>(rng() % 6)}, p;
    for (int k = 0; k < 3; ++k) p.insert(rng() % 6);
    pairs.push_back({groups(y), groups(p)});
  }
  auto a = score_corpus(pairs);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  auto b = score_corpus(pairs);
  EXPECT_NEAR(a.avg, b.avg, 1e-12);
}

TEST(AggregateRuns, FormatsTableStyle) {
  auto agg = aggregate_runs({59.39, 59.55});
  EXPECT_EQ(agg.format(), "59.47±0.08");
  EXPECT_EQ(agg.n_runs, 2);
  EXPECT_EQ(aggregate_runs({61.0}).format(), "61.00±0.00");
  EXPECT_EQ(aggregate_runs({100.0, 100.0}).format(), "100.00±0.00");
  EXPECT_THROW(aggregate_runs({}), Error);
}

TEST(AggregateRuns, PopulationStd) {
  auto agg = aggregate_runs({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(agg.mean, 5.0);
  EXPECT_DOUBLE_EQ(agg.std, 2.0);
}

TEST(RoundPercent, TiesToEvenOnDecimalReading) {
  EXPECT_EQ(format_percent(0.125), "0.12");
  EXPECT_EQ(format_percent(0.135), "0.14");
  EXPECT_EQ(format_percent(2.675), "2.68");  // 2.675 is 2.67499.. in binary
  EXPECT_EQ(format_percent(59.47), "59.47");
  EXPECT_EQ(format_percent(0.0), "0.00");
  EXPECT_EQ(to_hundredths(64.56) - to_hundredths(28.64), 3592);
  EXPECT_EQ(to_hundredths(-1.005), -100);
}

}  // namespace
}  // namespace emer
