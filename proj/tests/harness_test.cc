#include <gtest/gtest.h>

#include <atomic>

#include "emer/errors.h"
#include "emer/harness.h"
#include "emer/text.h"
#include "support.h"

namespace emer {
namespace {

std::vector<Prediction> label_predictions(const DatasetHandle& handle) {
  std::vector<Prediction> out;
  for (const auto& r : handle.records()) {
    std::vector<std::string> labels;
    for (const auto& l : *r.labels_en) labels.push_back(l.text);
    out.push_back(Prediction{r.sample_id, labels});
  }
  return out;
}

// Run 1 groups synonyms together, run 2 keeps every label alone.
class ScriptedGrouper : public Grouper {
 public:
  explicit ScriptedGrouper(int run) : run_(run) {}
  std::vector<std::vector<std::string>> group(const std::vector<EmotionLabel>& vocab) override {
    if (run_ == 1) return {{"happy", "joyful"}, {"sad", "unhappy"}};
    std::vector<std::vector<std::string>> out;
    for (const auto& l : vocab) out.push_back({l.text});
    return out;
  }
  GroupSource source() const override { return GroupSource::kLlm; }
  std::string version() const override { return "scripted-" + std::to_string(run_); }

 private:
  int run_;
};

TEST(Harness, PerfectSystemScoresHundred) {
  auto handle = testing::synthetic_fine(20);
  ExperimentConfig cfg;
  cfg.system_name = "perfect";
  auto result = run_experiment(cfg, handle, label_predictions(handle));
  EXPECT_EQ(result.metrics.avg.format(), "100.00±0.00");
  EXPECT_EQ(result.metrics.accuracy_s.format(), "100.00±0.00");
  EXPECT_EQ(result.metrics.recall_s.format(), "100.00±0.00");
  EXPECT_EQ(result.runs.size(), 2u);
  EXPECT_EQ(result.coverage.scored, 20u);
}

TEST(Harness, DisjointSystemScoresZero) {
  auto handle = testing::synthetic_fine(10);
  std::vector<Prediction> preds;
  for (const auto& r : handle.records()) {
    preds.push_back(Prediction{r.sample_id, std::vector<std::string>{"bored"}});
  }
  ExperimentConfig cfg;
  cfg.system_name = "disjoint";
  auto result = run_experiment(cfg, handle, preds);
  EXPECT_EQ(result.metrics.avg.format(), "0.00±0.00");
}

TEST(Harness, SynonymsShareAGroup) {
  DatasetHandle handle("d", DatasetKind::kFine,
                       {testing::fine_record("a", {"happy"}), testing::fine_record("b", {"sad"})});
  std::vector<Prediction> preds = {{"a", std::vector<std::string>{"joyful"}},
                                   {"b", std::vector<std::string>{"unhappy", "bored"}}};
  ExperimentConfig cfg;
  cfg.n_runs = 1;
  auto result = run_experiment(cfg, handle, preds);
  // a: 1/1, 1/1; b: 1/2, 1/1.
  EXPECT_DOUBLE_EQ(result.runs[0].corpus.accuracy_s, 75.0);
  EXPECT_DOUBLE_EQ(result.runs[0].corpus.recall_s, 100.0);
  EXPECT_DOUBLE_EQ(result.runs[0].corpus.avg, 87.5);
}

TEST(Harness, RunVarianceComesFromGrouping) {
  DatasetHandle handle("d", DatasetKind::kFine,
                       {testing::fine_record("a", {"happy"}), testing::fine_record("b", {"sad"})});
  std::vector<Prediction> preds = {{"a", std::vector<std::string>{"joyful"}},
                                   {"b", std::vector<std::string>{"sad"}}};
  HarnessContext ctx;
  ctx.grouper_factory = [](const ExperimentConfig&, int run) {
    return std::make_unique<ScriptedGrouper>(run);
  };
  ExperimentConfig cfg;
  cfg.grouper = "scripted";
  auto result = run_experiment(cfg, handle, preds, ctx);
  ASSERT_EQ(result.runs.size(), 2u);
  EXPECT_DOUBLE_EQ(result.runs[0].corpus.avg, 100.0);
  EXPECT_DOUBLE_EQ(result.runs[1].corpus.avg, 50.0);
  EXPECT_EQ(result.metrics.avg.format(), "75.00±25.00");
  auto log = result.run_log();
  EXPECT_EQ(log["distinct_group_maps"], 2);
  EXPECT_EQ(log["variance_sources"][0], "grouping");
  EXPECT_EQ(log["runs"][1]["grouper"], "scripted-2");
  EXPECT_EQ(log["averaging"], "macro");
}

TEST(Harness, MissingPredictionsScoreEmpty) {
  auto handle = testing::synthetic_fine(4);
  auto preds = label_predictions(handle);
  preds.erase(preds.begin() + 1);
  preds.push_back(Prediction{"ghost", std::vector<std::string>{"happy"}});
  ExperimentConfig cfg;
  cfg.n_runs = 1;
  auto result = run_experiment(cfg, handle, preds);
  EXPECT_EQ(result.coverage.missing, 1u);
  EXPECT_EQ(result.coverage.extra, 1u);
  EXPECT_EQ(result.coverage.missing_ids, std::vector<std::string>{"s001"});
  EXPECT_EQ(result.metrics.avg.format(), "75.00±0.00");
}

TEST(Harness, FreeTextGoesThroughExtractor) {
  DatasetHandle handle("d", DatasetKind::kFine,
                       {testing::fine_record("a", {"happy", "surprised"})});
  std::vector<Prediction> preds = {
      {"a", std::string("The speaker sounds joyful and a little amazed.")}};
  ExperimentConfig cfg;
  cfg.n_runs = 1;
  auto result = run_experiment(cfg, handle, preds);
  EXPECT_EQ(result.metrics.avg.format(), "100.00±0.00");
}

TEST(Harness, ChineseColumn) {
  DatasetHandle handle("d", DatasetKind::kFine, {testing::fine_record("a", {"sad"}, {"开心"})});
  ExperimentConfig cfg;
  cfg.language = Language::kZh;
  cfg.n_runs = 1;
  auto result =
      run_experiment(cfg, handle, {Prediction{"a", std::vector<std::string>{"开心"}}});
  EXPECT_EQ(result.row().groups[0].name, "Chinese");
  EXPECT_EQ(result.metrics.avg.format(), "100.00±0.00");
}

TEST(Harness, SplitNeedsManifest) {
  auto handle = testing::synthetic_fine(10);
  ExperimentConfig cfg;
  cfg.split = "test";
  cfg.n_runs = 1;
  EXPECT_THROW(run_experiment(cfg, handle, label_predictions(handle)), MissingPrerequisite);
  HarnessContext ctx;
  ctx.split_manifest = split(handle, SplitSpec{7, 3, 1}).manifest;
  auto result = run_experiment(cfg, handle, label_predictions(handle), ctx);
  EXPECT_EQ(result.coverage.split_size, 3u);
  EXPECT_EQ(result.coverage.extra, 7u);
}

TEST(Harness, BadConfig) {
  auto handle = testing::synthetic_fine(3);
  ExperimentConfig cfg;
  cfg.n_runs = 0;
  EXPECT_THROW(run_experiment(cfg, handle, std::vector<Prediction>{}), ConfigError);
  cfg.n_runs = 1;
  cfg.grouper = "nope";
  EXPECT_THROW(run_experiment(cfg, handle, std::vector<Prediction>{}), ConfigError);
}

TEST(Harness, PredictionsFile) {
  testing::TempDir dir;
  text::write_file_atomic(dir / "p.jsonl",
                          "{\"sample_id\":\"s000\",\"output\":[\"happy\"]}\n"
                          "{\"sample_id\":\"s001\",\"output\":\"angry\"}\n"
                          "{\"sample_id\":\"s001\",\"output\":[\"angry\",\"frustrated\"]}\n");
  auto preds = load_predictions(dir / "p.jsonl");
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<std::vector<std::string>>(preds[1].output));
  EXPECT_THROW(load_predictions(dir / "none.jsonl"), PredictionsMissing);
  EXPECT_THROW(parse_predictions("{\"output\":[]}"), SchemaViolation);
  EXPECT_THROW(parse_predictions("{\"sample_id\":\"a\",\"output\":[1]}"), SchemaViolation);
}

TEST(Harness, ParallelScoringMatchesSerial) {
  auto handle = testing::synthetic_fine(60);
  std::vector<Prediction> preds;
  for (const auto& r : handle.records()) {
    preds.push_back(Prediction{r.sample_id, std::vector<std::string>{"happy", "bored"}});
  }
  ExperimentConfig cfg;
  cfg.n_runs = 1;
  auto serial = run_experiment(cfg, handle, preds);
  cfg.parallelism = 8;
  auto parallel = run_experiment(cfg, handle, preds);
  EXPECT_EQ(serial.runs[0].corpus.avg, parallel.runs[0].corpus.avg);
  EXPECT_EQ(serial.runs[0].group_map_digest, parallel.runs[0].group_map_digest);
}

TEST(Harness, BatchAndTable) {
  testing::TempDir dir;
  auto handle = testing::synthetic_fine(5);
  std::string perfect, empty;
  for (const auto& r : handle.records()) {
    nlohmann::json j = {{"sample_id", r.sample_id}, {"output", nlohmann::json::array()}};
    std::vector<std::string> labels;
    for (const auto& l : *r.labels_en) labels.push_back(l.text);
    perfect += nlohmann::json{{"sample_id", r.sample_id}, {"output", labels}}.dump() + "\n";
    empty += j.dump() + "\n";
  }
  text::write_file_atomic(dir / "perfect.jsonl", perfect);
  text::write_file_atomic(dir / "empty.jsonl", empty);

  std::vector<ExperimentConfig> configs(3);
  configs[0].system_name = "Empty";
  configs[0].predictions_path = dir / "empty.jsonl";
  configs[1].system_name = "Perfect";
  configs[1].predictions_path = dir / "perfect.jsonl";
  configs[2] = configs[1];
  configs[2].language = Language::kZh;
  auto results = run_batch(configs, handle);
  ASSERT_EQ(results.size(), 3u);
  EXPECT_EQ(results[0].metrics.avg.format(), "0.00±0.00");
  auto table = build_table(results, "t");
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[1].groups.size(), 2u);

  configs[1].predictions_path = dir / "missing.jsonl";
  EXPECT_THROW(run_batch(configs, handle), PredictionsMissing);
}

}  // namespace
}  // namespace emer
