#include <gtest/gtest.h>

#include "emer/dataset.h"
#include "emer/errors.h"
#include "emer/pipeline.h"
#include "emer/text.h"
#include "support.h"

namespace emer {
namespace {

using testing::install_pipeline_mocks;
using testing::synthetic_manifest;

struct Rig {
  Gateway gateway{testing::fast_gateway_options()};
  testing::MockSet mocks = install_pipeline_mocks(gateway);
};

TEST(Pipeline, StageGraphOrder) {
  EXPECT_EQ(Pipeline::stage_graph(),
            (std::vector<std::string>{"prelabel_audio", "prelabel_video", "merge", "disambiguate",
                                      "translate", "extract"}));
}

TEST(Pipeline, ProcessFillsEveryField) {
  Rig rig;
  Pipeline pipeline(rig.gateway, rig.mocks.config);
  auto sample = synthetic_manifest(1)[0];
  pipeline.process(sample);
  ASSERT_TRUE(Pipeline::is_complete(sample));
  EXPECT_EQ(*sample.audio_desc, "clips/m000.mp4");
  EXPECT_EQ(*sample.merged_desc_en, "I am so happy to see you");
  EXPECT_EQ(*sample.merged_desc_zh, "见到你我很开心");
  EXPECT_EQ(sample.labels_en->at(0).text, "happy");
  EXPECT_EQ(sample.labels_zh->at(0).text, "开心");

  std::vector<std::string> stages;
  for (std::size_t i = 0; i < sample.provenance.size(); ++i) {
    stages.push_back(sample.provenance[i].stage);
    EXPECT_EQ(sample.provenance[i].timestamp, static_cast<long long>(i + 1));
    EXPECT_TRUE(sample.provenance[i].wall_time.empty());
  }
  EXPECT_EQ(stages, (std::vector<std::string>{"prelabel_audio_clues", "prelabel_audio",
                                              "prelabel_video_clues", "prelabel_video", "merge",
                                              "disambiguate", "translate", "extract", "extract"}));
  const auto* dis = sample.provenance_for("merged_desc_en");
  ASSERT_NE(dis, nullptr);
  EXPECT_EQ(dis->stage, "disambiguate");
  EXPECT_EQ(dis->pre_digest, text::sha256_hex("I am so happy to see you"));
  EXPECT_FALSE(sample.provenance_for("labels_en")->prompt_version.empty());
}

TEST(Pipeline, ReconcileStepUsesDisambiguationBackendByDefault) {
  Rig rig;
  Pipeline pipeline(rig.gateway, rig.mocks.config);
  auto sample = synthetic_manifest(1)[0];
  pipeline.prelabel_modality(sample, Modality::kAudio);
  EXPECT_EQ(rig.mocks["audio"].calls(), 1);
  EXPECT_EQ(rig.mocks["disambiguate"].calls(), 1);
  EXPECT_NE(rig.mocks["disambiguate"].prompts()[0].find("I am so happy to see you"), std::string::npos);
}

TEST(Pipeline, ReconcileWithModalityBackend) {
  Rig rig;
  auto config = rig.mocks.config;
  config.reconcile_with = ReconcileWith::kModalityBackend;
  Pipeline pipeline(rig.gateway, config);
  auto sample = synthetic_manifest(1)[0];
  pipeline.prelabel_modality(sample, Modality::kVideo);
  EXPECT_EQ(rig.mocks["video"].calls(), 2);
  EXPECT_EQ(rig.mocks["disambiguate"].calls(), 0);
}

TEST(Pipeline, DisambiguationCanBeSkipped) {
  Rig rig;
  auto config = rig.mocks.config;
  config.disambiguate = false;
  Pipeline pipeline(rig.gateway, config);
  auto sample = synthetic_manifest(1)[0];
  pipeline.prelabel_modality(sample, Modality::kAudio);
  pipeline.prelabel_modality(sample, Modality::kVideo);
  pipeline.merge_clues(sample);
  long long before = rig.mocks["disambiguate"].calls();
  EXPECT_EQ(pipeline.disambiguate(sample), *sample.merged_desc_en);
  EXPECT_EQ(rig.mocks["disambiguate"].calls(), before);
  EXPECT_EQ(sample.provenance.back().note, "skipped: disambiguation disabled");
}

TEST(Pipeline, MissingPrerequisites) {
  Rig rig;
  Pipeline pipeline(rig.gateway, rig.mocks.config);
  auto sample = synthetic_manifest(1)[0];
  EXPECT_THROW(pipeline.merge_clues(sample), MissingPrerequisite);
  EXPECT_THROW(pipeline.disambiguate(sample), MissingPrerequisite);
  EXPECT_THROW(pipeline.translate(sample, Language::kZh), MissingPrerequisite);
  sample.media_ref.clear();
  try {
    pipeline.prelabel_modality(sample, Modality::kAudio);
    FAIL();
  } catch (const StageFailed& e) {
    EXPECT_EQ(e.code(), "MissingPrerequisite");
    EXPECT_EQ(e.stage(), "prelabel_audio");
  }
  EXPECT_FALSE(sample.audio_desc.has_value());
  EXPECT_TRUE(sample.provenance.empty());
}

TEST(Pipeline, BackendFailureWrapsInStageFailed) {
  Rig rig;
  Pipeline pipeline(rig.gateway, rig.mocks.config);
  rig.mocks["merge"].fail_next(10, 400);
  auto sample = synthetic_manifest(1)[0];
  pipeline.prelabel_modality(sample, Modality::kAudio);
  pipeline.prelabel_modality(sample, Modality::kVideo);
  try {
    pipeline.merge_clues(sample);
    FAIL();
  } catch (const StageFailed& e) {
    EXPECT_EQ(e.stage(), "merge");
    EXPECT_EQ(e.code(), "BackendRejected");
  }
  EXPECT_FALSE(sample.merged_desc_en.has_value());
}

TEST(Pipeline, ValidateConfig) {
  Rig rig;
  auto config = rig.mocks.config;
  EXPECT_NO_THROW(config.validate(rig.gateway));
  config.merge_backend = "nope";
  EXPECT_THROW(config.validate(rig.gateway), ConfigError);

  Gateway gateway(testing::fast_gateway_options());
  auto mocks = install_pipeline_mocks(gateway);
  auto warm = std::make_shared<MockBackend>(std::map<std::string, std::string>{}, echo_last_placeholder());
  BackendSpec spec{"warm", "mock://warm", "m"};
  spec.decode.temperature = 0.7;
  gateway.add_backend(spec, warm);
  auto warm_config = mocks.config;
  warm_config.disambiguate_backend = "warm";
  EXPECT_THROW(warm_config.validate(gateway), ConfigError);
  warm_config.parallelism = 0;
  warm_config.disambiguate_backend = "disambiguate";
  EXPECT_THROW(warm_config.validate(gateway), ConfigError);
}

TEST(Pipeline, DuplicateIdsRejected) {
  Rig rig;
  Pipeline pipeline(rig.gateway, rig.mocks.config);
  auto manifest = synthetic_manifest(3);
  manifest[2].sample_id = manifest[0].sample_id;
  EXPECT_THROW(pipeline.run(manifest), ManifestInvalid);
}

std::string run_to_file(const std::filesystem::path& out, std::size_t n, int parallelism) {
  Rig rig;
  auto config = rig.mocks.config;
  config.parallelism = parallelism;
  Pipeline pipeline(rig.gateway, config);
  RunOptions options;
  options.output_path = out;
  pipeline.run(synthetic_manifest(n), options);
  return text::read_file(out);
}

TEST(PipelineRun, ByteIdenticalAcrossRunsAndParallelism) {
  testing::TempDir dir;
  auto a = run_to_file(dir / "a.jsonl", 24, 1);
  auto b = run_to_file(dir / "b.jsonl", 24, 1);
  auto c = run_to_file(dir / "c.jsonl", 24, 6);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  auto dataset = parse_dataset(a, "a");
  EXPECT_EQ(dataset.kind(), DatasetKind::kCoarse);
  EXPECT_EQ(dataset.size(), 24u);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.jsonl.journal.jsonl"));
}

TEST(PipelineRun, FaultIsolation) {
  testing::TempDir dir;
  Rig rig;
  auto config = rig.mocks.config;
  config.parallelism = 4;
  auto manifest = synthetic_manifest(30);
  std::set<std::string> doomed = {"m003", "m017", "m029"};
  rig.mocks["video"].fail_when(
      [&](const ChatRequest& r) {
        for (const auto& id : doomed) {
          if (r.prompt.find(id) != std::string::npos) return true;
        }
        return false;
      },
      400);
  Pipeline pipeline(rig.gateway, config);
  RunOptions options;
  options.output_path = dir / "out.jsonl";
  auto result = pipeline.run(manifest, options);
  std::set<std::string> failed;
  for (const auto& f : result.failures) {
    failed.insert(f.sample_id);
    EXPECT_EQ(f.stage, "prelabel_video");
    EXPECT_EQ(f.error, "BackendRejected");
  }
  EXPECT_EQ(failed, doomed);
  EXPECT_EQ(result.dataset.size(), 27u);
  EXPECT_EQ(text::split_lines(text::read_file(dir / "out.jsonl.failures.jsonl")).size(), 3u);
  auto reloaded = load_dataset(dir / "out.jsonl", DatasetKind::kCoarse);
  EXPECT_EQ(reloaded.size(), 27u);
  EXPECT_TRUE(std::filesystem::exists(dir / "out.jsonl.journal.jsonl"));
}

TEST(PipelineRun, CrashThenResumeMatchesCleanRun) {
  testing::TempDir dir;
  auto clean = run_to_file(dir / "clean.jsonl", 20, 1);

  auto out = dir / "crash.jsonl";
  {
    Rig rig;
    Pipeline pipeline(rig.gateway, rig.mocks.config);
    RunOptions options;
    options.output_path = out;
    options.on_sample_complete = [](std::size_t done) {
      if (done == 8) throw PipelineAborted("injected crash");
    };
    EXPECT_THROW(pipeline.run(synthetic_manifest(20), options), PipelineAborted);
    EXPECT_FALSE(std::filesystem::exists(out));
    EXPECT_TRUE(std::filesystem::exists(out.string() + ".journal.jsonl"));
  }
  Rig rig;
  auto config = rig.mocks.config;
  config.resume = true;
  Pipeline pipeline(rig.gateway, config);
  RunOptions options;
  options.output_path = out;
  auto result = pipeline.run(synthetic_manifest(20), options);
  EXPECT_EQ(result.reused, 8u);
  EXPECT_EQ(rig.mocks["merge"].calls(), 12);
  EXPECT_EQ(text::read_file(out), clean);

  // A second resume reuses everything.
  Rig again;
  Pipeline idle(again.gateway, config);
  auto second = idle.run(synthetic_manifest(20), options);
  EXPECT_EQ(second.reused, 20u);
  EXPECT_EQ(again.mocks.total_calls(), 0);
  EXPECT_EQ(text::read_file(out), clean);
}

TEST(PipelineRun, ResumePicksUpPartialSamplesFromJournal) {
  testing::TempDir dir;
  auto out = dir / "out.jsonl";
  auto manifest = synthetic_manifest(2);
  {
    Rig rig;
    Pipeline pipeline(rig.gateway, rig.mocks.config);
    auto partial = manifest[0];
    pipeline.prelabel_modality(partial, Modality::kAudio);
    pipeline.prelabel_modality(partial, Modality::kVideo);
    // Second line is torn, as after a crash mid-write.
    text::write_file_atomic(out.string() + ".journal.jsonl", to_jsonl_line(partial) + "\n{\"sample_id\": \"m0");
  }
  Rig rig;
  auto config = rig.mocks.config;
  config.resume = true;
  Pipeline pipeline(rig.gateway, config);
  RunOptions options;
  options.output_path = out;
  auto result = pipeline.run(manifest, options);
  EXPECT_TRUE(result.failures.empty());
  EXPECT_EQ(rig.mocks["audio"].calls(), 1);  // only m001
  EXPECT_EQ(result.dataset.size(), 2u);
  EXPECT_EQ(text::read_file(out), run_to_file(dir / "clean.jsonl", 2, 1));
}

TEST(PipelineRun, WithoutResumeStaleJournalIsDiscarded) {
  testing::TempDir dir;
  auto out = dir / "out.jsonl";
  text::write_file_atomic(out.string() + ".journal.jsonl", "garbage\n");
  Rig rig;
  Pipeline pipeline(rig.gateway, rig.mocks.config);
  RunOptions options;
  options.output_path = out;
  auto result = pipeline.run(synthetic_manifest(3), options);
  EXPECT_EQ(result.dataset.size(), 3u);
  EXPECT_FALSE(std::filesystem::exists(out.string() + ".journal.jsonl"));
}

TEST(PipelineRun, ConcurrentPrelabelCalls) {
  Rig rig;
  rig.mocks["audio"].set_latency(std::chrono::milliseconds(60));
  rig.mocks["video"].set_latency(std::chrono::milliseconds(60));
  Pipeline pipeline(rig.gateway, rig.mocks.config);
  auto sample = synthetic_manifest(1)[0];
  auto start = std::chrono::steady_clock::now();
  pipeline.process(sample);
  auto elapsed = std::chrono::steady_clock::now() - start;
  // Sequential clue calls would take at least 120 ms.
  EXPECT_LT(elapsed, std::chrono::milliseconds(115));
}

}  // namespace
}  // namespace emer
