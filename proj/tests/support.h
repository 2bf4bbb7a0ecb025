#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "emer/dataset.h"
#include "emer/gateway.h"
#include "emer/label_space.h"
#include "emer/pipeline.h"
#include "emer/record.h"

namespace emer::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("emer-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<EmotionLabel> en_labels(const std::vector<std::string>& raw) {
  return normalize_labels(raw, Language::kEn);
}

inline std::vector<EmotionLabel> zh_labels(const std::vector<std::string>& raw) {
  return normalize_labels(raw, Language::kZh);
}

// Fine-style record with ground-truth labels in both languages.
inline SampleRecord fine_record(std::string id, std::vector<std::string> en,
                                std::vector<std::string> zh = {"开心"}) {
  SampleRecord r;
  r.sample_id = std::move(id);
  r.media_ref = r.sample_id + ".mp4";
  r.subtitle_zh = "字幕";
  r.subtitle_en = "subtitle";
  r.labels_en = en_labels(en);
  r.labels_zh = zh_labels(zh);
  return r;
}

// n records with ids "s000".. and a label drawn from a small pool.
inline DatasetHandle synthetic_fine(std::size_t n, std::string name = "fine") {
  static const std::vector<std::vector<std::string>> pool = {
      {"happy"}, {"angry", "frustrated"}, {"sad"}, {"surprised", "happy"}, {"worried"}};
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%03zu", i);
    records.push_back(fine_record(id, pool[i % pool.size()]));
  }
  return DatasetHandle(std::move(name), DatasetKind::kFine, std::move(records));
}

// Pipeline input with subtitles that contain lexicon emotion words.
inline const std::vector<std::pair<std::string, std::string>>& subtitle_pairs() {
  static const std::vector<std::pair<std::string, std::string>> lines = {
      {"I am so happy to see you", "见到你我很开心"},
      {"Why would you do that, I am furious", "你为什么这么做，我很生气"},
      {"It is fine. Really.", "没事。真的。"},
      {"I miss her so much, I feel sad", "我很想她，我很难过"},
  };
  return lines;
}

inline std::vector<SampleRecord> synthetic_manifest(std::size_t n) {
  const auto& lines = subtitle_pairs();
  std::vector<SampleRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "m%03zu", i);
    r.sample_id = id;
    r.media_ref = std::string("clips/") + id + ".mp4";
    r.subtitle_en = lines[i % lines.size()].first;
    r.subtitle_zh = lines[i % lines.size()].second;
    out.push_back(std::move(r));
  }
  return out;
}

struct MockSet {
  std::map<std::string, std::shared_ptr<MockBackend>> backends;
  PipelineConfig config;

  MockBackend& operator[](const std::string& name) { return *backends.at(name); }
  long long total_calls() const {
    long long n = 0;
    for (const auto& [_, b] : backends) n += b->calls();
    return n;
  }
};

// Five echoing mocks wired into a pipeline config. The translate mock maps
// the known English subtitles to their Chinese lines.
inline MockSet install_pipeline_mocks(Gateway& gateway) {
  MockSet set;
  for (const char* name : {"audio", "video", "merge", "disambiguate", "translate"}) {
    auto mock = std::make_shared<MockBackend>(std::map<std::string, std::string>{},
                                              echo_last_placeholder());
    mock_backend(gateway, name, mock);
    set.backends[name] = mock;
  }
  set.backends["translate"]->set_fallback([](const ChatRequest& request) {
    const auto& text = request.bindings.back().second;
    for (const auto& [en, zh] : subtitle_pairs()) {
      if (en == text) return zh;
    }
    return "[zh] " + text;
  });
  set.config.audio_backend = "audio";
  set.config.video_backend = "video";
  set.config.merge_backend = "merge";
  set.config.disambiguate_backend = "disambiguate";
  set.config.translate_backend = "translate";
  return set;
}

inline GatewayOptions fast_gateway_options() {
  GatewayOptions options;
  options.sleep = [](std::chrono::milliseconds) {};
  return options;
}

}  // namespace emer::testing
