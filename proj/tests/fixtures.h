#pragma once

#include <string>
#include <vector>

#include "emer/metrics.h"
#include "emer/report.h"

// Report fixtures shaped like the published result tables. The scores are
// made up except where a test names their source.
namespace emer::fixtures {

inline ColumnGroup column(std::string name, std::vector<double> avg, std::vector<double> acc,
                          std::vector<double> rec) {
  return ColumnGroup{std::move(name),
                     MetricTriple{aggregate_runs(avg), aggregate_runs(acc), aggregate_runs(rec)}};
}

// Six audio/video model combinations, English and Chinese columns.
inline ReportTable combination_table() {
  struct Spec {
    const char* system;
    const char* flags;
    std::vector<double> en_avg, en_acc, en_rec, zh_avg, zh_acc, zh_rec;
  };
  const std::vector<Spec> specs = {
      {"Empty", "", {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}},
      {"audio-A", "LA", {48.12, 48.52}, {44.03, 44.91}, {52.21, 52.13}, {50.30, 49.86}, {46.75, 46.11}, {53.85, 53.61}},
      {"video-B", "LV", {51.07, 50.63}, {47.90, 47.12}, {54.24, 54.14}, {52.18, 52.58}, {49.33, 49.95}, {55.03, 55.21}},
      {"audio-A + video-B", "LVA", {56.41, 56.85}, {52.50, 53.02}, {60.32, 60.68}, {57.02, 57.40}, {53.88, 54.16}, {60.16, 60.64}},
      {"audio-C + video-B", "LVA", {57.73, 57.29}, {54.35, 53.61}, {61.11, 60.97}, {58.14, 57.66}, {55.20, 54.44}, {61.08, 60.88}},
      {"audio-C + video-D", "LVA", {59.39, 59.55}, {56.01, 56.49}, {62.77, 62.61}, {59.80, 60.12}, {56.73, 57.25}, {62.87, 62.99}},
  };
  ReportTable table;
  table.title = "Fixture: model combinations on the whole set";
  for (const auto& s : specs) {
    ReportRow row;
    row.system = s.system;
    row.flags = ModalityFlags::parse(s.flags);
    row.groups.push_back(column("English", s.en_avg, s.en_acc, s.en_rec));
    row.groups.push_back(column("Chinese", s.zh_avg, s.zh_acc, s.zh_rec));
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Training-strategy rows. The Avg values of the pretrained column are the
// published ones (28.64, 62.78, 64.56); everything else is made up.
inline ReportTable training_table() {
  struct Spec {
    const char* system;
    const char* section;
    double pre_avg, pre_acc, pre_rec, ft_avg, ft_acc, ft_rec;
  };
  const std::vector<Spec> specs = {
      {"--/--", "No training", 28.64, 27.10, 30.18, 28.64, 27.10, 30.18},
      {"50-epoch/best", "Two-stage", 62.78, 60.41, 65.15, 60.02, 57.93, 62.11},
      {"100-epoch/best", "Two-stage", 64.56, 62.30, 66.82, 61.47, 59.05, 63.89},
  };
  ReportTable table;
  table.title = "Fixture: training strategies";
  for (const auto& s : specs) {
    ReportRow row;
    row.system = s.system;
    row.section = s.section;
    row.groups.push_back(column("Pretrained Weights", {s.pre_avg}, {s.pre_acc}, {s.pre_rec}));
    row.groups.push_back(column("Random Weights", {s.ft_avg}, {s.ft_acc}, {s.ft_rec}));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace emer::fixtures
