#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "emer/metrics.h"

namespace emer {

// Which inputs a system saw: L (subtitle text), V (video), A (audio).
struct ModalityFlags {
  bool language = false;
  bool video = false;
  bool audio = false;

  // "LVA" subset, e.g. "LV".
  std::string to_string() const;
  static ModalityFlags parse(std::string_view letters);
  friend bool operator==(const ModalityFlags&, const ModalityFlags&) = default;
};

struct MetricTriple {
  RunAggregate avg;
  RunAggregate accuracy_s;
  RunAggregate recall_s;
};

// One column block of a table, e.g. "English" or "Pretrained Weights".
struct ColumnGroup {
  std::string name;
  MetricTriple metrics;
};

struct ReportRow {
  std::string system;
  std::optional<ModalityFlags> flags;
  std::string split = "whole";
  // Rows sharing a section are printed under one section heading.
  std::string section;
  std::vector<ColumnGroup> groups;

  const ColumnGroup* group(std::string_view name) const;
};

struct ReportTable {
  std::string title;
  std::vector<ReportRow> rows;
};

enum class TableFormat { kText, kCsv, kMarkdown };

TableFormat parse_table_format(std::string_view name);

struct RenderOptions {
  // ANSI bold headers in text output.
  bool color = false;
};

// Cells are "mean±std" with two decimals. CSV has one line per
// (row, column group, metric): system,language,split,metric,mean,std,n_runs.
std::string render_table(const ReportTable& table, TableFormat format,
                         const RenderOptions& options = {});

// Reads the CSV rendering back. Flags and sections are not part of the CSV
// and come back empty.
ReportTable parse_csv_report(std::string_view csv);

nlohmann::ordered_json to_json(const ReportTable& table);
ReportTable report_from_json(const nlohmann::json& j);

inline constexpr std::string_view kMetricNames[] = {"Avg", "Accuracy_s", "Recall_s"};

// system - baseline for one metric of one column group, in exact
// hundredths of a percent.
struct Delta {
  std::string system;
  std::string baseline;
  std::string group;
  std::string metric;
  long long hundredths = 0;

  double value() const { return static_cast<double>(hundredths) / 100.0; }
  // Signed, two decimals: "+35.92", "-1.05", "0.00".
  std::string format() const;
};

// Deltas of every non-baseline row against each named baseline, over the
// column groups both rows share. Throws UnknownBaseline.
std::vector<Delta> compare_baselines(const std::vector<ReportRow>& rows,
                                     const std::vector<std::string>& baseline_names);

}  // namespace emer
