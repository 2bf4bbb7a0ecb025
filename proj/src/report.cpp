#include "emer/report.h"

#include <algorithm>
#include <map>
#include <sstream>

#include "emer/dataset.h"
#include "emer/errors.h"

namespace emer {

std::string ModalityFlags::to_string() const {
  std::string out;
  if (language) out += 'L';
  if (video) out += 'V';
  if (audio) out += 'A';
  return out;
}

ModalityFlags ModalityFlags::parse(std::string_view letters) {
  ModalityFlags flags;
  for (char c : letters) {
    switch (c) {
      case 'L': case 'l': flags.language = true; break;
      case 'V': case 'v': flags.video = true; break;
      case 'A': case 'a': flags.audio = true; break;
      default:
        throw Error("InvalidFlags", "modality flags use only L, V and A: '" +
                                        std::string(letters) + "'");
    }
  }
  return flags;
}

const ColumnGroup* ReportRow::group(std::string_view name) const {
  for (const auto& g : groups) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "text") return TableFormat::kText;
  if (name == "csv") return TableFormat::kCsv;
  if (name == "markdown" || name == "md") return TableFormat::kMarkdown;
  throw Error("UnknownFormat", "unknown table format '" + std::string(name) + "'");
}

namespace {

const RunAggregate& metric_of(const MetricTriple& m, std::size_t i) {
  return i == 0 ? m.avg : (i == 1 ? m.accuracy_s : m.recall_s);
}
RunAggregate& metric_of(MetricTriple& m, std::size_t i) {
  return i == 0 ? m.avg : (i == 1 ? m.accuracy_s : m.recall_s);
}

// Display width in code points; every glyph used here is single-width.
std::size_t width(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad(std::string_view s, std::size_t w) {
  std::string out(s);
  out.append(w > width(s) ? w - width(s) : 0, ' ');
  return out;
}

std::string center(std::string_view s, std::size_t w) {
  std::size_t total = w > width(s) ? w - width(s) : 0;
  std::size_t left = total / 2;
  return std::string(left, ' ') + std::string(s) + std::string(total - left, ' ');
}

std::vector<std::string> group_names(const ReportTable& table) {
  std::vector<std::string> names;
  for (const auto& row : table.rows) {
    for (const auto& g : row.groups) {
      if (std::find(names.begin(), names.end(), g.name) == names.end()) names.push_back(g.name);
    }
  }
  return names;
}

bool has_flags(const ReportTable& table) {
  return std::any_of(table.rows.begin(), table.rows.end(),
                     [](const ReportRow& r) { return r.flags.has_value(); });
}

std::string flag_cell(const std::optional<ModalityFlags>& flags, char which) {
  if (!flags) return "";
  bool on = which == 'L' ? flags->language : (which == 'V' ? flags->video : flags->audio);
  return on ? "\xE2\x88\x9A" : "\xC3\x97";  // √ ×
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_csv(const ReportTable& table) {
  std::ostringstream out;
  out << "system,language,split,metric,mean,std,n_runs\n";
  for (const auto& row : table.rows) {
    for (const auto& g : row.groups) {
      for (std::size_t m = 0; m < 3; ++m) {
        const auto& agg = metric_of(g.metrics, m);
        out << csv_field(row.system) << ',' << csv_field(g.name) << ',' << csv_field(row.split)
            << ',' << kMetricNames[m] << ',' << format_percent(agg.mean) << ','
            << format_percent(agg.std) << ',' << agg.n_runs << '\n';
      }
    }
  }
  return out.str();
}

std::string render_markdown(const ReportTable& table) {
  const auto groups = group_names(table);
  const bool flags = has_flags(table);
  std::ostringstream out;
  if (!table.title.empty()) out << "**" << table.title << "**\n\n";
  std::vector<std::string> header{"Model"};
  if (flags) header.insert(header.end(), {"L", "V", "A"});
  for (const auto& g : groups) {
    for (auto m : kMetricNames) header.push_back(g + " " + std::string(m));
  }
  out << '|';
  for (const auto& h : header) out << ' ' << h << " |";
  out << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? " --- |" : " :---: |");
  out << '\n';
  std::string section;
  for (const auto& row : table.rows) {
    if (!row.section.empty() && row.section != section) {
      section = row.section;
      out << "| *" << section << "* |";
      for (std::size_t i = 1; i < header.size(); ++i) out << "  |";
      out << '\n';
    }
    out << "| " << row.system << " |";
    if (flags) {
      for (char f : {'L', 'V', 'A'}) out << ' ' << flag_cell(row.flags, f) << " |";
    }
    for (const auto& name : groups) {
      const ColumnGroup* g = row.group(name);
      for (std::size_t m = 0; m < 3; ++m) {
        out << ' ' << (g ? metric_of(g->metrics, m).format() : "-") << " |";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string render_text(const ReportTable& table, const RenderOptions& options) {
  const auto groups = group_names(table);
  const bool flags = has_flags(table);
  const std::string bold = options.color ? "\x1b[1m" : "";
  const std::string reset = options.color ? "\x1b[0m" : "";

  // Cell matrix: leading columns, then three metric columns per group.
  std::vector<std::string> metric_header{"Model"};
  if (flags) metric_header.insert(metric_header.end(), {"L", "V", "A"});
  const std::size_t lead = metric_header.size();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto m : kMetricNames) metric_header.emplace_back(m);
  }
  std::vector<std::vector<std::string>> body;
  for (const auto& row : table.rows) {
    std::vector<std::string> cells{row.system};
    if (flags) {
      for (char f : {'L', 'V', 'A'}) cells.push_back(flag_cell(row.flags, f));
    }
    for (const auto& name : groups) {
      const ColumnGroup* g = row.group(name);
      for (std::size_t m = 0; m < 3; ++m) {
        cells.push_back(g ? metric_of(g->metrics, m).format() : "-");
      }
    }
    body.push_back(std::move(cells));
  }

  std::vector<std::size_t> widths(metric_header.size());
  for (std::size_t c = 0; c < widths.size(); ++c) widths[c] = width(metric_header[c]);
  for (const auto& cells : body) {
    for (std::size_t c = 0; c < cells.size(); ++c) widths[c] = std::max(widths[c], width(cells[c]));
  }
  // A group title wider than its three columns widens the last of them.
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::size_t first = lead + 3 * g;
    std::size_t span = widths[first] + widths[first + 1] + widths[first + 2] + 4;
    if (width(groups[g]) > span) widths[first + 2] += width(groups[g]) - span;
  }

  auto join_row = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == lead) line += " | ";
      else if (c > lead && (c - lead) % 3 == 0) line += " | ";
      else if (c > 0) line += "  ";
      line += pad(cells[c], widths[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    return line;
  };

  std::string group_line;
  {
    std::size_t lead_width = 0;
    for (std::size_t c = 0; c < lead; ++c) lead_width += widths[c] + (c > 0 ? 2 : 0);
    group_line = std::string(lead_width, ' ');
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::size_t first = lead + 3 * g;
      std::size_t span = widths[first] + widths[first + 1] + widths[first + 2] + 4;
      group_line += " | " + center(groups[g], span);
    }
    while (!group_line.empty() && group_line.back() == ' ') group_line.pop_back();
  }
  const std::string header_line = join_row(metric_header);
  std::size_t rule_width = std::max(width(header_line), width(group_line));
  const std::string rule(rule_width, '-');

  std::ostringstream out;
  if (!table.title.empty()) out << table.title << '\n';
  out << rule << '\n';
  if (!groups.empty()) out << bold << group_line << reset << '\n';
  out << bold << header_line << reset << '\n';
  out << rule << '\n';
  std::string section;
  for (std::size_t r = 0; r < body.size(); ++r) {
    const auto& row = table.rows[r];
    if (!row.section.empty() && row.section != section) {
      if (!section.empty()) out << rule << '\n';
      section = row.section;
      std::string line = center(section, rule_width);
      line.erase(line.find_last_not_of(' ') + 1);
      out << line << '\n' << rule << '\n';
    }
    out << join_row(body[r]) << '\n';
  }
  out << rule << '\n';
  return out.str();
}

RunAggregate aggregate_json(const nlohmann::json& j) {
  RunAggregate agg;
  agg.mean = j.at("mean").get<double>();
  agg.std = j.value("std", 0.0);
  agg.n_runs = j.value("n_runs", 1);
  agg.per_run = j.value("per_run", std::vector<double>{});
  return agg;
}

nlohmann::ordered_json aggregate_to_json(const RunAggregate& agg) {
  nlohmann::ordered_json j;
  j["mean"] = agg.mean;
  j["std"] = agg.std;
  j["n_runs"] = agg.n_runs;
  j["per_run"] = agg.per_run;
  return j;
}

}  // namespace

std::string render_table(const ReportTable& table, TableFormat format,
                         const RenderOptions& options) {
  if (table.rows.empty()) throw Error("EmptyTable", "no rows to render");
  switch (format) {
    case TableFormat::kCsv: return render_csv(table);
    case TableFormat::kMarkdown: return render_markdown(table);
    case TableFormat::kText: break;
  }
  return render_text(table, options);
}

ReportTable parse_csv_report(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) throw Error("InvalidReport", "empty CSV report");
  const std::vector<std::string> expected{"system", "language", "split", "metric",
                                          "mean",   "std",      "n_runs"};
  if (rows.front() != expected) throw Error("InvalidReport", "unexpected CSV header");
  ReportTable table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != expected.size()) {
      throw Error("InvalidReport", "CSV line " + std::to_string(i + 1) + " has wrong arity");
    }
    auto row_it = std::find_if(table.rows.begin(), table.rows.end(), [&](const ReportRow& x) {
      return x.system == r[0] && x.split == r[2];
    });
    if (row_it == table.rows.end()) {
      ReportRow row;
      row.system = r[0];
      row.split = r[2];
      table.rows.push_back(std::move(row));
      row_it = std::prev(table.rows.end());
    }
    auto group_it = std::find_if(row_it->groups.begin(), row_it->groups.end(),
                                 [&](const ColumnGroup& g) { return g.name == r[1]; });
    if (group_it == row_it->groups.end()) {
      row_it->groups.push_back(ColumnGroup{r[1], {}});
      group_it = std::prev(row_it->groups.end());
    }
    auto metric = std::find(std::begin(kMetricNames), std::end(kMetricNames), r[3]);
    if (metric == std::end(kMetricNames)) {
      throw Error("InvalidReport", "unknown metric '" + r[3] + "'");
    }
    RunAggregate& agg = metric_of(group_it->metrics, metric - std::begin(kMetricNames));
    try {
      agg.mean = std::stod(r[4]);
      agg.std = std::stod(r[5]);
      agg.n_runs = std::stoi(r[6]);
    } catch (const std::exception&) {
      throw Error("InvalidReport", "CSV line " + std::to_string(i + 1) + " has a bad number");
    }
  }
  return table;
}

nlohmann::ordered_json to_json(const ReportTable& table) {
  nlohmann::ordered_json j;
  j["title"] = table.title;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json r;
    r["system"] = row.system;
    r["flags"] = row.flags ? nlohmann::ordered_json(row.flags->to_string()) : nlohmann::ordered_json();
    r["split"] = row.split;
    r["section"] = row.section;
    r["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : row.groups) {
      nlohmann::ordered_json gj;
      gj["name"] = g.name;
      gj["avg"] = aggregate_to_json(g.metrics.avg);
      gj["accuracy_s"] = aggregate_to_json(g.metrics.accuracy_s);
      gj["recall_s"] = aggregate_to_json(g.metrics.recall_s);
      r["groups"].push_back(std::move(gj));
    }
    j["rows"].push_back(std::move(r));
  }
  return j;
}

ReportTable report_from_json(const nlohmann::json& j) {
  try {
    ReportTable table;
    table.title = j.value("title", "");
    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.system = r.at("system").get<std::string>();
      if (r.contains("flags") && !r.at("flags").is_null()) {
        row.flags = ModalityFlags::parse(r.at("flags").get<std::string>());
      }
      row.split = r.value("split", "whole");
      row.section = r.value("section", "");
      for (const auto& g : r.at("groups")) {
        ColumnGroup group;
        group.name = g.at("name").get<std::string>();
        group.metrics.avg = aggregate_json(g.at("avg"));
        group.metrics.accuracy_s = aggregate_json(g.at("accuracy_s"));
        group.metrics.recall_s = aggregate_json(g.at("recall_s"));
        row.groups.push_back(std::move(group));
      }
      table.rows.push_back(std::move(row));
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error("InvalidReport", std::string("malformed report JSON: ") + e.what());
  }
}

std::string Delta::format() const {
  std::string magnitude = format_percent(static_cast<double>(hundredths < 0 ? -hundredths : hundredths) / 100.0);
  if (hundredths > 0) return "+" + magnitude;
  if (hundredths < 0) return "-" + magnitude;
  return magnitude;
}

std::vector<Delta> compare_baselines(const std::vector<ReportRow>& rows,
                                     const std::vector<std::string>& baseline_names) {
  std::vector<Delta> deltas;
  for (const auto& name : baseline_names) {
    auto base = std::find_if(rows.begin(), rows.end(),
                             [&](const ReportRow& r) { return r.system == name; });
    if (base == rows.end()) throw UnknownBaseline(name);
    for (const auto& row : rows) {
      if (&row == &*base) continue;
      for (const auto& g : row.groups) {
        const ColumnGroup* bg = base->group(g.name);
        if (!bg) continue;
        for (std::size_t m = 0; m < 3; ++m) {
          Delta d;
          d.system = row.system;
          d.baseline = name;
          d.group = g.name;
          d.metric = std::string(kMetricNames[m]);
          d.hundredths = to_hundredths(metric_of(g.metrics, m).mean) -
                         to_hundredths(metric_of(bg->metrics, m).mean);
          deltas.push_back(std::move(d));
        }
      }
    }
  }
  return deltas;
}

}  // namespace emer
