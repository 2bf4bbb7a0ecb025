// emer: command-line driver for the pipeline, grouping, scoring, splitting
// and reporting workflows.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emer/config.h"
#include "emer/dataset.h"
#include "emer/errors.h"
#include "emer/gateway.h"
#include "emer/harness.h"
#include "emer/label_space.h"
#include "emer/llm_tasks.h"
#include "emer/pipeline.h"
#include "emer/report.h"
#include "emer/text.h"

namespace fs = std::filesystem;
using namespace emer;

namespace {

int fail(int code, std::string_view error, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = error;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
  return code;
}

bool use_color(bool no_color_flag) {
  if (no_color_flag || std::getenv("NO_COLOR")) return false;
  return ::isatty(STDOUT_FILENO) != 0;
}

// Default backend names used when no config file is given.
PipelineConfig default_pipeline_config() {
  PipelineConfig p;
  p.audio_backend = "audio";
  p.video_backend = "video";
  p.merge_backend = "merge";
  p.disambiguate_backend = "disambiguate";
  p.translate_backend = "translate";
  return p;
}

// Every backend named by the config, the pipeline and the experiments.
std::set<std::string> referenced_backends(const AppConfig& config) {
  std::set<std::string> names;
  for (const auto& b : config.backends) names.insert(b.name);
  const auto& p = config.pipeline;
  for (const auto* n : {&p.audio_backend, &p.video_backend, &p.merge_backend,
                        &p.disambiguate_backend, &p.translate_backend}) {
    if (!n->empty()) names.insert(*n);
  }
  if (p.extractor != "lexicon") names.insert(p.extractor);
  for (const auto& e : config.experiments) {
    if (e.grouper != "lexicon") names.insert(e.grouper);
    if (e.extractor != "lexicon") names.insert(e.extractor);
  }
  return names;
}

// Mock fixtures: every referenced backend becomes an in-process mock that
// echoes the last prompt placeholder. <dir>/replies.jsonl may script replies
// with lines {"backend": ..., "prompt_digest": ..., "reply": ...}.
void install_mocks(Gateway& gateway, const AppConfig& config, const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("mock fixture directory not found: " + dir.string());
  std::map<std::string, std::map<std::string, std::string>> scripts;
  auto replies = dir / "replies.jsonl";
  if (fs::exists(replies)) {
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(text::read_file(replies))) {
      ++line_no;
      if (text::is_blank(line)) continue;
      try {
        auto j = nlohmann::json::parse(line);
        scripts[j.at("backend").get<std::string>()][j.at("prompt_digest").get<std::string>()] =
            j.at("reply").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw SchemaViolation(line_no, "", std::string("bad mock reply: ") + e.what());
      }
    }
  }
  std::map<std::string, BackendSpec> declared;
  for (const auto& b : config.backends) declared[b.name] = b;
  for (const auto& name : referenced_backends(config)) {
    auto mock = std::make_shared<MockBackend>(scripts[name], echo_last_placeholder());
    BackendSpec spec = declared.count(name) ? declared[name] : BackendSpec{};
    spec.name = name;
    spec.endpoint_url = "mock://" + name;
    if (spec.model_id.empty()) spec.model_id = "mock-" + name;
    spec.requests_per_second = 0;
    gateway.add_backend(spec, mock);
  }
}

GatewayOptions gateway_options(const AppConfig& config, bool offline) {
  GatewayOptions options;
  options.offline = offline;
  if (config.cache_dir && !offline) options.cache_dir = *config.cache_dir;
  return options;
}

void register_backends(Gateway& gateway, const AppConfig& config) {
  for (const auto& b : config.backends) gateway.add_backend(b);
}

AppConfig config_or_default(const std::string& path) {
  if (!path.empty()) return load_config(path);
  AppConfig config;
  config.pipeline = default_pipeline_config();
  return config;
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
  std::string manifest, config, mock, out;
  bool resume = false;
  int parallelism = 0;
};

int cmd_pipeline_run(const PipelineArgs& a) {
  AppConfig config = config_or_default(a.config);
  if (!a.config.empty() && !config.has_pipeline) {
    throw ConfigError("pipeline", 0, "the config has no pipeline section");
  }
  if (a.resume) config.pipeline.resume = true;
  if (a.parallelism > 0) config.pipeline.parallelism = a.parallelism;
  if (a.mock.empty() && a.config.empty()) {
    throw ConfigError("--config", 0, "a config is required unless --mock is given");
  }

  Gateway gateway(gateway_options(config, false));
  if (!a.mock.empty()) install_mocks(gateway, config, a.mock);
  else register_backends(gateway, config);

  auto manifest = load_manifest(a.manifest);
  Pipeline pipeline(gateway, config.pipeline);
  RunOptions options;
  options.output_path = a.out;
  auto result = pipeline.run(manifest, options);

  nlohmann::ordered_json summary;
  summary["output"] = a.out;
  summary["samples"] = manifest.size();
  summary["completed"] = result.dataset.size();
  summary["reused"] = result.reused;
  summary["failed"] = result.failures.size();
  if (!result.failures.empty()) {
    summary["failures"] = fs::path(a.out).string() + ".failures.jsonl";
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct GroupArgs {
  std::string labels, dataset, language = "en", grouper = "lexicon", config, mock, out;
};

int cmd_group_build(const GroupArgs& a) {
  Language language = parse_language(a.language);
  std::set<EmotionLabel> vocabulary;
  if (!a.labels.empty()) {
    for (const auto& line : text::split_lines(text::read_file(a.labels))) {
      if (!text::is_blank(line)) vocabulary.insert(normalize_label(line, language));
    }
  }
  if (!a.dataset.empty()) {
    auto handle = load_dataset(a.dataset);
    for (const auto& r : handle.records()) {
      const auto& labels = language == Language::kEn ? r.labels_en : r.labels_zh;
      if (labels) vocabulary.insert(labels->begin(), labels->end());
    }
  }

  AppConfig config = config_or_default(a.config);
  Gateway gateway(gateway_options(config, false));
  std::unique_ptr<Grouper> grouper;
  if (a.grouper == "lexicon") {
    grouper = std::make_unique<LexiconGrouper>(Lexicon::builtin(language));
  } else {
    config.experiments.push_back(ExperimentConfig{});
    config.experiments.back().grouper = a.grouper;
    if (!a.mock.empty()) install_mocks(gateway, config, a.mock);
    else register_backends(gateway, config);
    if (!gateway.has_backend(a.grouper)) {
      throw ConfigError("--grouper", 0, "unknown backend '" + a.grouper + "'");
    }
    grouper = std::make_unique<LlmGrouper>(gateway, gateway.backend(a.grouper),
                                           config.pipeline.prompts.get(prompt_ids::kGroup));
  }
  GroupMap map = build_group_map(vocabulary, *grouper);
  auto json = map.to_json().dump(2) + "\n";
  if (a.out.empty()) std::cout << json;
  else text::write_file_atomic(a.out, json);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string config, mock, out_dir, format = "text";
  bool dry_run = false;
  bool no_color = false;
};

int cmd_eval_run(const EvalArgs& a) {
  AppConfig config = load_config(a.config);
  if (!config.dataset) throw ConfigError("eval.dataset", 0, "required");
  if (config.experiments.empty()) throw ConfigError("eval.experiments", 0, "no experiments");
  auto format = parse_table_format(a.format);

  Gateway gateway(gateway_options(config, a.dry_run));
  if (!a.mock.empty()) install_mocks(gateway, config, a.mock);
  else if (!a.dry_run) register_backends(gateway, config);

  if (a.dry_run) {
    // Checks only: files exist and every backend resolves. No calls, no writes.
    std::set<std::string> declared;
    for (const auto& b : config.backends) declared.insert(b.name);
    if (!a.mock.empty()) {
      for (const auto& n : gateway.backend_names()) declared.insert(n);
    }
    if (!fs::exists(*config.dataset)) {
      throw MissingPrerequisite("dataset not found: " + config.dataset->string());
    }
    if (config.split_manifest && !fs::exists(*config.split_manifest)) {
      throw MissingPrerequisite("split manifest not found: " + config.split_manifest->string());
    }
    for (const auto& e : config.experiments) {
      if (!fs::exists(e.predictions_path)) {
        throw PredictionsMissing("predictions file not found: " + e.predictions_path.string());
      }
      for (const auto* b : {&e.grouper, &e.extractor}) {
        if (*b != "lexicon" && !declared.count(*b)) {
          throw ConfigError("eval.experiments", 0, "backend '" + *b + "' is not defined");
        }
      }
      if (e.split != "whole" && !config.split_manifest) {
        throw ConfigError("eval.split_manifest", 0, "split '" + e.split + "' needs a manifest");
      }
    }
    nlohmann::ordered_json summary;
    summary["valid"] = true;
    summary["experiments"] = config.experiments.size();
    summary["backend_calls"] = gateway.stats().attempts;
    std::cout << summary.dump() << '\n';
    return 0;
  }

  auto dataset = load_dataset(*config.dataset);
  HarnessContext context;
  context.gateway = &gateway;
  context.prompts = config.pipeline.prompts;
  if (config.split_manifest) {
    context.split_manifest = nlohmann::json::parse(text::read_file(*config.split_manifest));
  }
  auto results = run_batch(config.experiments, dataset, context);
  auto table = build_table(results, config.title);

  std::string rendered = render_table(table, format, RenderOptions{use_color(a.no_color)});
  std::vector<Delta> deltas;
  if (!config.baselines.empty()) deltas = compare_baselines(table.rows, config.baselines);

  if (a.out_dir.empty()) {
    std::cout << rendered;
    for (const auto& d : deltas) {
      std::cout << d.system << " vs " << d.baseline << " [" << d.group << " " << d.metric
                << "]: " << d.format() << '\n';
    }
    return 0;
  }
  fs::path dir = a.out_dir;
  fs::create_directories(dir);
  text::write_file_atomic(dir / "report.txt", render_table(table, TableFormat::kText));
  text::write_file_atomic(dir / "report.csv", render_table(table, TableFormat::kCsv));
  text::write_file_atomic(dir / "report.md", render_table(table, TableFormat::kMarkdown));
  text::write_file_atomic(dir / "report.json", to_json(table).dump(2) + "\n");
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  for (const auto& r : results) log.push_back(r.run_log());
  text::write_file_atomic(dir / "run_log.json", log.dump(2) + "\n");
  if (!deltas.empty()) {
    nlohmann::ordered_json dj = nlohmann::ordered_json::array();
    for (const auto& d : deltas) {
      dj.push_back({{"system", d.system}, {"baseline", d.baseline}, {"group", d.group},
                    {"metric", d.metric}, {"delta", d.format()}});
    }
    text::write_file_atomic(dir / "deltas.json", dj.dump(2) + "\n");
  }
  std::cout << rendered;
  return 0;
}

// ---------------------------------------------------------------------------

struct SplitArgs {
  std::string in, out_dir;
  std::size_t train = 0, test = 0;
  std::int64_t seed = 0;
};

int cmd_dataset_split(const SplitArgs& a) {
  auto handle = load_dataset(a.in);
  auto result = split(handle, SplitSpec{a.train, a.test, a.seed});
  fs::path dir = a.out_dir.empty() ? fs::path(a.in).parent_path() : fs::path(a.out_dir);
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  save_dataset(result.train, dir / "train.jsonl");
  save_dataset(result.test, dir / "test.jsonl");
  text::write_file_atomic(dir / "split.json", result.manifest.dump(2) + "\n");
  nlohmann::ordered_json summary;
  summary["train"] = result.train.size();
  summary["test"] = result.test.size();
  summary["seed"] = a.seed;
  summary["out_dir"] = dir.string();
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_dataset_stats(const std::string& in, const std::string& out) {
  auto json = stats(load_dataset(in)).to_json().dump(2) + "\n";
  if (out.empty()) std::cout << json;
  else text::write_file_atomic(out, json);
  return 0;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string in, out, format = "text";
  std::vector<std::string> baselines;
  bool no_color = false;
};

int cmd_report_render(const ReportArgs& a) {
  auto content = text::read_file(a.in);
  ReportTable table = fs::path(a.in).extension() == ".csv"
                          ? parse_csv_report(content)
                          : report_from_json(nlohmann::json::parse(content));
  auto format = parse_table_format(a.format);
  std::string doc = render_table(table, format, RenderOptions{a.out.empty() && use_color(a.no_color)});
  for (const auto& d : compare_baselines(table.rows, a.baselines)) {
    doc += d.system + " vs " + d.baseline + " [" + d.group + " " + d.metric + "]: " +
           d.format() + "\n";
  }
  if (a.out.empty()) std::cout << doc;
  else text::write_file_atomic(a.out, doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary emotion dataset pipeline and evaluation toolkit", "emer"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::function<int()> action;

  auto* pipeline = app.add_subcommand("pipeline", "Build coarse emotion descriptions");
  pipeline->require_subcommand(1);
  PipelineArgs pa;
  auto* prun = pipeline->add_subcommand("run", "Run the description pipeline over a manifest");
  prun->add_option("--manifest", pa.manifest, "CSV or JSONL manifest")->required()->check(CLI::ExistingFile);
  prun->add_option("--config", pa.config, "YAML config")->check(CLI::ExistingFile);
  prun->add_option("--mock", pa.mock, "Mock fixture directory (no network)")->check(CLI::ExistingDirectory);
  prun->add_option("--out", pa.out, "Output JSONL")->required();
  prun->add_flag("--resume", pa.resume, "Reuse completed samples from a previous run");
  prun->add_option("--parallelism", pa.parallelism, "Concurrent samples")->check(CLI::PositiveNumber);
  prun->callback([&] { action = [&] { return cmd_pipeline_run(pa); }; });

  auto* group = app.add_subcommand("group", "Label grouping");
  group->require_subcommand(1);
  GroupArgs ga;
  auto* gbuild = group->add_subcommand("build", "Build a group map over a label vocabulary");
  auto* glabels = gbuild->add_option("--labels", ga.labels, "Text file, one label per line")->check(CLI::ExistingFile);
  auto* gdataset = gbuild->add_option("--dataset", ga.dataset, "Dataset JSONL whose labels form the vocabulary")->check(CLI::ExistingFile);
  gbuild->add_option("--language", ga.language, "en or zh");
  gbuild->add_option("--grouper", ga.grouper, "lexicon or a backend name");
  gbuild->add_option("--config", ga.config, "YAML config")->check(CLI::ExistingFile);
  gbuild->add_option("--mock", ga.mock, "Mock fixture directory")->check(CLI::ExistingDirectory);
  gbuild->add_option("--out", ga.out, "Output JSON (default stdout)");
  glabels->excludes(gdataset);
  gbuild->callback([&] {
    if (ga.labels.empty() && ga.dataset.empty()) {
      throw CLI::RequiredError("--labels or --dataset");
    }
    action = [&] { return cmd_group_build(ga); };
  });

  auto* eval = app.add_subcommand("eval", "Scoring experiments");
  eval->require_subcommand(1);
  EvalArgs ea;
  auto* erun = eval->add_subcommand("run", "Run the experiments of a config");
  erun->add_option("--config", ea.config, "YAML config")->required()->check(CLI::ExistingFile);
  erun->add_flag("--dry-run", ea.dry_run, "Validate only; no backend calls, no writes");
  erun->add_option("--mock", ea.mock, "Mock fixture directory")->check(CLI::ExistingDirectory);
  erun->add_option("--out-dir", ea.out_dir, "Write reports and the run log here");
  erun->add_option("--format", ea.format, "text, csv or markdown")
      ->check(CLI::IsMember({"text", "csv", "markdown", "md"}));
  erun->add_flag("--no-color", ea.no_color, "Plain text output");
  erun->callback([&] { action = [&] { return cmd_eval_run(ea); }; });

  auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
  dataset->require_subcommand(1);
  SplitArgs sa;
  auto* dsplit = dataset->add_subcommand("split", "Seeded train/test split");
  dsplit->add_option("--in", sa.in, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  dsplit->add_option("--train", sa.train, "Train count")->required();
  dsplit->add_option("--test", sa.test, "Test count")->required();
  dsplit->add_option("--seed", sa.seed, "Shuffle seed");
  dsplit->add_option("--out-dir", sa.out_dir, "Output directory (default: next to input)");
  dsplit->callback([&] { action = [&] { return cmd_dataset_split(sa); }; });

  std::string stats_in, stats_out;
  auto* dstats = dataset->add_subcommand("stats", "Label histograms and field population");
  dstats->add_option("--in", stats_in, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  dstats->add_option("--out", stats_out, "Output JSON (default stdout)");
  dstats->callback([&] { action = [&] { return cmd_dataset_stats(stats_in, stats_out); }; });

  auto* report = app.add_subcommand("report", "Result tables");
  report->require_subcommand(1);
  ReportArgs ra;
  auto* rrender = report->add_subcommand("render", "Render a table from report JSON or CSV");
  rrender->add_option("--in", ra.in, "report.json or report.csv")->required()->check(CLI::ExistingFile);
  rrender->add_option("--format", ra.format, "text, csv or markdown")
      ->check(CLI::IsMember({"text", "csv", "markdown", "md"}));
  rrender->add_option("--out", ra.out, "Output file (default stdout)");
  rrender->add_option("--baseline", ra.baselines, "Append deltas against these rows");
  rrender->add_flag("--no-color", ra.no_color, "Plain text output");
  rrender->callback([&] { action = [&] { return cmd_report_render(ra); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "UsageError", e.what());
  }

  try {
    return action ? action() : fail(2, "UsageError", "no command given");
  } catch (const Error& e) {
    return fail(1, e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(1, "InvalidJson", e.what());
  } catch (const std::exception& e) {
    return fail(1, "InternalError", e.what());
  }
}
