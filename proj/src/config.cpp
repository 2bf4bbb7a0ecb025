#include "emer/config.h"

#include <cctype>
#include <functional>

#include <yaml-cpp/yaml.h>

#include "emer/errors.h"
#include "emer/text.h"

extern char** environ;

namespace emer {

Environment process_environment() {
  Environment env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return env;
}

namespace {

std::size_t line_of(const YAML::Node& node) {
  auto mark = node.Mark();
  return mark.line >= 0 ? static_cast<std::size_t>(mark.line) + 1 : 0;
}

std::string env_segment(std::string_view s) {
  std::string out;
  for (char c : s) {
    out += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
               : '_';
  }
  return out;
}

// Sets the node addressed by `path` (matched through env_segment) to `value`,
// creating map entries as needed.
void apply_override(YAML::Node root, const std::vector<std::string>& path, const std::string& value,
                    const std::string& var) {
  YAML::Node node = root;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (node && !node.IsNull() && !node.IsMap()) {
      throw ConfigError(var, 0, "override addresses inside a non-mapping value");
    }
    std::string key = path[i];
    if (node.IsMap()) {
      for (auto it = node.begin(); it != node.end(); ++it) {
        auto name = it->first.as<std::string>();
        if (env_segment(name) == path[i]) {
          key = name;
          break;
        }
      }
    }
    if (i + 1 == path.size()) {
      node[key] = value;
    } else {
      YAML::Node child = node[key];
      node.reset(child);
    }
  }
}

void apply_environment(YAML::Node root, const Environment& env) {
  constexpr std::string_view prefix = "EMER_";
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0 || name.find("__") == std::string::npos) continue;
    std::vector<std::string> path;
    std::string_view rest(name);
    rest.remove_prefix(prefix.size());
    for (std::size_t pos; (pos = rest.find("__")) != std::string_view::npos;) {
      path.push_back(env_segment(rest.substr(0, pos)));
      rest.remove_prefix(pos + 2);
    }
    path.push_back(env_segment(rest));
    for (const auto& segment : path) {
      if (segment.empty()) throw ConfigError(name, 0, "empty key segment");
    }
    apply_override(root, path, value, name);
  }
}

class Reader {
 public:
  explicit Reader(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  void expect_map(const YAML::Node& node, const std::string& key) const {
    if (!node.IsMap()) throw ConfigError(key, line_of(node), "expected a mapping");
  }

  // Calls fn(child_key, child) for each entry, rejecting keys outside `allowed`.
  void each(const YAML::Node& node, const std::string& key,
            std::initializer_list<std::string_view> allowed,
            const std::function<void(const std::string&, const YAML::Node&)>& fn) const {
    expect_map(node, key);
    for (auto it = node.begin(); it != node.end(); ++it) {
      auto name = it->first.as<std::string>();
      auto full = key.empty() ? name : key + "." + name;
      if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
        throw ConfigError(full, line_of(it->first), "unknown key");
      }
      fn(full, it->second);
    }
  }

  template <typename T>
  T scalar(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) throw ConfigError(key, line_of(node), "expected a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key, line_of(node), "invalid value '" + node.Scalar() + "'");
    }
  }

  std::string string(const YAML::Node& node, const std::string& key) const {
    return scalar<std::string>(node, key);
  }

  std::filesystem::path path(const YAML::Node& node, const std::string& key) const {
    std::filesystem::path p = string(node, key);
    if (p.empty()) throw ConfigError(key, line_of(node), "empty path");
    return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
  }

  std::vector<std::string> strings(const YAML::Node& node, const std::string& key) const {
    if (node.IsScalar()) return {string(node, key)};
    if (!node.IsSequence()) throw ConfigError(key, line_of(node), "expected a list");
    std::vector<std::string> out;
    for (const auto& item : node) out.push_back(string(item, key));
    return out;
  }

  template <typename Fn>
  auto converted(const YAML::Node& node, const std::string& key, Fn fn) const {
    try {
      return fn(string(node, key));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(key, line_of(node), e.what());
    }
  }

 private:
  std::filesystem::path base_dir_;
};

BackendSpec read_backend(const Reader& r, const std::string& name, const YAML::Node& node,
                         const std::string& key) {
  BackendSpec spec;
  spec.name = name;
  r.each(node, key,
         {"endpoint_url", "model_id", "temperature", "max_tokens", "timeout_s", "max_retries",
          "requests_per_second", "max_in_flight"},
         [&](const std::string& k, const YAML::Node& v) {
           auto leaf = k.substr(k.rfind('.') + 1);
           if (leaf == "endpoint_url") spec.endpoint_url = r.string(v, k);
           else if (leaf == "model_id") spec.model_id = r.string(v, k);
           else if (leaf == "temperature") spec.decode.temperature = r.scalar<double>(v, k);
           else if (leaf == "max_tokens") spec.decode.max_tokens = r.scalar<int>(v, k);
           else if (leaf == "timeout_s") {
             spec.timeout = std::chrono::milliseconds(
                 static_cast<long long>(r.scalar<double>(v, k) * 1000.0));
           } else if (leaf == "max_retries") spec.max_retries = r.scalar<int>(v, k);
           else if (leaf == "requests_per_second") spec.requests_per_second = r.scalar<double>(v, k);
           else spec.max_in_flight = r.scalar<int>(v, k);
         });
  if (spec.endpoint_url.empty()) {
    throw ConfigError(key + ".endpoint_url", line_of(node), "required");
  }
  if (spec.decode.temperature < 0) {
    throw ConfigError(key + ".temperature", line_of(node), "must be non-negative");
  }
  if (spec.decode.max_tokens < 1) {
    throw ConfigError(key + ".max_tokens", line_of(node), "must be positive");
  }
  if (spec.max_retries < 0) throw ConfigError(key + ".max_retries", line_of(node), "must be >= 0");
  return spec;
}

void read_pipeline(const Reader& r, const YAML::Node& node, PipelineConfig& p) {
  r.each(node, "pipeline",
         {"audio_backend", "video_backend", "merge_backend", "disambiguate_backend",
          "translate_backend", "extractor", "parallelism", "resume", "disambiguate",
          "reconcile_with", "record_wall_time"},
         [&](const std::string& k, const YAML::Node& v) {
           auto leaf = k.substr(k.rfind('.') + 1);
           if (leaf == "audio_backend") p.audio_backend = r.string(v, k);
           else if (leaf == "video_backend") p.video_backend = r.string(v, k);
           else if (leaf == "merge_backend") p.merge_backend = r.string(v, k);
           else if (leaf == "disambiguate_backend") p.disambiguate_backend = r.string(v, k);
           else if (leaf == "translate_backend") p.translate_backend = r.string(v, k);
           else if (leaf == "extractor") p.extractor = r.string(v, k);
           else if (leaf == "parallelism") p.parallelism = r.scalar<int>(v, k);
           else if (leaf == "resume") p.resume = r.scalar<bool>(v, k);
           else if (leaf == "disambiguate") p.disambiguate = r.scalar<bool>(v, k);
           else if (leaf == "record_wall_time") p.record_wall_time = r.scalar<bool>(v, k);
           else {
             auto value = r.string(v, k);
             if (value == "disambiguation_backend") {
               p.reconcile_with = ReconcileWith::kDisambiguationBackend;
             } else if (value == "modality_backend") {
               p.reconcile_with = ReconcileWith::kModalityBackend;
             } else {
               throw ConfigError(k, line_of(v),
                                 "expected disambiguation_backend or modality_backend");
             }
           }
         });
  if (p.parallelism < 1) throw ConfigError("pipeline.parallelism", line_of(node), "must be >= 1");
}

void read_prompts(const Reader& r, const YAML::Node& node, PromptLibrary& library) {
  if (!node.IsSequence()) throw ConfigError("prompts", line_of(node), "expected a list");
  std::size_t index = 0;
  for (const auto& item : node) {
    std::string key = "prompts[" + std::to_string(index++) + "]";
    PromptTemplate prompt;
    bool has_role = false;
    r.each(item, key, {"id", "version", "role", "body"},
           [&](const std::string& k, const YAML::Node& v) {
             auto leaf = k.substr(k.rfind('.') + 1);
             if (leaf == "id") prompt.id = r.string(v, k);
             else if (leaf == "version") prompt.version = r.string(v, k);
             else if (leaf == "body") prompt.body = r.string(v, k);
             else {
               prompt.role = r.converted(v, k, [](const std::string& s) { return parse_prompt_role(s); });
               has_role = true;
             }
           });
    for (auto [field, value] : {std::pair{"id", &prompt.id}, {"version", &prompt.version},
                                {"body", &prompt.body}}) {
      if (value->empty()) throw ConfigError(key + "." + field, line_of(item), "required");
    }
    if (!has_role && library.contains(prompt.id)) prompt.role = library.get(prompt.id).role;
    try {
      library.publish(std::move(prompt));
    } catch (const Error& e) {
      throw ConfigError(key, line_of(item), e.what());
    }
  }
}

struct ExperimentDefaults {
  int n_runs = 2;
  std::string grouper = "lexicon";
  std::string extractor = "lexicon";
  std::string split = "whole";
  bool independent_runs = true;
  int parallelism = 1;
};

void read_defaults(const Reader& r, const YAML::Node& node, ExperimentDefaults& d) {
  r.each(node, "eval.defaults",
         {"n_runs", "grouper", "extractor", "split", "independent_runs", "parallelism"},
         [&](const std::string& k, const YAML::Node& v) {
           auto leaf = k.substr(k.rfind('.') + 1);
           if (leaf == "n_runs") d.n_runs = r.scalar<int>(v, k);
           else if (leaf == "grouper") d.grouper = r.string(v, k);
           else if (leaf == "extractor") d.extractor = r.string(v, k);
           else if (leaf == "split") d.split = r.string(v, k);
           else if (leaf == "independent_runs") d.independent_runs = r.scalar<bool>(v, k);
           else d.parallelism = r.scalar<int>(v, k);
         });
}

ExperimentConfig read_experiment(const Reader& r, const YAML::Node& node, const std::string& key,
                                 const ExperimentDefaults& d) {
  ExperimentConfig e;
  e.n_runs = d.n_runs;
  e.grouper = d.grouper;
  e.extractor = d.extractor;
  e.split = d.split;
  e.independent_runs = d.independent_runs;
  e.parallelism = d.parallelism;
  bool has_predictions = false;
  r.each(node, key,
         {"system", "predictions", "language", "split", "n_runs", "grouper", "extractor", "flags",
          "section", "column", "independent_runs", "parallelism"},
         [&](const std::string& k, const YAML::Node& v) {
           auto leaf = k.substr(k.rfind('.') + 1);
           if (leaf == "system") e.system_name = r.string(v, k);
           else if (leaf == "predictions") {
             e.predictions_path = r.path(v, k);
             has_predictions = true;
           } else if (leaf == "language") {
             e.language = r.converted(v, k, [](const std::string& s) { return parse_language(s); });
           } else if (leaf == "split") e.split = r.string(v, k);
           else if (leaf == "n_runs") e.n_runs = r.scalar<int>(v, k);
           else if (leaf == "grouper") e.grouper = r.string(v, k);
           else if (leaf == "extractor") e.extractor = r.string(v, k);
           else if (leaf == "flags") {
             e.flags = r.converted(v, k, [](const std::string& s) { return ModalityFlags::parse(s); });
           } else if (leaf == "section") e.section = r.string(v, k);
           else if (leaf == "column") e.column = r.string(v, k);
           else if (leaf == "independent_runs") e.independent_runs = r.scalar<bool>(v, k);
           else e.parallelism = r.scalar<int>(v, k);
         });
  if (e.system_name.empty()) throw ConfigError(key + ".system", line_of(node), "required");
  if (!has_predictions) throw ConfigError(key + ".predictions", line_of(node), "required");
  if (e.split != "whole" && e.split != "train" && e.split != "test") {
    throw ConfigError(key + ".split", line_of(node), "must be whole, train or test");
  }
  if (e.n_runs < 1) throw ConfigError(key + ".n_runs", line_of(node), "must be positive");
  if (e.parallelism < 1) throw ConfigError(key + ".parallelism", line_of(node), "must be >= 1");
  return e;
}

void read_eval(const Reader& r, const YAML::Node& node, AppConfig& config) {
  ExperimentDefaults defaults;
  if (node.IsMap() && node["defaults"]) read_defaults(r, node["defaults"], defaults);
  r.each(node, "eval",
         {"dataset", "split_manifest", "title", "baselines", "defaults", "experiments"},
         [&](const std::string& k, const YAML::Node& v) {
           auto leaf = k.substr(k.rfind('.') + 1);
           if (leaf == "dataset") config.dataset = r.path(v, k);
           else if (leaf == "split_manifest") config.split_manifest = r.path(v, k);
           else if (leaf == "title") config.title = r.string(v, k);
           else if (leaf == "baselines") config.baselines = r.strings(v, k);
           else if (leaf == "experiments") {
             if (!v.IsSequence()) throw ConfigError(k, line_of(v), "expected a list");
             std::size_t i = 0;
             for (const auto& item : v) {
               config.experiments.push_back(
                   read_experiment(r, item, k + "[" + std::to_string(i++) + "]", defaults));
             }
           }
         });
}

}  // namespace

AppConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir,
                       const Environment& env) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("<document>", static_cast<std::size_t>(e.mark.line + 1), e.msg);
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  apply_environment(root, env);

  AppConfig config;
  config.base_dir = base_dir;
  Reader r(base_dir);
  // Prompts first so the pipeline sees overrides regardless of key order.
  if (root.IsMap() && root["prompts"]) read_prompts(r, root["prompts"], config.pipeline.prompts);
  r.each(root, "", {"cache_dir", "backends", "prompts", "pipeline", "eval"},
         [&](const std::string& k, const YAML::Node& v) {
           if (k == "cache_dir") config.cache_dir = r.path(v, k);
           else if (k == "backends") {
             r.expect_map(v, k);
             for (auto it = v.begin(); it != v.end(); ++it) {
               auto name = it->first.as<std::string>();
               config.backends.push_back(read_backend(r, name, it->second, k + "." + name));
             }
           } else if (k == "pipeline") {
             read_pipeline(r, v, config.pipeline);
             config.has_pipeline = true;
           } else if (k == "eval") {
             read_eval(r, v, config);
           }
         });
  return config;
}

AppConfig load_config(const std::filesystem::path& path, const Environment& env) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("<file>", 0, "config file not found: " + path.string());
  }
  return parse_config(text::read_file(path), path.parent_path(), env);
}

}  // namespace emer
