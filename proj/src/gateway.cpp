#include "emer/gateway.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "emer/errors.h"
#include "emer/text.h"

namespace emer {

std::string credential_env_var(std::string_view backend_name) {
  std::string var = "EMER_API_KEY_";
  for (unsigned char c : backend_name) {
    var.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  }
  return var;
}

namespace {

constexpr std::pair<PromptRole, std::string_view> kRoleNames[] = {
    {PromptRole::kPrelabelAudio, "prelabel_audio"},
    {PromptRole::kPrelabelVideo, "prelabel_video"},
    {PromptRole::kMerge, "merge"},
    {PromptRole::kDisambiguate, "disambiguate"},
    {PromptRole::kTranslate, "translate"},
    {PromptRole::kGroup, "group"},
    {PromptRole::kExtractLabels, "extract_labels"},
};

bool is_name_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Walks `body`, calling on_text for literal runs and on_name for placeholders.
template <typename OnText, typename OnName>
void scan_template(std::string_view body, OnText on_text, OnName on_name) {
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if ((c == '{' || c == '}') && i + 1 < body.size() && body[i + 1] == c) {
      on_text(std::string_view(&body[i], 1));
      i += 2;
      continue;
    }
    if (c == '{' && i + 1 < body.size() && is_name_start(body[i + 1])) {
      std::size_t j = i + 1;
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}') {
        on_name(body.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    on_text(std::string_view(&body[i], 1));
    ++i;
  }
}

}  // namespace

std::string_view to_string(PromptRole role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  return "merge";
}

PromptRole parse_prompt_role(std::string_view name) {
  for (const auto& [r, n] : kRoleNames) {
    if (n == name) return r;
  }
  throw TemplateError("unknown prompt role '" + std::string(name) + "'");
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  scan_template(
      body, [](std::string_view) {},
      [&names](std::string_view name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
          names.emplace_back(name);
        }
      });
  return names;
}

std::string PromptTemplate::render(const Bindings& bindings) const {
  std::string out;
  out.reserve(body.size());
  scan_template(
      body, [&out](std::string_view text) { out.append(text); },
      [&](std::string_view name) {
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw TemplateError("template " + id + "@" + version + ": placeholder '" +
                              std::string(name) + "' is not bound");
        }
        out.append(it->second);
      });
  return out;
}

// ---------------------------------------------------------------------------

ReplyCache::ReplyCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::optional<CacheEntry> ReplyCache::get(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  if (directory_.empty()) return std::nullopt;
  std::filesystem::path file = directory_ / (key + ".json");
  if (!std::filesystem::exists(file)) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(text::read_file(file));
    CacheEntry entry{j.at("key").get<std::string>(), j.at("reply").get<std::string>(),
                     j.value("created_at", "")};
    if (entry.key != key) return std::nullopt;
    std::lock_guard lock(mutex_);
    entries_.emplace(key, entry);
    return entry;
  } catch (const std::exception&) {
    // A torn or foreign file is treated as a miss and rewritten on put().
    return std::nullopt;
  }
}

void ReplyCache::put(const CacheEntry& entry) {
  {
    std::lock_guard lock(mutex_);
    entries_[entry.key] = entry;
  }
  if (directory_.empty()) return;
  nlohmann::ordered_json j;
  j["key"] = entry.key;
  j["reply"] = entry.reply;
  j["created_at"] = entry.created_at;
  text::write_file_atomic(directory_ / (entry.key + ".json"), j.dump(2) + "\n");
}

std::size_t ReplyCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

TokenBucket::TokenBucket(double rate, double burst)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(burst_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  while (true) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(mutex_);
      auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    }
    std::this_thread::sleep_for(wait);
  }
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return active_ < limit_; });
  ++active_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_one();
}

// ---------------------------------------------------------------------------

struct Gateway::Backend {
  BackendSpec spec;
  std::shared_ptr<Transport> transport;
  std::unique_ptr<TokenBucket> bucket;
  std::unique_ptr<InFlightLimiter> limiter;
};

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)),
      cache_(options_.cache_enabled ? options_.cache_dir : std::filesystem::path{}) {
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

Gateway::~Gateway() = default;

void Gateway::add_backend(BackendSpec spec, std::shared_ptr<Transport> transport) {
  if (spec.name.empty()) throw Error("InvalidBackend", "backend name is empty");
  if (spec.decode.temperature < 0.0) {
    throw Error("InvalidBackend", "backend '" + spec.name + "': temperature must be >= 0");
  }
  if (spec.decode.max_tokens <= 0) {
    throw Error("InvalidBackend", "backend '" + spec.name + "': max_tokens must be positive");
  }
  if (spec.max_retries < 0) {
    throw Error("InvalidBackend", "backend '" + spec.name + "': max_retries must be >= 0");
  }
  if (!transport) {
    if (spec.endpoint_url.starts_with("http://") || spec.endpoint_url.starts_with("https://")) {
      transport = std::make_shared<HttpTransport>();
    } else {
      throw Error("InvalidBackend", "backend '" + spec.name + "': no transport for '" +
                                        spec.endpoint_url + "'");
    }
  }
  auto backend = std::make_unique<Backend>();
  if (spec.requests_per_second > 0.0) {
    backend->bucket = std::make_unique<TokenBucket>(spec.requests_per_second,
                                                    spec.requests_per_second);
  }
  if (spec.max_in_flight > 0) {
    backend->limiter = std::make_unique<InFlightLimiter>(spec.max_in_flight);
  }
  backend->spec = spec;
  backend->transport = std::move(transport);

  std::lock_guard lock(registry_mutex_);
  if (backends_.contains(spec.name)) {
    throw Error("InvalidBackend", "backend '" + spec.name + "' registered twice");
  }
  backends_.emplace(spec.name, std::move(backend));
}

bool Gateway::has_backend(std::string_view name) const {
  std::lock_guard lock(registry_mutex_);
  return backends_.find(name) != backends_.end();
}

Gateway::Backend& Gateway::lookup(std::string_view name) const {
  std::lock_guard lock(registry_mutex_);
  auto it = backends_.find(name);
  if (it == backends_.end()) {
    throw Error("UnknownBackend", "backend '" + std::string(name) + "' is not configured");
  }
  return *it->second;
}

const BackendSpec& Gateway::backend(std::string_view name) const { return lookup(name).spec; }

std::vector<std::string> Gateway::backend_names() const {
  std::lock_guard lock(registry_mutex_);
  std::vector<std::string> names;
  for (const auto& [name, _] : backends_) names.push_back(name);
  return names;
}

std::string Gateway::cache_key(const BackendSpec& spec, const PromptTemplate& prompt,
                               std::string_view rendered, std::string_view salt) {
  nlohmann::json material = {spec.name,
                             spec.model_id,
                             prompt.id + "@" + prompt.version,
                             std::string(rendered),
                             spec.decode.temperature,
                             spec.decode.max_tokens,
                             std::string(salt)};
  return text::sha256_hex(material.dump());
}

std::string Gateway::complete(const BackendSpec& spec, const PromptTemplate& prompt,
                              const Bindings& bindings, const CallOptions& options) {
  return complete_ex(spec, prompt, bindings, options).reply;
}

Completion Gateway::complete_ex(const BackendSpec& spec, const PromptTemplate& prompt,
                                const Bindings& bindings, const CallOptions& options) {
  Backend& backend = lookup(spec.name);

  ChatRequest request;
  request.prompt = prompt.render(bindings);
  request.template_id = prompt.id;
  request.template_version = prompt.version;
  for (const auto& name : prompt.placeholders()) {
    request.bindings.emplace_back(name, bindings.find(name)->second);
  }

  Completion result;
  result.cache_key = cache_key(spec, prompt, request.prompt, options.cache_salt);
  const bool use_cache = options_.cache_enabled && options.use_cache;
  ++completions_;
  if (use_cache) {
    if (auto hit = cache_.get(result.cache_key)) {
      ++cache_hits_;
      result.reply = hit->reply;
      result.from_cache = true;
      return result;
    }
  }

  std::string last_error;
  const int max_attempts = spec.max_retries + 1;
  auto delay = options_.backoff_initial;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    result.attempts = attempt;
    ++attempts_;
    try {
      if (options_.offline) {
        throw Error("Offline", "backend call to '" + spec.name + "' in offline mode");
      }
      if (backend.bucket) backend.bucket->acquire();
      if (backend.limiter) backend.limiter->acquire();
      try {
        result.reply = backend.transport->send(spec, request);
      } catch (...) {
        if (backend.limiter) backend.limiter->release();
        throw;
      }
      if (backend.limiter) backend.limiter->release();
      if (use_cache) {
        cache_.put(CacheEntry{result.cache_key, result.reply, text::utc_now_iso8601()});
      }
      return result;
    } catch (const BackendRejected& e) {
      if (!e.retryable() || max_attempts == 1) throw;
      last_error = e.what();
    } catch (const BackendTimeout& e) {
      if (max_attempts == 1) throw;
      last_error = e.what();
    }
    if (attempt < max_attempts) {
      options_.sleep(delay);
      auto next = std::chrono::duration_cast<std::chrono::milliseconds>(
          delay * options_.backoff_multiplier);
      delay = std::min(next, options_.backoff_max);
    }
  }
  throw RetriesExhausted(max_attempts, last_error);
}

GatewayStats Gateway::stats() const {
  return GatewayStats{completions_.load(), cache_hits_.load(), attempts_.load()};
}

// ---------------------------------------------------------------------------

std::string prompt_digest(std::string_view rendered_prompt) {
  return text::sha256_hex(rendered_prompt);
}

MockReplyFn echo_last_placeholder() {
  return [](const ChatRequest& request) -> std::string {
    if (request.bindings.empty()) return request.prompt;
    return request.bindings.back().second;
  };
}

MockReplyFn constant_reply(std::string reply) {
  return [reply = std::move(reply)](const ChatRequest&) { return reply; };
}

MockBackend::MockBackend(std::map<std::string, std::string> script, MockReplyFn fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

void MockBackend::script(std::string_view rendered_prompt, std::string reply) {
  std::lock_guard lock(mutex_);
  script_[prompt_digest(rendered_prompt)] = std::move(reply);
}

void MockBackend::set_fallback(MockReplyFn fallback) {
  std::lock_guard lock(mutex_);
  fallback_ = std::move(fallback);
}

void MockBackend::fail_next(int count, int status) {
  std::lock_guard lock(mutex_);
  pending_failures_ = count;
  pending_status_ = status;
}

void MockBackend::fail_when(std::function<bool(const ChatRequest&)> predicate, int status) {
  std::lock_guard lock(mutex_);
  failure_rules_.emplace_back(std::move(predicate), status);
}

void MockBackend::timeout_when(std::function<bool(const ChatRequest&)> predicate) {
  std::lock_guard lock(mutex_);
  timeout_rules_.push_back(std::move(predicate));
}

void MockBackend::set_latency(std::chrono::milliseconds latency) {
  std::lock_guard lock(mutex_);
  latency_ = latency;
}

std::vector<std::string> MockBackend::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::string MockBackend::send(const BackendSpec& spec, const ChatRequest& request) {
  ++calls_;
  int now_active = ++active_;
  int seen = max_seen_.load();
  while (now_active > seen && !max_seen_.compare_exchange_weak(seen, now_active)) {
  }
  struct ActiveGuard {
    std::atomic<int>& a;
    ~ActiveGuard() { --a; }
  } guard{active_};

  std::chrono::milliseconds latency;
  int fail_status = 0;
  bool timeout = false;
  std::optional<std::string> reply;
  MockReplyFn fallback;
  {
    std::lock_guard lock(mutex_);
    prompts_.push_back(request.prompt);
    latency = latency_;
    if (pending_failures_ > 0) {
      --pending_failures_;
      fail_status = pending_status_;
    }
    for (const auto& [predicate, status] : failure_rules_) {
      if (!fail_status && predicate(request)) fail_status = status;
    }
    for (const auto& predicate : timeout_rules_) {
      if (predicate(request)) timeout = true;
    }
    if (auto it = script_.find(prompt_digest(request.prompt)); it != script_.end()) {
      reply = it->second;
    }
    fallback = fallback_;
  }
  if (latency.count() > 0) std::this_thread::sleep_for(latency);
  if (timeout) throw BackendTimeout("mock '" + spec.name + "' timed out");
  if (fail_status) {
    throw BackendRejected(fail_status, "scripted failure",
                          "mock '" + spec.name + "' returned " + std::to_string(fail_status));
  }
  if (reply) return *reply;
  if (fallback) return fallback(request);
  throw BackendRejected(404, request.prompt,
                        "mock '" + spec.name + "' has no reply scripted for prompt " +
                            prompt_digest(request.prompt).substr(0, 12));
}

BackendSpec mock_backend(Gateway& gateway, std::string name,
                         std::shared_ptr<MockBackend> mock, int max_retries) {
  BackendSpec spec;
  spec.endpoint_url = "mock://" + name;
  spec.model_id = "mock-" + name;
  spec.name = std::move(name);
  spec.max_retries = max_retries;
  gateway.add_backend(spec, std::move(mock));
  return spec;
}

}  // namespace emer
