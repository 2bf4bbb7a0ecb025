#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace emer {

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

// A named chat-completions endpoint. `endpoint_url` is http(s)://... for
// real servers or mock://<name> for in-process mocks.
struct BackendSpec {
  std::string name;
  std::string endpoint_url;
  std::string model_id;
  DecodeParams decode;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  // 0 disables the limit.
  double requests_per_second = 0.0;
  // 0 disables the limit.
  int max_in_flight = 0;
};

// EMER_API_KEY_<NAME>, with the name uppercased and non-alphanumerics
// replaced by '_'.
std::string credential_env_var(std::string_view backend_name);

enum class PromptRole {
  kPrelabelAudio,
  kPrelabelVideo,
  kMerge,
  kDisambiguate,
  kTranslate,
  kGroup,
  kExtractLabels,
};

std::string_view to_string(PromptRole role);
PromptRole parse_prompt_role(std::string_view name);

using Bindings = std::map<std::string, std::string, std::less<>>;

// Placeholders are written {name}; "{{" and "}}" produce literal braces and
// any other brace is copied through unchanged.
struct PromptTemplate {
  std::string id;
  std::string version;
  std::string body;
  PromptRole role = PromptRole::kMerge;

  // Placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
  // Throws TemplateError when a placeholder has no binding.
  std::string render(const Bindings& bindings) const;
};

// What a transport receives for one call.
struct ChatRequest {
  std::string prompt;
  std::string template_id;
  std::string template_version;
  // Bound values in placeholder order.
  std::vector<std::pair<std::string, std::string>> bindings;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Returns the reply text or throws BackendTimeout / BackendRejected.
  virtual std::string send(const BackendSpec& spec, const ChatRequest& request) = 0;
};

struct CacheEntry {
  std::string key;
  std::string reply;
  std::string created_at;
};

// Content-addressed reply cache. With a directory, each entry is also stored
// as <dir>/<key>.json and survives process restarts.
class ReplyCache {
 public:
  explicit ReplyCache(std::filesystem::path directory = {});

  std::optional<CacheEntry> get(const std::string& key);
  void put(const CacheEntry& entry);
  std::size_t size() const;

 private:
  std::filesystem::path directory_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, CacheEntry> entries_;
};

// Classic token bucket; `burst` tokens at most, refilled at `rate` per second.
class TokenBucket {
 public:
  TokenBucket(double rate, double burst);
  void acquire();

 private:
  std::mutex mutex_;
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

// Caps concurrent requests to one backend.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : limit_(limit) {}
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

struct GatewayOptions {
  bool cache_enabled = true;
  std::filesystem::path cache_dir;
  std::chrono::milliseconds backoff_initial{500};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds backoff_max{30000};
  // Used for retry backoff; tests substitute a no-op.
  std::function<void(std::chrono::milliseconds)> sleep;
  // Any attempt to reach a transport fails; used for dry runs.
  bool offline = false;
};

struct CallOptions {
  bool use_cache = true;
  // Mixed into the cache key to keep otherwise identical calls apart.
  std::string cache_salt;
};

struct Completion {
  std::string reply;
  int attempts = 0;
  bool from_cache = false;
  std::string cache_key;
};

struct GatewayStats {
  long long completions = 0;
  long long cache_hits = 0;
  long long attempts = 0;
};

// Shared, thread-safe entry point for every model call.
class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Registers a backend. Without a transport, http(s) URLs get the HTTP
  // client; mock:// URLs must be given their transport explicitly.
  void add_backend(BackendSpec spec, std::shared_ptr<Transport> transport = nullptr);
  bool has_backend(std::string_view name) const;
  const BackendSpec& backend(std::string_view name) const;
  std::vector<std::string> backend_names() const;

  std::string complete(const BackendSpec& spec, const PromptTemplate& prompt,
                       const Bindings& bindings, const CallOptions& options = {});
  Completion complete_ex(const BackendSpec& spec, const PromptTemplate& prompt,
                         const Bindings& bindings, const CallOptions& options = {});

  GatewayStats stats() const;
  ReplyCache& cache() { return cache_; }

  static std::string cache_key(const BackendSpec& spec, const PromptTemplate& prompt,
                               std::string_view rendered, std::string_view salt = {});

 private:
  struct Backend;
  Backend& lookup(std::string_view name) const;

  GatewayOptions options_;
  ReplyCache cache_;
  mutable std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<Backend>, std::less<>> backends_;
  std::atomic<long long> completions_{0};
  std::atomic<long long> cache_hits_{0};
  std::atomic<long long> attempts_{0};
};

// OpenAI-compatible chat-completions client over cpp-httplib.
class HttpTransport : public Transport {
 public:
  std::string send(const BackendSpec& spec, const ChatRequest& request) override;

  // Builds the JSON request body.
  static std::string request_body(const BackendSpec& spec, const ChatRequest& request);
  // Extracts choices[0].message.content; throws BackendRejected otherwise.
  static std::string reply_text(int status, const std::string& body);
};

// ---------------------------------------------------------------------------
// Deterministic in-process backend used by every pipeline and harness test.

std::string prompt_digest(std::string_view rendered_prompt);

using MockReplyFn = std::function<std::string(const ChatRequest&)>;

// Default reply: the value bound to the last placeholder of the template.
MockReplyFn echo_last_placeholder();
MockReplyFn constant_reply(std::string reply);

class MockBackend : public Transport {
 public:
  // `script` maps prompt_digest(rendered prompt) to a reply. Without a
  // default, unscripted prompts are rejected with status 404.
  explicit MockBackend(std::map<std::string, std::string> script = {},
                       MockReplyFn fallback = nullptr);

  void script(std::string_view rendered_prompt, std::string reply);
  void set_fallback(MockReplyFn fallback);
  // The next `count` calls fail with `status` (before any scripted reply).
  void fail_next(int count, int status = 503);
  // Calls whose request matches `predicate` always fail with `status`.
  void fail_when(std::function<bool(const ChatRequest&)> predicate, int status = 500);
  // Calls whose request matches `predicate` time out.
  void timeout_when(std::function<bool(const ChatRequest&)> predicate);
  void set_latency(std::chrono::milliseconds latency);

  std::string send(const BackendSpec& spec, const ChatRequest& request) override;

  long long calls() const { return calls_.load(); }
  int max_concurrency_seen() const { return max_seen_.load(); }
  // Rendered prompts in call order.
  std::vector<std::string> prompts() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::string> script_;
  MockReplyFn fallback_;
  int pending_failures_ = 0;
  int pending_status_ = 503;
  std::vector<std::pair<std::function<bool(const ChatRequest&)>, int>> failure_rules_;
  std::vector<std::function<bool(const ChatRequest&)>> timeout_rules_;
  std::chrono::milliseconds latency_{0};
  std::vector<std::string> prompts_;
  std::atomic<long long> calls_{0};
  std::atomic<int> active_{0};
  std::atomic<int> max_seen_{0};
};

// Registers `mock` under `name` and returns its spec (mock://<name>).
BackendSpec mock_backend(Gateway& gateway, std::string name,
                         std::shared_ptr<MockBackend> mock, int max_retries = 3);

}  // namespace emer
