#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <regex>

#include <nlohmann/json.hpp>

#include "emer/errors.h"
#include "emer/gateway.h"

namespace emer {
namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw BackendRejected(0, "", "malformed endpoint URL '" + url + "'");
  }
  ParsedUrl parsed{m[1].str(), m[2].matched ? m[2].str() : std::string()};
  if (parsed.path.empty() || parsed.path == "/") parsed.path = "/v1/chat/completions";
  return parsed;
}

}  // namespace

std::string HttpTransport::request_body(const BackendSpec& spec, const ChatRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = spec.model_id;
  body["messages"] = nlohmann::json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = spec.decode.temperature;
  body["max_tokens"] = spec.decode.max_tokens;
  body["stream"] = false;
  return body.dump();
}

std::string HttpTransport::reply_text(int status, const std::string& body) {
  if (status < 200 || status >= 300) {
    throw BackendRejected(status, body, "HTTP " + std::to_string(status));
  }
  try {
    auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Content-part arrays: concatenate the text parts.
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw BackendRejected(status, body,
                          std::string("response is not a chat completion: ") + e.what());
  }
}

std::string HttpTransport::send(const BackendSpec& spec, const ChatRequest& request) {
  ParsedUrl url = split_url(spec.endpoint_url);
  httplib::Client client(url.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(spec.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(spec.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers{{"Accept", "application/json"}};
  if (const char* key = std::getenv(credential_env_var(spec.name).c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto response = client.Post(url.path, headers, request_body(spec, request), "application/json");
  if (!response) {
    auto error = response.error();
    if (error == httplib::Error::ConnectionTimeout || error == httplib::Error::Read) {
      throw BackendTimeout("backend '" + spec.name + "': " + httplib::to_string(error));
    }
    // Status 0 marks a transport-level failure; it is retried.
    throw BackendRejected(0, "", "backend '" + spec.name + "': " + httplib::to_string(error));
  }
  return reply_text(response->status, response->body);
}

}  // namespace emer
