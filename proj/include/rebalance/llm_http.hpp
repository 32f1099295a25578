#pragma once

// Live transport for OpenAI-compatible chat-completion endpoints.
// Requires linking OpenSSL (CMake target rebalance_http).

#include <chrono>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rebalance/error.hpp"
#include "rebalance/llm.hpp"

namespace rebalance {

inline constexpr const char* kApiKeyEnv = "REBALANCE_LLM_API_KEY";

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{1000};  // doubles after each failure
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct Endpoint {
  std::string scheme_host_port;  // e.g. https://api.openai.com
  std::string path;              // e.g. /v1/chat/completions
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string api_key_from_env() {
  const char* key = std::getenv(kApiKeyEnv);
  if (!key || !*key) throw ConfigError(std::string(kApiKeyEnv) + " is not set");
  return key;
}

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string endpoint_url, std::string api_key, RetryPolicy retry = {},
                std::chrono::seconds timeout = std::chrono::seconds(60))
      : endpoint_(split_endpoint(endpoint_url)),
        api_key_(std::move(api_key)),
        retry_(std::move(retry)),
        timeout_(timeout) {}

  std::string complete(const ChatRequest& request) override {
    nlohmann::json body = request.canonical();
    body.erase("n_variants");
    const auto payload = body.dump();

    auto delay = retry_.base_delay;
    std::string last_error;
    bool rate_limited = false;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
      httplib::Client client(endpoint_.scheme_host_port);
      client.set_connection_timeout(timeout_);
      client.set_read_timeout(timeout_);
      const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
      const auto res = client.Post(endpoint_.path, headers, payload, "application/json");

      auto wait = delay;
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
        rate_limited = false;
      } else if (res->status == 200) {
        return parse_completion(res->body);
      } else if (res->status == 429) {
        last_error = "rate limited (HTTP 429)";
        rate_limited = true;
        const auto retry_after = res->get_header_value("Retry-After");
        if (!retry_after.empty()) {
          try {
            wait = std::chrono::milliseconds(static_cast<long long>(std::stod(retry_after) * 1000));
          } catch (const std::exception&) {
            // keep the backoff delay
          }
        }
      } else if (res->status >= 500) {
        last_error = "server error (HTTP " + std::to_string(res->status) + ")";
        rate_limited = false;
      } else {
        throw TransportError("endpoint rejected request (HTTP " + std::to_string(res->status) +
                             "): " + res->body.substr(0, 200));
      }
      if (attempt < retry_.attempts) retry_.sleep(wait);
      delay *= 2;
    }
    if (rate_limited) throw RateLimited(last_error + " after " + std::to_string(retry_.attempts) + " attempts");
    throw TransportError(last_error + " after " + std::to_string(retry_.attempts) + " attempts");
  }

  static std::string parse_completion(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw UnparseableResponse(std::string("unexpected completion payload: ") + e.what());
    }
  }

 private:
  Endpoint endpoint_;
  std::string api_key_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
};

}  // namespace rebalance
