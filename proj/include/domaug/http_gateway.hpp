#pragma once

// Chat-completion gateway over HTTP(S). Kept out of gateway.hpp so that only
// translation units that talk to the network pay for httplib.

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>

#include "domaug/gateway.hpp"

namespace domaug {

struct HttpGatewayConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string token_env = "DOMAUG_API_KEY";  // name of the variable, never the secret
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};
};

class HttpChatGateway final : public ModelGateway {
 public:
  explicit HttpChatGateway(HttpGatewayConfig config)
      : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (endpoint_.scheme == "https")
      throw UsageError("this build has no TLS support; use an http:// gateway endpoint");
#endif
    if (!config_.token_env.empty()) {
      if (const char* t = std::getenv(config_.token_env.c_str())) token_ = t;
    }
  }

  // One client per call: httplib clients are not safe to share across threads.
  std::string complete(const std::string& prompt, const GenerationParams& params) override {
    httplib::Client client(endpoint_.scheme + "://" + endpoint_.host + ":" + std::to_string(endpoint_.port));
    client.set_connection_timeout(static_cast<time_t>(config_.connect_timeout.count()));
    client.set_read_timeout(static_cast<time_t>(config_.read_timeout.count()));
    if (!token_.empty()) client.set_bearer_token_auth(token_);

    const std::string body = chat_request_body(prompt, params).dump(-1, ' ', false,
                                                                     nlohmann::json::error_handler_t::replace);
    auto res = client.Post(endpoint_.path, body, "application/json");
    if (!res)
      throw GatewayError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()), true);
    if (res->status != 200) {
      throw GatewayError("gateway returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                         is_transient_status(res->status));
    }
    return parse_chat_response(res->body);
  }

 private:
  HttpGatewayConfig config_;
  Endpoint endpoint_;
  std::string token_;
};

}  // namespace domaug
