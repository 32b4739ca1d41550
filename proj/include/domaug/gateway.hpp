#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "domaug/error.hpp"
#include "domaug/rng.hpp"
#include "domaug/text.hpp"

namespace domaug {

struct GenerationParams {
  std::string model = "gpt-4";
  double temperature = 0.7;
  int max_tokens = 1200;
  std::optional<std::uint64_t> seed;
};

inline nlohmann::json to_json(const GenerationParams& p) {
  nlohmann::json j = {{"model", p.model}, {"temperature", p.temperature}, {"max_tokens", p.max_tokens}};
  if (p.seed) j["seed"] = *p.seed;
  return j;
}

// A chat model: one user prompt in, completion text out. Implementations must
// accept concurrent calls. Failures throw GatewayError.
class ModelGateway {
 public:
  virtual ~ModelGateway() = default;
  virtual std::string complete(const std::string& prompt, const GenerationParams& params) = 0;
};

// Adapts a callable; handy for scripted judges in tests.
class FunctionGateway final : public ModelGateway {
 public:
  using Fn = std::function<std::string(const std::string&, const GenerationParams&)>;
  explicit FunctionGateway(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt, const GenerationParams& params) override {
    return fn_(prompt, params);
  }

 private:
  Fn fn_;
};

struct RetryConfig {
  int max_retries = 3;  // retries after the first attempt
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};

  std::chrono::milliseconds backoff(int retry) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 0; i < retry; ++i) ms *= multiplier;
    ms = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
  }
};

// Retries transient failures with exponential backoff. Permanent failures and
// exhaustion surface as non-transient GatewayError.
class RetryingGateway final : public ModelGateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RetryingGateway(std::shared_ptr<ModelGateway> inner, RetryConfig config,
                  Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : inner_(std::move(inner)), config_(config), sleep_(std::move(sleeper)) {}

  std::string complete(const std::string& prompt, const GenerationParams& params) override {
    for (int attempt = 0;; ++attempt) {
      try {
        return inner_->complete(prompt, params);
      } catch (const GatewayError& e) {
        if (!e.transient()) throw;
        if (attempt >= config_.max_retries)
          throw GatewayError("gateway exhausted after " + std::to_string(attempt + 1) +
                                 " attempts: " + e.what(),
                             false);
        sleep_(config_.backoff(attempt));
      }
    }
  }

 private:
  std::shared_ptr<ModelGateway> inner_;
  RetryConfig config_;
  Sleeper sleep_;
};

// Appends every request and its outcome to a JSONL audit log.
class LoggingGateway final : public ModelGateway {
 public:
  LoggingGateway(std::shared_ptr<ModelGateway> inner, const std::filesystem::path& log_path)
      : inner_(std::move(inner)), log_(log_path, std::ios::app | std::ios::binary) {
    if (!log_) throw DataError("cannot open gateway log: " + log_path.string());
  }

  std::string complete(const std::string& prompt, const GenerationParams& params) override {
    const auto start = std::chrono::steady_clock::now();
    nlohmann::json entry = {{"prompt", prompt}, {"params", to_json(params)}};
    try {
      std::string reply = inner_->complete(prompt, params);
      entry["response"] = reply;
      write(entry, start);
      return reply;
    } catch (const GatewayError& e) {
      entry["error"] = e.what();
      entry["transient"] = e.transient();
      write(entry, start);
      throw;
    }
  }

 private:
  void write(nlohmann::json& entry, std::chrono::steady_clock::time_point start) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    entry["elapsed_ms"] = ms.count();
    std::lock_guard lock(mutex_);
    entry["seq"] = seq_++;
    log_ << entry.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    log_.flush();
  }

  std::shared_ptr<ModelGateway> inner_;
  std::mutex mutex_;
  std::ofstream log_;
  std::uint64_t seq_ = 0;
};

// ---------------------------------------------------------------------------
// Chat-completion wire format.

inline nlohmann::json chat_request_body(const std::string& prompt, const GenerationParams& p) {
  nlohmann::json body = {{"model", p.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                         {"temperature", p.temperature},
                         {"max_tokens", p.max_tokens}};
  if (p.seed) body["seed"] = *p.seed;
  return body;
}

// Extracts choices[0].message.content. Malformed bodies are permanent errors.
inline std::string parse_chat_response(std::string_view body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw GatewayError("chat response is not JSON", false);
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw GatewayError("chat response lacks choices[0].message.content", false);
  }
}

// 408, 409, 429 and 5xx are worth retrying.
constexpr bool is_transient_status(int status) {
  return status == 408 || status == 409 || status == 429 || status >= 500;
}

struct Endpoint {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;
};

inline Endpoint parse_endpoint(const std::string& url) {
  Endpoint e;
  const auto sep = url.find("://");
  if (sep == std::string::npos) throw UsageError("gateway endpoint must start with http:// or https://: " + url);
  e.scheme = url.substr(0, sep);
  if (e.scheme != "http" && e.scheme != "https")
    throw UsageError("unsupported gateway endpoint scheme: " + e.scheme);
  std::string rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  e.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = hostport.rfind(':');
  if (colon != std::string::npos) {
    e.host = hostport.substr(0, colon);
    try {
      e.port = std::stoi(hostport.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("bad port in gateway endpoint: " + url);
    }
  } else {
    e.host = hostport;
    e.port = e.scheme == "https" ? 443 : 80;
  }
  if (e.host.empty()) throw UsageError("gateway endpoint has no host: " + url);
  return e;
}

}  // namespace domaug
