#pragma once
// HTTP client backend for a chat-completions endpoint. Kept separate from
// synthgen.hpp so that offline builds and tests do not pull in the HTTP
// stack unless they need it.

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "autogets/common.hpp"
#include "autogets/synthgen.hpp"

namespace autogets {

// Transient endpoint failure (unreachable, timeout, 5xx) after the retry
// budget is exhausted; the message carries the attempt count.
class RetryableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LlmEndpoint {
  std::string base;            // scheme://host:port
  std::string path = "/v1/chat/completions";
  std::string api_key;         // sent as a bearer token when non-empty
  double timeout_s = 30.0;
  int max_retries = 3;
  int max_inflight = 4;
  std::string audit_log;       // JSONL path; empty disables auditing
};

// Splits endpoint url into (scheme://host:port, path).
inline LlmEndpoint make_endpoint(const std::string& url) {
  LlmEndpoint ep;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("LLM endpoint must start with http:// or https://: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    ep.base = url;
  } else {
    ep.base = url.substr(0, path_start);
    ep.path = url.substr(path_start);
  }
  return ep;
}

class LlmGenerator : public Generator {
 public:
  LlmGenerator(LlmEndpoint endpoint, LlmParams params,
               std::string prompt_template = kDefaultPromptTemplate)
      : endpoint_(std::move(endpoint)),
        params_(std::move(params)),
        template_(std::move(prompt_template)),
        inflight_(std::make_unique<std::counting_semaphore<64>>(
            endpoint_.max_inflight < 1 ? 1
                                       : std::min(endpoint_.max_inflight, 64))) {
    params_.validate();
  }

  std::string id() const override { return "llm"; }

  std::vector<std::string> produce(const ClassId& cls,
                                   const std::vector<std::string>& example_texts,
                                   long count, uint64_t,
                                   std::vector<std::string>& warnings) override {
    std::string prompt = build_prompt(cls, example_texts, count, template_);
    nlohmann::json body = {
        {"model", params_.model},
        {"messages", {{{"role", "user"}, {"content", prompt}}}},
        {"temperature", params_.temperature},
        {"max_tokens", params_.max_tokens},
        {"top_p", params_.top_p},
        {"frequency_penalty", params_.frequency_penalty},
        {"presence_penalty", params_.presence_penalty},
    };
    std::string response = post_with_retries(body.dump(), prompt);
    return split_completions(response, warnings);
  }

 private:
  std::string post_with_retries(const std::string& body, const std::string& prompt) {
    std::string last_error;
    for (int attempt = 1; attempt <= endpoint_.max_retries; ++attempt) {
      auto started = std::chrono::steady_clock::now();
      inflight_->acquire();
      httplib::Client client(endpoint_.base);
      auto secs = static_cast<time_t>(endpoint_.timeout_s);
      auto usecs = static_cast<long>((endpoint_.timeout_s - double(secs)) * 1e6);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      httplib::Headers headers;
      if (!endpoint_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
      auto res = client.Post(endpoint_.path, headers, body, "application/json");
      inflight_->release();
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();

      if (res && res->status == 200) {
        audit(prompt, body, res->status, res->body, elapsed);
        return res->body;
      }
      if (res) {
        audit(prompt, body, res->status, res->body, elapsed);
        last_error = "HTTP status " + std::to_string(res->status);
        if (res->status >= 400 && res->status < 500)
          throw std::runtime_error("LLM endpoint rejected the request: " + last_error);
      } else {
        audit(prompt, body, 0, httplib::to_string(res.error()), elapsed);
        last_error = httplib::to_string(res.error());
      }
      if (attempt < endpoint_.max_retries)
        std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    }
    throw RetryableError("LLM endpoint failed after " +
                         std::to_string(endpoint_.max_retries) +
                         " attempts: " + last_error);
  }

  std::vector<std::string> split_completions(const std::string& response,
                                             std::vector<std::string>& warnings) {
    std::string content;
    try {
      auto json = nlohmann::json::parse(response);
      const auto& choice = json.at("choices").at(0);
      if (choice.contains("message"))
        content = choice.at("message").at("content").get<std::string>();
      else
        content = choice.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(std::string("malformed LLM response: ") + e.what());
    }

    // Blank lines delimit completions; blank completions are dropped.
    std::vector<std::string> out;
    size_t skipped = 0;
    std::string current;
    auto flush = [&]() {
      std::string text = trim(current);
      current.clear();
      if (text.empty())
        ++skipped;
      else
        out.push_back(text);
    };
    for (const auto& line : split_char(content, '\n')) {
      if (trim(line).empty()) {
        if (!current.empty()) flush();
      } else {
        if (!current.empty()) current += "\n";
        current += line;
      }
    }
    if (!current.empty()) flush();
    if (skipped > 0)
      warnings.push_back("skipped " + std::to_string(skipped) +
                         " empty LLM completion(s)");
    if (out.empty())
      warnings.push_back("LLM returned no usable completions; batch is empty");
    return out;
  }

  void audit(const std::string& prompt, const std::string& request_body,
             int status, const std::string& response_body, long long latency_ms) {
    if (endpoint_.audit_log.empty()) return;
    nlohmann::json line = {
        {"prompt", prompt},     {"request", request_body},
        {"status", status},     {"response", response_body},
        {"latency_ms", latency_ms},
    };
    std::lock_guard<std::mutex> lock(audit_mutex_);
    std::ofstream out(endpoint_.audit_log, std::ios::app);
    out << line.dump() << "\n";
  }

  LlmEndpoint endpoint_;
  LlmParams params_;
  std::string template_;
  std::unique_ptr<std::counting_semaphore<64>> inflight_;
  std::mutex audit_mutex_;
};

}  // namespace autogets
