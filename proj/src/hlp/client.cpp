// Copyright 2026 The DoughPlan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "dough/hlp/hlp.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a `_res` macro.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace dough {

void LlmClientConfig::validate() const {
  if (!(timeout_s > 0.0)) throw ConfigError("llm timeout must be positive");
  if (max_retries < 0) throw ConfigError("llm max_retries must be >= 0");
  if (!(retry_backoff_s >= 0.0)) throw ConfigError("llm retry backoff must be >= 0");
  if (fixture_dir) {
    if (!std::filesystem::is_directory(*fixture_dir)) {
      throw ConfigError("fixture directory '" + fixture_dir->string() + "' does not exist");
    }
  } else {
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
      throw ConfigError("llm endpoint must be an http(s) URL");
    }
    if (api_key_env.empty()) throw ConfigError("llm api_key_env is empty");
  }
}

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResult post(const HttpRequest& req) override {
    HttpResult out;
    // scheme://host[:port]/path
    const auto scheme_end = req.url.find("://");
    if (scheme_end == std::string::npos) {
      out.error = "malformed url";
      return out;
    }
    const auto path_start = req.url.find('/', scheme_end + 3);
    const std::string origin = req.url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : req.url.substr(path_start);

    httplib::Client cli(origin);
    const auto sec = std::chrono::duration<double>(req.timeout_s);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(sec);
    cli.set_connection_timeout(us);
    cli.set_read_timeout(us);
    cli.set_write_timeout(us);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : req.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto res = cli.Post(path, headers, req.body, content_type);
    if (!res) {
      const auto err = res.error();
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      // httplib reports a read timeout as a plain read error.
      out.timed_out = err == httplib::Error::ConnectionTimeout ||
                      (err == httplib::Error::Read && elapsed >= 0.9 * req.timeout_s);
      out.error = httplib::to_string(err);
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool retryable(const HttpResult& r) {
  return r.timed_out || r.status == 0 || r.status == 429 || r.status >= 500;
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() {
  return std::make_unique<HttplibTransport>();
}

std::string request_plan(const LlmClientConfig& cfg, const std::string& prompt,
                         const std::string& task, HttpTransport* transport) {
  if (cfg.fixture_dir) {
    const auto path = *cfg.fixture_dir / (task + ".json");
    if (!std::filesystem::is_regular_file(path)) {
      throw FixtureNotFoundError("no fixture for task '" + task + "' at " + path.string());
    }
    return read_file(path);
  }
  cfg.validate();
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw MissingCredentialError("environment variable " + cfg.api_key_env +
                                 " holding the LLM API key is not set");
  }

  std::unique_ptr<HttpTransport> owned;
  if (transport == nullptr) {
    owned = make_http_transport();
    transport = owned.get();
  }
  const nlohmann::json body = {
      {"model", cfg.model},
      {"temperature", cfg.temperature},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
  };
  HttpRequest req;
  req.url = cfg.endpoint;
  req.headers = {{"Authorization", std::string("Bearer ") + key},
                 {"Content-Type", "application/json"}};
  req.body = body.dump();
  req.timeout_s = cfg.timeout_s;

  const int attempts = 1 + cfg.max_retries;
  HttpResult last;
  double backoff = cfg.retry_backoff_s;
  for (int a = 0; a < attempts; ++a) {
    if (a > 0 && backoff > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    last = transport->post(req);
    if (!last.timed_out && last.status >= 200 && last.status < 300) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(last.body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw LlmError(std::string("unexpected completion response: ") + e.what());
      }
    }
    if (!retryable(last)) break;
  }
  if (last.timed_out) throw LlmTimeoutError("LLM request timed out", attempts);
  if (last.status == 0) {
    throw LlmHttpError("LLM request failed: " + last.error, 0);
  }
  throw LlmHttpError("LLM endpoint returned HTTP " + std::to_string(last.status),
                     last.status);
}

}  // namespace dough
