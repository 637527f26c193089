// Copyright 2026 The Aspex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "aspex/rag/reader.hpp"

namespace aspex {

struct HttpReaderConfig {
  /// Base URL, e.g. "http://localhost:8080". https needs httplib built with
  /// CPPHTTPLIB_OPENSSL_SUPPORT.
  std::string endpoint;
  std::string path = "/v1/chat/completions";
  std::string model;
  /// Environment variable holding the bearer token; empty means no auth.
  std::string api_key_env = "ASPEX_READER_API_KEY";
  int timeout_seconds = 60;
};

/// Chat-completions style client: posts
/// {"model", "messages": [{"role": "user", "content": prompt}]} and reads
/// choices[0].message.content.
class HttpReader : public Reader {
 public:
  explicit HttpReader(HttpReaderConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw InvalidArgument("http reader: endpoint not configured");
  }

  std::string complete(const ReaderPrompt& prompt) override {
    httplib::Client client(config_.endpoint);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    const nlohmann::json body{{"model", config_.model},
                              {"messages", {{{"role", "user"}, {"content", prompt.text}}}}};
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      throw ReaderError("reader transport failure: " + httplib::to_string(res.error()), prompt.text);
    }
    if (res->status / 100 != 2) {
      throw ReaderError("reader returned HTTP " + std::to_string(res->status), prompt.text);
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ReaderError(std::string("malformed reader response: ") + e.what(), prompt.text);
    }
  }

  std::string name() const override { return "http:" + config_.endpoint; }

 private:
  HttpReaderConfig config_;
};

}  // namespace aspex
