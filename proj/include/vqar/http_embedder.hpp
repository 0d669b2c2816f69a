// Copyright 2026 The vqar Authors. All Rights Reserved.
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

// Embedder backed by an external HTTP service.
//
//   POST <url>   {"texts": ["...", ...]}
//   200          {"vectors": [[...], ...]}   (one vector per text, same order)
//
// Returned vectors are unit-normalized client-side. Each call opens its own
// connection, so concurrent calls are safe.

#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "vqar/embedding.hpp"
#include "vqar/error.hpp"

namespace vqar {

class HttpEmbedder final : public Embedder {
 public:
  struct Options {
    double timeout_seconds = 10.0;
    int retries = 2;
    std::chrono::milliseconds retry_backoff{100};
  };

  // `url` is "http://host[:port]/path".
  explicit HttpEmbedder(std::string url) : HttpEmbedder(std::move(url), Options{}) {}

  HttpEmbedder(std::string url, Options options) : url_(std::move(url)), options_(options) {
    auto scheme_end = url_.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("embedding url needs a scheme: " + url_);
    auto path_start = url_.find('/', scheme_end + 3);
    base_ = path_start == std::string::npos ? url_ : url_.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url_.substr(path_start);
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override {
    nlohmann::json body = {{"texts", nlohmann::json::array()}};
    for (const auto& t : texts) body["texts"].push_back(t);
    const auto payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(options_.retry_backoff * attempt);
      httplib::Client client(base_);
      auto secs = static_cast<time_t>(options_.timeout_seconds);
      auto usecs = static_cast<time_t>((options_.timeout_seconds - static_cast<double>(secs)) * 1e6);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      auto res = client.Post(path_, payload, "application/json");
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      return decode(res->body, texts.size());
    }
    throw IoError("embedding service " + url_ + ": " + last_error);
  }

  std::string describe() const override { return "http(" + url_ + ")"; }

 private:
  static std::vector<EmbeddingVector> decode(const std::string& body, std::size_t expected) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("embedding response is not JSON", e.byte);
    }
    if (!j.is_object() || !j.contains("vectors") || !j["vectors"].is_array())
      throw SchemaError("embedding response needs a 'vectors' array", "");
    const auto& vs = j["vectors"];
    if (vs.size() != expected)
      throw SchemaError("embedding response has " + std::to_string(vs.size()) +
                            " vectors for " + std::to_string(expected) + " texts",
                        "");
    std::vector<EmbeddingVector> out;
    out.reserve(expected);
    for (const auto& v : vs) {
      EmbeddingVector e;
      try {
        e.values = v.get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw SchemaError("embedding vectors must be arrays of numbers", "");
      }
      if (!out.empty() && e.dimension() != out.front().dimension())
        throw SchemaError("embedding vectors have inconsistent dimensions", "");
      double n = e.norm();
      if (n > 0.0)
        for (auto& x : e.values) x /= n;
      out.push_back(std::move(e));
    }
    return out;
  }

  std::string url_;
  std::string base_;
  std::string path_;
  Options options_;
};

}  // namespace vqar
