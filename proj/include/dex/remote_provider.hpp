/*
 * Copyright 2026 The DeX Engine Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// HTTP client for the model bridge service.
//
//   POST /embed_text            {"texts": [..]}                  -> {"vectors": [[..], ..]}
//   POST /embed_image           {"image": <base64>}              -> {"vector": [..]}
//   POST /tags                  {"image": <base64>}              -> {"tags": [..]}
//   POST /describe_and_extract  {"image": <base64>, "instruction"} -> {"description", "tags"}
//   GET  /healthz                                                -> {"model_id", "dimension"}
//
// Responses may be wrapped in an envelope {"model_id", "dimension", "payload",
// "latency_ms"}; the payload is unwrapped and the envelope dimension checked.

#ifndef DEX_REMOTE_PROVIDER_HPP
#define DEX_REMOTE_PROVIDER_HPP

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dex/providers.hpp"

namespace dex {

inline std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (std::uint32_t(std::uint8_t(bytes[i])) << 16) |
                   (std::uint32_t(std::uint8_t(bytes[i + 1])) << 8) | std::uint8_t(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t n = std::uint32_t(std::uint8_t(bytes[i])) << 16;
    if (rest == 2) n |= std::uint32_t(std::uint8_t(bytes[i + 1])) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

struct DescribeResult {
  std::string description;
  std::vector<std::string> tags;
};

class RemoteProvider final : public Provider {
 public:
  explicit RemoteProvider(ProviderConfig config) : Provider(std::move(config)) {}

  std::size_t dimension() const override {
    {
      std::lock_guard lock(mu_);
      if (dimension_ != 0) return dimension_;
    }
    const auto body = request("GET", "/healthz", nlohmann::json());
    if (!body.contains("dimension") || !body["dimension"].is_number_integer()) {
      throw RuntimeError("bridge /healthz did not report a dimension");
    }
    std::lock_guard lock(mu_);
    if (dimension_ == 0) dimension_ = body["dimension"].get<std::size_t>();
    return dimension_;
  }

  EmbeddingVector embed_text(const std::string& text) const override {
    return embed_texts({text}).front();
  }

  // Batched, order-preserving. Previously seen texts are served from the
  // per-run table.
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) const override {
    std::vector<std::string> missing;
    {
      std::lock_guard lock(mu_);
      for (const auto& t : texts) {
        require_text(t);
        if (!text_cache_.contains(t) &&
            std::find(missing.begin(), missing.end(), t) == missing.end()) {
          missing.push_back(t);
        }
      }
    }
    if (!missing.empty()) {
      const auto body = request("POST", "/embed_text", nlohmann::json{{"texts", missing}});
      if (!body.contains("vectors") || !body["vectors"].is_array() || body["vectors"].size() != missing.size()) {
        throw RuntimeError("bridge /embed_text returned a malformed vector list");
      }
      std::vector<EmbeddingVector> fresh;
      for (const auto& v : body["vectors"]) fresh.push_back(to_vector(v));
      std::lock_guard lock(mu_);
      for (std::size_t i = 0; i < missing.size(); ++i) text_cache_.emplace(missing[i], std::move(fresh[i]));
    }
    std::lock_guard lock(mu_);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(text_cache_.at(t));
    return out;
  }

  EmbeddingVector embed_image(const std::string& image_id) const override {
    const auto body = request("POST", "/embed_image", nlohmann::json{{"image", image_base64(image_id)}});
    if (!body.contains("vector")) throw RuntimeError("bridge /embed_image returned no vector");
    return to_vector(body["vector"]);
  }

  std::vector<std::string> detect_tags(const std::string& image_id) const override {
    const auto body = request("POST", "/tags", nlohmann::json{{"image", image_base64(image_id)}});
    return read_tags(body);
  }

  DescribeResult describe_and_extract(const std::string& image_id) const {
    const auto body = request(
        "POST", "/describe_and_extract",
        nlohmann::json{{"image", image_base64(image_id)}, {"instruction", config().instruction_prompt}});
    DescribeResult out;
    if (!body.contains("description") || !body["description"].is_string()) {
      throw RuntimeError("bridge /describe_and_extract returned no description");
    }
    out.description = body["description"].get<std::string>();
    out.tags = read_tags(body);
    return out;
  }

 private:
  // Counting gate bounding the number of concurrent in-flight requests.
  class InFlightGate {
   public:
    explicit InFlightGate(int limit) : available_(std::max(1, limit)) {}
    void acquire() {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return available_ > 0; });
      --available_;
    }
    void release() {
      {
        std::lock_guard lock(mu_);
        ++available_;
      }
      cv_.notify_one();
    }

   private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
  };

  nlohmann::json request(const std::string& method, const std::string& path, const nlohmann::json& payload) const {
    const int attempts_allowed = 1 + std::max(0, config().max_retries);
    std::string last_error;
    int attempt = 0;
    for (; attempt < attempts_allowed; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
      gate_.acquire();
      httplib::Result res = send(method, path, payload);
      gate_.release();
      if (!res) {
        last_error = "transport failure on " + path + ": " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        last_error = "bridge " + path + " answered HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw TransportError("bridge " + path + " rejected the request with HTTP " + std::to_string(res->status) +
                                 ": " + res->body,
                             attempt + 1);
      }
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error&) {
        throw TransportError("bridge " + path + " returned malformed JSON", attempt + 1);
      }
      return unwrap(body);
    }
    throw TransportError(last_error, attempt);
  }

  httplib::Result send(const std::string& method, const std::string& path, const nlohmann::json& payload) const {
    httplib::Client client(config().endpoint);
    const auto timeout = std::chrono::milliseconds(config().timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (method == "GET") return client.Get(path);
    return client.Post(path, payload.dump(), "application/json");
  }

  nlohmann::json unwrap(const nlohmann::json& body) const {
    if (!body.is_object() || !body.contains("payload")) return body;
    if (body.contains("dimension") && body["dimension"].is_number_integer()) {
      const auto dim = body["dimension"].get<std::size_t>();
      std::lock_guard lock(mu_);
      if (dimension_ == 0) {
        dimension_ = dim;
      } else if (dimension_ != dim) {
        throw DimensionError(dimension_, dim, "bridge response envelope");
      }
    }
    return body["payload"];
  }

  EmbeddingVector to_vector(const nlohmann::json& v) const {
    if (!v.is_array()) throw RuntimeError("bridge returned a non-array vector");
    std::vector<double> values;
    values.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) throw RuntimeError("bridge returned a non-numeric vector entry");
      values.push_back(x.get<double>());
    }
    EmbeddingVector out(std::move(values));
    std::lock_guard lock(mu_);
    if (dimension_ == 0) {
      dimension_ = out.size();
    } else if (out.size() != dimension_) {
      throw DimensionError(dimension_, out.size(), "bridge vector");
    }
    return out;
  }

  static std::vector<std::string> read_tags(const nlohmann::json& body) {
    if (!body.contains("tags") || !body["tags"].is_array()) throw RuntimeError("bridge returned no tag list");
    std::vector<std::string> raw;
    for (const auto& t : body["tags"]) {
      if (!t.is_string()) throw RuntimeError("bridge returned a non-string tag");
      raw.push_back(t.get<std::string>());
    }
    std::vector<std::string> non_empty;
    for (auto& t : raw) {
      if (t.find_first_not_of(" \t\r\n") != std::string::npos) non_empty.push_back(std::move(t));
    }
    return canonicalize_tags(non_empty);
  }

  // Raw file bytes are forwarded as-is; nothing is decoded locally.
  std::string image_base64(const std::string& image_id) const {
    if (config().image_dir.empty()) throw MissingRecordError(image_id + " (no image directory configured)");
    std::ifstream in(config().image_dir / image_id, std::ios::binary);
    if (!in) throw MissingRecordError(image_id);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return base64_encode(bytes);
  }

  mutable std::mutex mu_;
  mutable std::size_t dimension_ = 0;
  mutable std::map<std::string, EmbeddingVector> text_cache_;
  mutable InFlightGate gate_{config().max_in_flight};
};

}  // namespace dex

#endif  // DEX_REMOTE_PROVIDER_HPP
