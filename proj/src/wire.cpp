/* Copyright 2026 The spotrl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "wire.h"

#include <json.hpp>
#include <set>

namespace spotrl::wire {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) {
  throw Error("wire: " + what, Error::Kind::kParse);
}

std::string_view trim_eol(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

json parse_object(std::string_view line) {
  line = trim_eol(line);
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) fail("malformed JSON");
  if (!j.is_object()) fail("message must be a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) fail("missing \"type\"");
  return j;
}

void expect_fields(const json& j, std::initializer_list<const char*> fields) {
  std::set<std::string> allowed{"type"};
  for (const char* f : fields) {
    allowed.insert(f);
    if (!j.contains(f)) fail(j["type"].get<std::string>() + ": missing \"" + f + "\"");
  }
  for (const auto& [key, value] : j.items()) {
    if (allowed.count(key) == 0) {
      fail(j["type"].get<std::string>() + ": unknown field \"" + key + "\"");
    }
  }
}

std::int64_t get_int(const json& j, const char* field) {
  const auto& v = j[field];
  if (!v.is_number_integer()) fail(std::string("\"") + field + "\" must be an integer");
  return v.get<std::int64_t>();
}

std::uint32_t get_token(const json& v) {
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() > 0xffffffffull) {
    fail("token ids must be unsigned 32-bit integers");
  }
  return v.get<std::uint32_t>();
}

std::string get_string(const json& j, const char* field) {
  const auto& v = j[field];
  if (!v.is_string()) fail(std::string("\"") + field + "\" must be a string");
  return v.get<std::string>();
}

std::vector<std::uint32_t> get_tokens(const json& j, const char* field) {
  const auto& v = j[field];
  if (!v.is_array()) fail(std::string("\"") + field + "\" must be an array");
  std::vector<std::uint32_t> out;
  out.reserve(v.size());
  for (const auto& t : v) out.push_back(get_token(t));
  return out;
}

std::string dump_line(const nlohmann::ordered_json& j) { return j.dump() + "\n"; }

}  // namespace

const char* type_name(const Message& message) {
  struct Visitor {
    const char* operator()(const Register&) const { return "register"; }
    const char* operator()(const Status&) const { return "status"; }
    const char* operator()(const Token&) const { return "token"; }
    const char* operator()(const Complete&) const { return "complete"; }
    const char* operator()(const Generate&) const { return "generate"; }
    const char* operator()(const Cancel&) const { return "cancel"; }
    const char* operator()(const PullWeights&) const { return "pull_weights"; }
  };
  return std::visit(Visitor{}, message);
}

std::string encode(const Message& message) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["type"] = type_name(message);
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Register>) {
          j["instance_id"] = m.instance_id;
          j["gpu_count"] = m.gpu_count;
        } else if constexpr (std::is_same_v<T, Status>) {
          j["m_pending"] = m.m_pending;
          j["m_exec"] = m.m_exec;
          j["weight_version"] = m.weight_version;
        } else if constexpr (std::is_same_v<T, Token>) {
          j["request_id"] = m.request_id;
          j["token_id"] = m.token_id;
        } else if constexpr (std::is_same_v<T, Complete> || std::is_same_v<T, Cancel>) {
          j["request_id"] = m.request_id;
        } else if constexpr (std::is_same_v<T, Generate>) {
          j["request_id"] = m.request_id;
          j["prompt_tokens"] = m.prompt_tokens;
          j["prefix_tokens"] = m.prefix_tokens;
        } else if constexpr (std::is_same_v<T, PullWeights>) {
          j["version"] = m.version;
          j["agent_endpoint"] = m.agent_endpoint;
        }
      },
      message);
  return dump_line(j);
}

Message decode(std::string_view line) {
  const json j = parse_object(line);
  const std::string type = j["type"].get<std::string>();
  if (type == "register") {
    expect_fields(j, {"instance_id", "gpu_count"});
    Register m{get_string(j, "instance_id"), static_cast<std::int32_t>(get_int(j, "gpu_count"))};
    if (m.instance_id.empty()) fail("register: empty instance_id");
    if (m.gpu_count < 1) fail("register: gpu_count must be >= 1");
    return m;
  }
  if (type == "status") {
    expect_fields(j, {"m_pending", "m_exec", "weight_version"});
    Status m{static_cast<std::int32_t>(get_int(j, "m_pending")),
             static_cast<std::int32_t>(get_int(j, "m_exec")), get_int(j, "weight_version")};
    if (m.m_pending < 0 || m.m_exec < 0 || m.weight_version < 0) {
      fail("status: counts must be non-negative");
    }
    return m;
  }
  if (type == "token") {
    expect_fields(j, {"request_id", "token_id"});
    return Token{get_int(j, "request_id"), get_token(j["token_id"])};
  }
  if (type == "complete") {
    expect_fields(j, {"request_id"});
    return Complete{get_int(j, "request_id")};
  }
  if (type == "generate") {
    expect_fields(j, {"request_id", "prompt_tokens", "prefix_tokens"});
    return Generate{get_int(j, "request_id"), get_tokens(j, "prompt_tokens"),
                    get_tokens(j, "prefix_tokens")};
  }
  if (type == "cancel") {
    expect_fields(j, {"request_id"});
    return Cancel{get_int(j, "request_id")};
  }
  if (type == "pull_weights") {
    expect_fields(j, {"version", "agent_endpoint"});
    return PullWeights{get_int(j, "version"), get_string(j, "agent_endpoint")};
  }
  fail("unknown message type \"" + type + "\"");
}

void LineBuffer::feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.append(bytes);
  if (buffered() > max_line_ && buffer_.find('\n', offset_) == std::string::npos) {
    fail("line exceeds " + std::to_string(max_line_) + " bytes");
  }
}

std::optional<std::string> LineBuffer::next_line() {
  const auto pos = buffer_.find('\n', offset_);
  if (pos == std::string::npos) return std::nullopt;
  std::string line = buffer_.substr(offset_, pos - offset_);
  offset_ = pos + 1;
  if (offset_ > 4096 && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return line;
}

// ---------------------------------------------------------------- pull session

std::string encode_pull_request(const PullRequest& request) {
  nlohmann::ordered_json j;
  j["type"] = "pull";
  j["version"] = request.version;
  return dump_line(j);
}

PullRequest decode_pull_request(std::string_view line) {
  const json j = parse_object(line);
  if (j["type"] != "pull") fail("expected a pull request");
  expect_fields(j, {"version"});
  PullRequest r{get_int(j, "version")};
  if (r.version < 1) fail("pull: version must be >= 1");
  return r;
}

std::string encode_shard(std::string_view payload) {
  std::string out;
  out.reserve(9 + payload.size());
  out.push_back('S');
  const auto n = static_cast<std::uint64_t>(payload.size());
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((n >> shift) & 0xff));
  }
  out.append(payload);
  return out;
}

std::string encode_done(const PullDone& done) {
  nlohmann::ordered_json j;
  j["type"] = "done";
  j["version"] = done.version;
  j["bytes"] = done.bytes;
  return dump_line(j);
}

void PullStreamDecoder::feed(std::string_view bytes) {
  if (done_ && !bytes.empty()) fail("bytes after the done frame");
  buffer_.append(bytes);
}

std::optional<PullStreamDecoder::Event> PullStreamDecoder::next() {
  if (done_ || offset_ >= buffer_.size()) return std::nullopt;
  const char tag = buffer_[offset_];
  if (tag == 'S') {
    if (buffer_.size() - offset_ < 9) return std::nullopt;
    std::uint64_t n = 0;
    for (int i = 1; i <= 8; ++i) {
      n = (n << 8) | static_cast<unsigned char>(buffer_[offset_ + i]);
    }
    if (buffer_.size() - offset_ - 9 < n) return std::nullopt;
    Shard shard{buffer_.substr(offset_ + 9, n)};
    offset_ += 9 + n;
    bytes_ += n;
    if (offset_ == buffer_.size()) {
      buffer_.clear();
      offset_ = 0;
    }
    return shard;
  }
  if (tag == '{') {
    const auto pos = buffer_.find('\n', offset_);
    if (pos == std::string::npos) return std::nullopt;
    const json j = parse_object(std::string_view(buffer_).substr(offset_, pos - offset_));
    if (j["type"] != "done") fail("expected a done frame");
    expect_fields(j, {"version", "bytes"});
    PullDone d{get_int(j, "version"), 0};
    if (!j["bytes"].is_number_unsigned()) fail("done: \"bytes\" must be unsigned");
    d.bytes = j["bytes"].get<std::uint64_t>();
    if (d.version != expected_version_) {
      fail("done for version " + std::to_string(d.version) + ", requested " +
           std::to_string(expected_version_));
    }
    if (d.bytes != bytes_) {
      fail("done reports " + std::to_string(d.bytes) + " bytes, received " +
           std::to_string(bytes_));
    }
    offset_ = pos + 1;
    done_ = true;
    if (offset_ != buffer_.size()) fail("bytes after the done frame");
    return d;
  }
  fail("unknown frame tag");
}

}  // namespace spotrl::wire
