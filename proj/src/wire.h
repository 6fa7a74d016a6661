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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "domain.h"

namespace spotrl::wire {

// Instance -> manager.
struct Register {
  std::string instance_id;
  std::int32_t gpu_count = 0;
  bool operator==(const Register&) const = default;
};

struct Status {
  std::int32_t m_pending = 0;
  std::int32_t m_exec = 0;
  std::int64_t weight_version = 0;
  bool operator==(const Status&) const = default;
};

struct Token {
  std::int64_t request_id = 0;
  std::uint32_t token_id = 0;
  bool operator==(const Token&) const = default;
};

struct Complete {
  std::int64_t request_id = 0;
  bool operator==(const Complete&) const = default;
};

// Manager -> instance.
struct Generate {
  std::int64_t request_id = 0;
  std::vector<std::uint32_t> prompt_tokens;
  std::vector<std::uint32_t> prefix_tokens;
  bool operator==(const Generate&) const = default;
};

struct Cancel {
  std::int64_t request_id = 0;
  bool operator==(const Cancel&) const = default;
};

struct PullWeights {
  std::int64_t version = 0;
  std::string agent_endpoint;
  bool operator==(const PullWeights&) const = default;
};

using Message = std::variant<Register, Status, Token, Complete, Generate, Cancel, PullWeights>;

const char* type_name(const Message& message);

// One JSON object terminated by '\n'.
std::string encode(const Message& message);
// Strict: unknown type, missing or extra fields, and wrong value types are
// Error::Kind::kParse. Trailing '\n' / "\r\n" is accepted.
Message decode(std::string_view line);

// Splits a byte stream into lines. Bytes may arrive in arbitrary chunks.
class LineBuffer {
 public:
  LineBuffer() = default;
  explicit LineBuffer(std::size_t max_line) : max_line_(max_line) {}
  void feed(std::string_view bytes);
  std::optional<std::string> next_line();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::size_t max_line_ = 1 << 24;
  std::string buffer_;
  std::size_t offset_ = 0;
};

// ---------------------------------------------------------------- pull session
//
// instance -> agent: {"type":"pull","version":V}\n
// agent -> instance: zero or more shard frames, then one done frame.
//   shard: 'S' <u64 big-endian length> <length bytes>
//   done:  {"type":"done","version":V,"bytes":N}\n  where N is the shard total

struct PullRequest {
  std::int64_t version = 0;
  bool operator==(const PullRequest&) const = default;
};

struct PullDone {
  std::int64_t version = 0;
  std::uint64_t bytes = 0;
  bool operator==(const PullDone&) const = default;
};

std::string encode_pull_request(const PullRequest& request);
PullRequest decode_pull_request(std::string_view line);
std::string encode_shard(std::string_view payload);
std::string encode_done(const PullDone& done);

// Incremental decoder for the agent -> instance stream.
class PullStreamDecoder {
 public:
  struct Shard {
    std::string payload;
  };
  using Event = std::variant<Shard, PullDone>;

  explicit PullStreamDecoder(std::int64_t expected_version)
      : expected_version_(expected_version) {}

  void feed(std::string_view bytes);
  // Next complete frame. Throws on a malformed stream, on a version other than
  // the one requested, and when the done frame's byte count disagrees with the
  // shards received.
  std::optional<Event> next();
  bool done() const { return done_; }
  std::uint64_t bytes_received() const { return bytes_; }

 private:
  std::int64_t expected_version_;
  std::string buffer_;
  std::size_t offset_ = 0;
  std::uint64_t bytes_ = 0;
  bool done_ = false;
};

}  // namespace spotrl::wire
