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

#include "event_log.h"

#include <cstdio>
#include <istream>
#include "json.hpp"
#include <ostream>
#include <sstream>

namespace spotrl {
namespace {

constexpr const char* kNames[] = {
    "step_begin", "step_end",  "allocate",    "preempt",     "register",
    "reject",     "pull_start", "pull_done",  "pull_abort",  "online",
    "offline",    "route",     "hold",        "admit",       "decode",
    "complete",   "migrate",   "cancel",      "discard",     "seal",
    "train_start", "train_end", "seeding_end", "fallback",   "experiment_end",
};

void append_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (static_cast<unsigned char>(c) < 0x20) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\u%04x", c);
      out += buf;
    } else {
      out += c;
    }
  }
  out += '"';
}

}  // namespace

const char* to_string(EventType type) {
  return kNames[static_cast<std::size_t>(type)];
}

EventType event_type_from_string(const std::string& name) {
  for (std::size_t i = 0; i < std::size(kNames); ++i) {
    if (name == kNames[i]) return static_cast<EventType>(i);
  }
  throw Error("unknown event type '" + name + "'", Error::Kind::kParse);
}

void EventLog::record(Seconds at, EventType type, const std::string& instance,
                      std::int64_t request, std::int64_t value,
                      std::int64_t version, const std::string& peer) {
  if (!enabled_) return;
  records_.push_back(EventRecord{at, type, instance, peer, request, value, version});
}

void EventLog::write_jsonl(std::ostream& out) const {
  std::string line;
  char num[64];
  for (std::size_t seq = 0; seq < records_.size(); ++seq) {
    const auto& r = records_[seq];
    line.clear();
    std::snprintf(num, sizeof(num), "{\"seq\":%zu,\"t\":%.9f,\"type\":", seq, r.at);
    line += num;
    append_escaped(line, to_string(r.type));
    if (!r.instance.empty()) {
      line += ",\"instance\":";
      append_escaped(line, r.instance);
    }
    if (!r.peer.empty()) {
      line += ",\"peer\":";
      append_escaped(line, r.peer);
    }
    if (r.request >= 0) {
      std::snprintf(num, sizeof(num), ",\"request\":%lld",
                    static_cast<long long>(r.request));
      line += num;
    }
    std::snprintf(num, sizeof(num), ",\"value\":%lld,\"version\":%lld}\n",
                  static_cast<long long>(r.value),
                  static_cast<long long>(r.version));
    line += num;
    out << line;
  }
}

std::string EventLog::to_jsonl() const {
  std::ostringstream out;
  write_jsonl(out);
  return out.str();
}

EventLog EventLog::parse_jsonl(std::istream& in) {
  EventLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EventRecord r;
      r.at = j.at("t").get<double>();
      r.type = event_type_from_string(j.at("type").get<std::string>());
      r.instance = j.value("instance", std::string{});
      r.peer = j.value("peer", std::string{});
      r.request = j.value("request", std::int64_t{-1});
      r.value = j.value("value", std::int64_t{0});
      r.version = j.value("version", std::int64_t{0});
      log.records_.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error("event log line " + std::to_string(line_no) + ": " + e.what(),
                  Error::Kind::kParse);
    }
  }
  return log;
}

}  // namespace spotrl
