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
#include <iosfwd>
#include <string>
#include <vector>

#include "domain.h"

namespace spotrl {

enum class EventType : std::uint8_t {
  kStepBegin,
  kStepEnd,
  kAllocate,   // trace: instance became available
  kPreempt,    // trace: instance revoked
  kRegister,   // manager accepted an instance
  kReject,     // cap full; instance deferred
  kPullStart,
  kPullDone,
  kPullAbort,
  kOnline,     // instance serves requests at `version`
  kOffline,    // local engine handed its work off
  kRoute,      // request became pending on instance
  kHold,       // request parked by delayed dispatch / no candidate
  kAdmit,      // pending -> executing
  kDecode,     // `value` tokens produced on instance at `version`
  kComplete,
  kMigrate,    // request moved instance -> peer
  kCancel,
  kDiscard,    // recompute baseline dropped `value` tokens
  kSeal,       // microbatch of `value` responses
  kTrainStart,
  kTrainEnd,
  kSeedingEnd,
  kFallback,
  kExperimentEnd,
};

const char* to_string(EventType type);
EventType event_type_from_string(const std::string& name);

struct EventRecord {
  Seconds at = 0;
  EventType type = EventType::kStepBegin;
  std::string instance;
  std::string peer;
  std::int64_t request = -1;
  std::int64_t value = 0;
  std::int64_t version = 0;
};

// Append-only log; its sequence order is the simulator's total event order.
class EventLog {
 public:
  void set_enabled(bool enabled) { enabled_ = enabled; }
  bool enabled() const { return enabled_; }

  void record(Seconds at, EventType type, const std::string& instance = {},
              std::int64_t request = -1, std::int64_t value = 0,
              std::int64_t version = 0, const std::string& peer = {});

  const std::vector<EventRecord>& records() const { return records_; }
  void clear() { records_.clear(); }

  void write_jsonl(std::ostream& out) const;
  std::string to_jsonl() const;

  static EventLog parse_jsonl(std::istream& in);

 private:
  bool enabled_ = true;
  std::vector<EventRecord> records_;
};

}  // namespace spotrl
