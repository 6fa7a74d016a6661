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
#include <optional>
#include <string>
#include <vector>

#include "domain.h"

namespace spotrl {

enum class TraceKind { kAllocate, kPreempt };

const char* to_string(TraceKind kind);

struct TraceEvent {
  Seconds at = 0;
  TraceKind kind = TraceKind::kAllocate;
  std::string instance_id;

  bool operator==(const TraceEvent&) const = default;
};

struct TraceSummary {
  double avg_instances = 0;
  // Events at t = 0 describe the starting population and are not counted as
  // allocations.
  std::int64_t initial_instances = 0;
  std::int64_t allocations = 0;
  std::int64_t preemptions = 0;
  Seconds duration = 0;
  std::int64_t peak_instances = 0;
};

// One JSON object per line: {"at":float,"kind":"allocate"|"preempt",
// "instance_id":string}. Blank lines are skipped. Errors carry the line number.
std::vector<TraceEvent> parse_trace(std::istream& in);
std::vector<TraceEvent> parse_trace_string(const std::string& text);
std::vector<TraceEvent> load_trace(const std::string& path);

// Time order and per-instance allocate/preempt alternation. `line_of` maps an
// index to the line number reported on failure (identity + 1 when empty).
void validate_trace(const std::vector<TraceEvent>& events,
                    const std::vector<std::size_t>& line_of = {});

std::string serialize_trace(const std::vector<TraceEvent>& events);
void write_trace(const std::string& path, const std::vector<TraceEvent>& events);

// Duration defaults to the last event's timestamp.
TraceSummary summarize(const std::vector<TraceEvent>& events,
                       std::optional<Seconds> duration = std::nullopt);

// Instances alive at time t (events at exactly t applied).
std::int64_t alive_at(const std::vector<TraceEvent>& events, Seconds t);

struct SynthesisParams {
  Seconds mean_up = 1800;
  Seconds mean_down = 900;
  std::int32_t max_instances = 8;
  Seconds duration = 7200;
  // Chance that a preemption is immediately followed by a fresh allocation
  // at the same timestamp.
  double replacement_prob = 0.0;
  std::string id_prefix = "spot-";
};

void validate(const SynthesisParams& params);

// Alternating exponential up/down periods per slot, slots starting in their
// stationary state.
std::vector<TraceEvent> synthesize(const SynthesisParams& params, std::uint64_t seed);

// Long-run expectations for synthesize(): mean concurrent count and the rate
// of preemptions per second.
double expected_avg_instances(const SynthesisParams& params);
double expected_preemption_rate(const SynthesisParams& params);

}  // namespace spotrl
