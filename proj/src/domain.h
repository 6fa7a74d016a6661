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

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spotrl {

using Seconds = double;
using RequestId = std::uint64_t;
using GroupId = std::uint64_t;
using WeightVersion = std::int64_t;

// Every failure inside the core surfaces as an Error. The C boundary maps the
// kind onto a status code.
class Error : public std::runtime_error {
 public:
  enum class Kind { kInvalidArgument, kParse, kIo, kSimulation, kInternal };

  explicit Error(const std::string& what, Kind kind = Kind::kInvalidArgument)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TokenId {
  std::uint32_t value = 0;
  auto operator<=>(const TokenId&) const = default;
};

struct InstanceId {
  std::string value;

  InstanceId() = default;
  explicit InstanceId(std::string v) : value(std::move(v)) {}

  auto operator<=>(const InstanceId&) const = default;
  bool empty() const { return value.empty(); }
};

enum class RequestState { kUnrouted, kPending, kExecuting, kComplete, kMigrating };

const char* to_string(RequestState state);

struct RouteEntry {
  InstanceId instance;
  std::int64_t tokens = 0;
};

struct RolloutRequest {
  RequestId request_id = 0;
  GroupId group_id = 0;
  std::int32_t prompt_len = 1;
  std::vector<TokenId> generated;
  // Simulator-assigned final length. The scheduling code never reads it.
  std::int32_t target_len = 1;
  RequestState state = RequestState::kUnrouted;
  // Set while state == kMigrating.
  InstanceId migrating_from;
  // Current owner while kPending or kExecuting.
  InstanceId owner;
  std::vector<RouteEntry> route_history;
  // Tokens thrown away by the recompute fault-handling baseline.
  std::int64_t discarded_tokens = 0;

  std::int64_t generated_len() const {
    return static_cast<std::int64_t>(generated.size());
  }
  std::int64_t context_len() const { return prompt_len + generated_len(); }
  std::int64_t remaining() const { return target_len - generated_len(); }
};

// Token conservation for one request: history sum equals generated length and,
// once complete, the target length.
bool tokens_conserved(const RolloutRequest& request);

enum class InstanceStatus {
  kProvisioning,
  kPullingWeights,
  kActive,
  kPreempted,
  // Local engines of the training cluster while it is in training mode.
  kOffline,
};

const char* to_string(InstanceStatus status);

struct InstanceRecord {
  InstanceId instance_id;
  InstanceStatus status = InstanceStatus::kProvisioning;
  WeightVersion weight_version = 0;
  std::int32_t m_pending = 0;
  std::int32_t m_exec = 0;
  std::int32_t gpu_count = 2;
  Seconds cumulative_busy_time = 0;
  Seconds joined_at = 0;
  std::optional<Seconds> preempted_at;
  bool local = false;
};

struct StepSchedule {
  Seconds t_seed = 0;
  // Stored unrounded; applied as floor().
  double n_prem_cap = 0;
  std::int32_t n_resv = 4;
  double eta = 2.0;
  std::map<std::int32_t, Seconds> memory;
};

std::int32_t applied_cap(double n_prem_cap);

struct StepStats {
  std::int64_t step_index = 0;
  Seconds started_at = 0;
  Seconds t_wait_train = 0;
  Seconds t_wait_remote = 0;
  Seconds t_train = 0;
  Seconds t_remote = 0;
  double n_bar_prem = 0;
  std::int32_t n_hat_prem = 0;
  std::int64_t tokens_generated = 0;
  std::int64_t tokens_trained = 0;
  Seconds step_duration = 0;

  // Observations beyond the control-loop inputs.
  Seconds t_seed_used = 0;
  double n_prem_cap_used = 0;
  Seconds seeding_time = 0;
  // Time from step start until the last response arrived.
  Seconds rollout_time = 0;
  Seconds remote_busy_time = 0;
  std::int64_t responses = 0;
  std::int64_t microbatches = 0;
  std::int64_t migrations = 0;
  std::int64_t tokens_discarded = 0;
  std::int64_t local_tokens = 0;
  std::int64_t remote_tokens = 0;
  bool fallback = false;
};

struct ProfileEntry {
  std::int32_t batch_size = 0;
  double decode_throughput = 0;  // tokens/sec
  double context = 0;            // mean context length when captured
  std::int64_t samples = 0;
};

struct ProfileTable {
  std::vector<ProfileEntry> entries;  // sorted by batch_size, unique
  double context_calibration = 0;     // mean capture context

  // Merges one observation into the running mean of its batch-size bucket.
  void observe(std::int32_t batch_size, double throughput, double context);
  std::size_t distinct_batch_sizes() const { return entries.size(); }
  bool ready() const { return entries.size() >= 2; }
};

struct CostModel {
  double reserved_rate = 83.79;     // $/h per reserved 8-GPU node
  double preemptible_rate = 5.32;   // $/h per preemptible 2-GPU instance
  std::int32_t reserved_node_count = 1;
};

struct ThroughputReport {
  double generated_and_trained = 0;  // (generated + trained) / duration
  double trained_only = 0;           // trained / duration
};

ThroughputReport compute_throughput(const StepStats& stats);

struct ActivityInterval {
  InstanceId instance_id;
  Seconds start = 0;
  Seconds end = 0;
  // Per-hour price override; negative means the preemptible rate.
  double hourly_rate = -1;
};

struct CostReport {
  std::int64_t tokens_trained = 0;
  double wall_hours = 0;
  double reserved_dollars = 0;
  double preemptible_dollars = 0;
  double total_dollars = 0;
  double tokens_per_dollar = 0;
};

CostReport compute_cost_efficiency(const std::vector<StepStats>& timeline,
                                   const std::vector<ActivityInterval>& activity,
                                   const CostModel& cost);

}  // namespace spotrl
