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

#include "domain.h"

#include <algorithm>
#include <cmath>

namespace spotrl {

const char* to_string(RequestState state) {
  switch (state) {
    case RequestState::kUnrouted: return "unrouted";
    case RequestState::kPending: return "pending";
    case RequestState::kExecuting: return "executing";
    case RequestState::kComplete: return "complete";
    case RequestState::kMigrating: return "migrating";
  }
  return "?";
}

const char* to_string(InstanceStatus status) {
  switch (status) {
    case InstanceStatus::kProvisioning: return "provisioning";
    case InstanceStatus::kPullingWeights: return "pulling_weights";
    case InstanceStatus::kActive: return "active";
    case InstanceStatus::kPreempted: return "preempted";
    case InstanceStatus::kOffline: return "offline";
  }
  return "?";
}

bool tokens_conserved(const RolloutRequest& request) {
  std::int64_t sum = 0;
  for (const auto& entry : request.route_history) sum += entry.tokens;
  if (sum != request.generated_len()) return false;
  if (request.state == RequestState::kComplete &&
      request.generated_len() != request.target_len) {
    return false;
  }
  return true;
}

std::int32_t applied_cap(double n_prem_cap) {
  if (!(n_prem_cap > 0)) return 0;
  return static_cast<std::int32_t>(std::floor(n_prem_cap + 1e-9));
}

void ProfileTable::observe(std::int32_t batch_size, double throughput,
                           double context) {
  if (batch_size <= 0) throw Error("profile batch size must be positive");
  if (!(throughput >= 0) || !std::isfinite(throughput)) {
    throw Error("profile throughput must be finite and non-negative");
  }
  auto it = std::lower_bound(
      entries.begin(), entries.end(), batch_size,
      [](const ProfileEntry& e, std::int32_t b) { return e.batch_size < b; });
  if (it == entries.end() || it->batch_size != batch_size) {
    it = entries.insert(it, ProfileEntry{batch_size, 0, 0, 0});
  }
  const double n = static_cast<double>(it->samples);
  it->decode_throughput = (it->decode_throughput * n + throughput) / (n + 1);
  it->context = (it->context * n + context) / (n + 1);
  it->samples += 1;

  double total = 0;
  std::int64_t count = 0;
  for (const auto& e : entries) {
    total += e.context * static_cast<double>(e.samples);
    count += e.samples;
  }
  context_calibration = count > 0 ? total / static_cast<double>(count) : 0;
}

ThroughputReport compute_throughput(const StepStats& stats) {
  if (!(stats.step_duration > 0)) throw Error("empty step");
  ThroughputReport report;
  report.generated_and_trained =
      static_cast<double>(stats.tokens_generated + stats.tokens_trained) /
      stats.step_duration;
  report.trained_only =
      static_cast<double>(stats.tokens_trained) / stats.step_duration;
  return report;
}

CostReport compute_cost_efficiency(const std::vector<StepStats>& timeline,
                                   const std::vector<ActivityInterval>& activity,
                                   const CostModel& cost) {
  if (cost.reserved_rate < 0 || cost.preemptible_rate < 0) {
    throw Error("cost rates must be non-negative");
  }
  CostReport report;
  if (timeline.empty()) return report;

  Seconds window_start = timeline.front().started_at;
  Seconds window_end = window_start;
  for (const auto& step : timeline) {
    window_start = std::min(window_start, step.started_at);
    window_end = std::max(window_end, step.started_at + step.step_duration);
    report.tokens_trained += step.tokens_trained;
  }
  const Seconds slack = 1e-6 * std::max(1.0, window_end);

  double preemptible = 0;
  for (const auto& interval : activity) {
    if (interval.end < interval.start) {
      throw Error("negative activity interval for " +
                  interval.instance_id.value);
    }
    if (interval.start < window_start - slack ||
        interval.end > window_end + slack) {
      throw Error("activity interval outside experiment window for " +
                  interval.instance_id.value);
    }
    const double rate =
        interval.hourly_rate >= 0 ? interval.hourly_rate : cost.preemptible_rate;
    preemptible += rate * (interval.end - interval.start) / 3600.0;
  }

  report.wall_hours = (window_end - window_start) / 3600.0;
  report.reserved_dollars =
      cost.reserved_rate * cost.reserved_node_count * report.wall_hours;
  report.preemptible_dollars = preemptible;
  report.total_dollars = report.reserved_dollars + report.preemptible_dollars;
  report.tokens_per_dollar =
      report.total_dollars > 0
          ? static_cast<double>(report.tokens_trained) / report.total_dollars
          : 0;
  return report;
}

}  // namespace spotrl
