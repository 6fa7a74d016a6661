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

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "domain.h"

namespace spotrl {

struct TransferAgent {
  std::string agent_id;
  std::string node_id;
  WeightVersion buffer_version = 0;
  std::set<InstanceId> active_pulls;
  double egress_bandwidth = 25e9;  // bytes/sec
};

enum class PullState { kQueued, kRunning };

struct PullJob {
  InstanceId instance_id;
  std::string agent_id;
  WeightVersion version = 0;
  double bytes_total = 0;
  double bytes_done = 0;
  Seconds started_at = 0;
  double ingress_bandwidth = 6.25e9;
  double rate = 0;
  PullState state = PullState::kQueued;
};

struct PullCompletion {
  InstanceId instance_id;
  std::string agent_id;
  WeightVersion version = 0;
  Seconds at = 0;
  Seconds started_at = 0;
};

// Pull-based weight distribution. Agents hold staged host copies of the
// weights; every paired instance pulls on its own. Rates are piecewise
// constant: each agent splits its egress evenly over its running pulls and an
// instance never exceeds its own ingress. Rates are recomputed whenever a pull
// starts or finishes.
class WeightTransfer {
 public:
  WeightTransfer() = default;
  explicit WeightTransfer(std::vector<TransferAgent> agents);

  // Round-robin over agents sorted by id. The cursor is global: a returning
  // instance takes the next slot, not its previous agent.
  const std::string& pair_agent(const InstanceId& instance);
  std::optional<std::string> paired_agent(const InstanceId& instance) const;

  // Makes `version` available on every agent at now + delay. Seeding is not
  // blocked by this; only pulls for `version` wait on it.
  void stage_weights(WeightVersion version, Seconds now, Seconds delay);

  // Starts (or queues, until staging lands) a pull of `version`. Replaces any
  // job the instance already has.
  void start_pull(const InstanceId& instance, WeightVersion version,
                  double bytes_total, double ingress_bandwidth, Seconds now);

  // Drops the instance's job, if any. No version change happens.
  bool abort(const InstanceId& instance, Seconds now);

  // Advances all running pulls to `now`, promotes staging as it lands, and
  // returns every pull finished by then (including ones finished during
  // earlier mutating calls) in completion order.
  std::vector<PullCompletion> advance_to(Seconds now);

  std::optional<Seconds> next_event_time() const;

  const std::vector<TransferAgent>& agents() const { return agents_; }
  const std::map<InstanceId, PullJob>& jobs() const { return jobs_; }
  WeightVersion staged_version() const;

 private:
  TransferAgent& agent(const std::string& id);
  void promote_staging(Seconds now);
  void recompute_rates();
  void start_queued(Seconds now);
  void advance_internal(Seconds now);
  std::optional<Seconds> next_internal_time() const;

  std::vector<TransferAgent> agents_;
  std::size_t cursor_ = 0;
  std::map<InstanceId, std::string> pairing_;
  std::map<InstanceId, PullJob> jobs_;
  Seconds clock_ = 0;
  std::optional<std::pair<WeightVersion, Seconds>> staging_;
  std::vector<PullCompletion> unreported_;
};

// Model presets at 2 bytes/param.
double model_bytes_for_preset(const std::string& preset);

}  // namespace spotrl
