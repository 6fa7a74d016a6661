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

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <variant>
#include <vector>

#include "domain.h"
#include "event_log.h"
#include "load_balancer.h"
#include "weight_transfer.h"

namespace spotrl {

struct ManagerConfig {
  std::int32_t theta = 4;
  std::int32_t max_response_len = 14336;
  // false: recompute baseline, partial responses are dropped on preemption.
  bool migrate_on_preempt = true;
  // false: synchronized transfer; instances only receive weights when a new
  // version is published, never mid-step.
  bool pull_on_register = true;
  double model_bytes = 28e9;
  double instance_ingress = 6.25e9;  // bytes/sec
  std::uint32_t vocab_size = 151936;
};

enum class RegistrationResult { kAccepted, kRejectedCapFull };

// Outbound manager -> instance commands, drained by whoever hosts instances
// (the simulator in-process, or a wire session).
struct GenerateCommand {
  InstanceId instance;
  RequestId request_id = 0;
  std::int32_t prompt_len = 0;
  std::int64_t prefix_len = 0;
};

struct CancelCommand {
  InstanceId instance;
  RequestId request_id = 0;
};

struct PullWeightsCommand {
  InstanceId instance;
  WeightVersion version = 0;
  std::string agent_id;
};

using ManagerCommand =
    std::variant<GenerateCommand, CancelCommand, PullWeightsCommand>;

enum class RouteOutcome { kRouted, kMustWait, kNoCandidates };

struct RouteResult {
  RouteOutcome outcome = RouteOutcome::kNoCandidates;
  InstanceId instance;
};

// Deterministic synthetic vocabulary index for position `pos` of a request.
TokenId synthetic_token(RequestId request, std::int64_t pos, std::uint32_t vocab);

// Instance registry, version gating and token-granular request tracking.
// Single writer: every mutation is a call on this object from one context.
class RolloutManager {
 public:
  RolloutManager(ManagerConfig config, WeightTransfer transfer,
                 EventLog* log = nullptr);

  // Registry.
  RegistrationResult register_instance(const InstanceId& id,
                                       std::int32_t gpu_count, Seconds now);
  void add_local_engine(const InstanceId& id, std::int32_t gpu_count,
                        Seconds now);
  void set_instance_cap(double cap) { cap_ = cap; }
  double instance_cap() const { return cap_; }
  // Remote instances that are registered and not preempted.
  std::int32_t remote_count() const;
  std::int32_t active_remote_count() const;
  bool has_instance(const InstanceId& id) const;
  const InstanceRecord& instance(const InstanceId& id) const;
  std::vector<InstanceRecord> registry() const;
  // Active instances at the current version: the only routing targets.
  std::vector<InstanceRecord> candidates() const;
  std::vector<InstanceLoad> load_snapshot() const;
  const std::deque<RequestId>& pending_queue(const InstanceId& id) const;
  const std::set<RequestId>& executing_set(const InstanceId& id) const;
  double mean_executing_context() const;

  // Versions.
  WeightVersion global_version() const { return global_version_; }
  // Publishes a new version: stages it on the agents, brings local engines to
  // it, and refreshes every lagging remote instance.
  void begin_version(WeightVersion version, Seconds now, Seconds staging_delay);
  std::vector<InstanceId> mark_stale_and_refresh(WeightVersion version,
                                                 Seconds now);
  void on_pull_complete(const InstanceId& id, WeightVersion version, Seconds now);
  // Local engines join (Active, current version) or leave routing. Leaving
  // hands every request they hold to the remaining candidates.
  std::vector<RequestId> set_local_online(bool online, Seconds now);

  // Requests.
  RequestId add_request(GroupId group, std::int32_t prompt_len,
                        std::int32_t target_len);
  // Routes via select_instance over candidates(); the request stays where it
  // is on MustWait / NoCandidates.
  RouteResult route_request(RequestId id, Seconds now);
  // Parks a request for a later dispatch_waiting().
  void hold(RequestId id, bool front, Seconds now);
  // Retries held requests in order until one cannot be placed or `limit`
  // have been placed.
  std::size_t dispatch_waiting(Seconds now,
                               std::size_t limit = static_cast<std::size_t>(-1));
  // Instance moved a request from its queue into the running batch.
  void on_scheduled(RequestId id, Seconds now);
  const RolloutRequest& on_token(RequestId id, TokenId token, Seconds now);
  // Bulk form used by the simulator: appends `count` synthetic tokens.
  void on_tokens(RequestId id, std::int64_t count, Seconds now);
  // Explicit stop reported by the instance (live mode): target_len becomes the
  // generated length.
  void on_complete(RequestId id, Seconds now);
  // Idempotent. Returns the requests that were on the instance; each keeps its
  // generated prefix (migrate mode) and is re-routed or held.
  std::vector<RequestId> on_preempt(const InstanceId& id, Seconds now);
  void apply_migration(const MigrationOrder& order, Seconds now);

  std::vector<RequestId> take_completed();
  std::vector<ManagerCommand> take_commands();

  const RolloutRequest& request(RequestId id) const;
  bool has_request(RequestId id) const;
  std::size_t request_count() const { return requests_.size(); }
  std::size_t incomplete_count() const { return incomplete_; }
  std::size_t waiting_count() const { return waiting_.size(); }
  std::int64_t migrations() const { return migrations_; }
  std::vector<RequestId> request_ids() const;
  // Drops all requests; only valid when none is in flight.
  void clear_requests();
  // Cross-checks queues, owners, counters and token bookkeeping; throws on the
  // first inconsistency.
  void check_invariants() const;

  WeightTransfer& transfer() { return transfer_; }
  const WeightTransfer& transfer() const { return transfer_; }
  const ManagerConfig& config() const { return config_; }

 private:
  RolloutRequest& mutable_request(RequestId id);
  InstanceRecord& mutable_instance(const InstanceId& id);
  void assign(RolloutRequest& request, const InstanceId& target, Seconds now);
  void detach(RolloutRequest& request);
  void complete(RolloutRequest& request, Seconds now);
  std::vector<RequestId> evacuate(const InstanceId& id, bool preempted,
                                  Seconds now);
  void issue_pull(InstanceRecord& record, Seconds now);
  void log(Seconds at, EventType type, const std::string& instance = {},
           std::int64_t request = -1, std::int64_t value = 0,
           std::int64_t version = 0, const std::string& peer = {});

  ManagerConfig config_;
  WeightTransfer transfer_;
  EventLog* log_;
  double cap_ = 0;
  WeightVersion global_version_ = 0;
  std::map<InstanceId, InstanceRecord> instances_;
  std::map<InstanceId, std::deque<RequestId>> pending_;
  std::map<InstanceId, std::set<RequestId>> executing_;
  std::unordered_map<RequestId, RolloutRequest> requests_;
  std::deque<RequestId> waiting_;
  std::vector<RequestId> completed_;
  std::vector<ManagerCommand> commands_;
  RequestId next_request_id_ = 1;
  std::size_t incomplete_ = 0;
  std::int64_t migrations_ = 0;
};

struct Microbatch {
  std::vector<RequestId> responses;
  std::int64_t token_count = 0;
  Seconds sealed_at = 0;
  bool final_flush = false;
};

// Buffers completed responses in arrival order and seals a microbatch as soon
// as at least m_b are buffered; everything buffered goes into it.
class MicrobatchAssembler {
 public:
  explicit MicrobatchAssembler(std::int32_t m_b);

  // `arrivals` completed together; tokens is each response's prompt+generated.
  std::optional<Microbatch> push(const std::vector<std::pair<RequestId, std::int64_t>>& arrivals,
                                 Seconds now);
  // Seals whatever is left, even below m_b. Empty buffer gives nullopt.
  std::optional<Microbatch> flush(Seconds now);
  std::size_t buffered() const { return buffer_.size(); }
  std::int32_t m_b() const { return m_b_; }

 private:
  std::int32_t m_b_;
  std::vector<RequestId> buffer_;
  std::int64_t tokens_ = 0;
};

// Per-step measurements feeding the seeding scheduler.
class StepAccounting {
 public:
  void begin(std::int64_t step_index, Seconds now, std::int32_t remote_count);
  void remote_count_changed(Seconds now, std::int32_t count);
  void remote_activated(const InstanceId& id, Seconds at);
  void remote_emission(const InstanceId& id, Seconds at);
  void remote_gone(const InstanceId& id);
  void remote_busy(Seconds dt) { remote_busy_ += dt; }
  void trainer_wait(Seconds dt) { wait_train_ += dt; }
  void trainer_train(Seconds dt) { train_ += dt; }

  Seconds started_at() const { return start_; }

  // t_wait_remote uses instances alive at `now`.
  StepStats record_step(Seconds now, std::int64_t tokens_generated,
                        std::int64_t tokens_trained, bool complete) const;

 private:
  std::int64_t step_index_ = 0;
  Seconds start_ = 0;
  Seconds last_change_ = 0;
  std::int32_t count_ = 0;
  double count_integral_ = 0;
  Seconds remote_busy_ = 0;
  Seconds wait_train_ = 0;
  Seconds train_ = 0;
  std::map<InstanceId, Seconds> last_seen_;
};

}  // namespace spotrl
