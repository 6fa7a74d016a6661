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

#include "rollout_manager.h"

#include <algorithm>
#include <numeric>

namespace spotrl {

TokenId synthetic_token(RequestId request, std::int64_t pos, std::uint32_t vocab) {
  // splitmix64 finaliser
  std::uint64_t z = request * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(pos);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return TokenId{static_cast<std::uint32_t>(z % std::max<std::uint32_t>(1, vocab))};
}

RolloutManager::RolloutManager(ManagerConfig config, WeightTransfer transfer,
                               EventLog* log)
    : config_(config), transfer_(std::move(transfer)), log_(log) {
  if (config_.theta < 1) throw Error("theta must be >= 1");
}

void RolloutManager::log(Seconds at, EventType type, const std::string& instance,
                         std::int64_t request, std::int64_t value,
                         std::int64_t version, const std::string& peer) {
  if (log_ != nullptr) log_->record(at, type, instance, request, value, version, peer);
}

// ---------------------------------------------------------------- registry

RegistrationResult RolloutManager::register_instance(const InstanceId& id,
                                                     std::int32_t gpu_count,
                                                     Seconds now) {
  if (gpu_count <= 0) throw Error("gpu_count must be positive");
  auto it = instances_.find(id);
  if (it != instances_.end() && it->second.status != InstanceStatus::kPreempted) {
    throw Error("instance " + id.value + " already registered");
  }
  if (remote_count() >= applied_cap(cap_)) {
    log(now, EventType::kReject, id.value, -1, applied_cap(cap_));
    return RegistrationResult::kRejectedCapFull;
  }
  InstanceRecord record;
  record.instance_id = id;
  record.status = InstanceStatus::kProvisioning;
  record.gpu_count = gpu_count;
  record.joined_at = now;
  instances_[id] = record;
  pending_[id].clear();
  executing_[id].clear();
  const auto& agent = transfer_.pair_agent(id);
  log(now, EventType::kRegister, id.value, -1, gpu_count, 0, agent);
  if (config_.pull_on_register && global_version_ > 0) {
    issue_pull(instances_[id], now);
  }
  return RegistrationResult::kAccepted;
}

void RolloutManager::add_local_engine(const InstanceId& id, std::int32_t gpu_count,
                                      Seconds now) {
  if (instances_.count(id) != 0) {
    throw Error("instance " + id.value + " already registered");
  }
  InstanceRecord record;
  record.instance_id = id;
  record.status = InstanceStatus::kOffline;
  record.gpu_count = gpu_count;
  record.joined_at = now;
  record.local = true;
  record.weight_version = global_version_;
  instances_[id] = record;
  pending_[id];
  executing_[id];
}

std::int32_t RolloutManager::remote_count() const {
  std::int32_t n = 0;
  for (const auto& [id, r] : instances_) {
    if (!r.local && r.status != InstanceStatus::kPreempted) ++n;
  }
  return n;
}

std::int32_t RolloutManager::active_remote_count() const {
  std::int32_t n = 0;
  for (const auto& [id, r] : instances_) {
    if (!r.local && r.status == InstanceStatus::kActive) ++n;
  }
  return n;
}

bool RolloutManager::has_instance(const InstanceId& id) const {
  return instances_.count(id) != 0;
}

const InstanceRecord& RolloutManager::instance(const InstanceId& id) const {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw Error("unknown instance " + id.value);
  return it->second;
}

InstanceRecord& RolloutManager::mutable_instance(const InstanceId& id) {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw Error("unknown instance " + id.value);
  return it->second;
}

std::vector<InstanceRecord> RolloutManager::registry() const {
  std::vector<InstanceRecord> out;
  out.reserve(instances_.size());
  for (const auto& [id, r] : instances_) out.push_back(r);
  return out;
}

std::vector<InstanceRecord> RolloutManager::candidates() const {
  std::vector<InstanceRecord> out;
  for (const auto& [id, r] : instances_) {
    if (r.status == InstanceStatus::kActive && r.weight_version == global_version_) {
      out.push_back(r);
    }
  }
  return out;
}

std::vector<InstanceLoad> RolloutManager::load_snapshot() const {
  std::vector<InstanceLoad> out;
  for (const auto& record : candidates()) {
    InstanceLoad load;
    load.instance_id = record.instance_id;
    load.m_pending = record.m_pending;
    load.m_exec = record.m_exec;
    const auto& queue = pending_.at(record.instance_id);
    load.pending.assign(queue.begin(), queue.end());
    for (RequestId rid : executing_.at(record.instance_id)) {
      load.executing.push_back(
          ExecutingRequest{rid, requests_.at(rid).generated_len()});
    }
    out.push_back(std::move(load));
  }
  return out;
}

const std::deque<RequestId>& RolloutManager::pending_queue(const InstanceId& id) const {
  auto it = pending_.find(id);
  if (it == pending_.end()) throw Error("unknown instance " + id.value);
  return it->second;
}

const std::set<RequestId>& RolloutManager::executing_set(const InstanceId& id) const {
  auto it = executing_.find(id);
  if (it == executing_.end()) throw Error("unknown instance " + id.value);
  return it->second;
}

double RolloutManager::mean_executing_context() const {
  double total = 0;
  std::size_t n = 0;
  for (const auto& record : candidates()) {
    for (RequestId rid : executing_.at(record.instance_id)) {
      total += static_cast<double>(requests_.at(rid).context_len());
      ++n;
    }
  }
  return n > 0 ? total / static_cast<double>(n) : 0;
}

// ---------------------------------------------------------------- versions

void RolloutManager::issue_pull(InstanceRecord& record, Seconds now) {
  auto agent = transfer_.paired_agent(record.instance_id);
  if (!agent) agent = transfer_.pair_agent(record.instance_id);
  if (record.status == InstanceStatus::kActive) {
    record.status = InstanceStatus::kPullingWeights;
  }
  commands_.push_back(PullWeightsCommand{record.instance_id, global_version_, *agent});
  log(now, EventType::kPullStart, record.instance_id.value, -1, 0, global_version_,
      *agent);
}

void RolloutManager::begin_version(WeightVersion version, Seconds now,
                                   Seconds staging_delay) {
  if (version <= global_version_) {
    throw Error("weight versions must increase", Error::Kind::kInternal);
  }
  if (incomplete_ != 0) {
    throw Error("new version published with requests in flight",
                Error::Kind::kInternal);
  }
  global_version_ = version;
  transfer_.stage_weights(version, now, staging_delay);
  for (auto& [id, r] : instances_) {
    if (r.local) r.weight_version = version;
  }
  mark_stale_and_refresh(version, now);
}

std::vector<InstanceId> RolloutManager::mark_stale_and_refresh(WeightVersion version,
                                                               Seconds now) {
  std::vector<InstanceId> refreshed;
  for (auto& [id, r] : instances_) {
    if (r.local || r.status == InstanceStatus::kPreempted) continue;
    if (r.weight_version >= version) continue;
    issue_pull(r, now);
    refreshed.push_back(id);
  }
  return refreshed;
}

void RolloutManager::on_pull_complete(const InstanceId& id, WeightVersion version,
                                      Seconds now) {
  auto it = instances_.find(id);
  if (it == instances_.end()) return;
  auto& r = it->second;
  if (r.status == InstanceStatus::kPreempted) return;
  if (version < r.weight_version) {
    throw Error("weight version regression on " + id.value, Error::Kind::kInternal);
  }
  r.weight_version = version;
  log(now, EventType::kPullDone, id.value, -1, 0, version);
  if (version == global_version_) {
    r.status = InstanceStatus::kActive;
    log(now, EventType::kOnline, id.value, -1, 0, version);
  } else {
    const auto& jobs = transfer_.jobs();
    auto job = jobs.find(id);
    if (job == jobs.end() || job->second.version != global_version_) issue_pull(r, now);
    if (r.status == InstanceStatus::kActive) r.status = InstanceStatus::kPullingWeights;
  }
}

std::vector<RequestId> RolloutManager::set_local_online(bool online, Seconds now) {
  std::vector<RequestId> moved;
  for (auto& [id, r] : instances_) {
    if (!r.local) continue;
    if (online) {
      if (r.status == InstanceStatus::kActive) continue;
      r.status = InstanceStatus::kActive;
      r.weight_version = global_version_;
      log(now, EventType::kOnline, id.value, -1, 0, global_version_);
    } else if (r.status == InstanceStatus::kActive) {
      r.status = InstanceStatus::kOffline;
      log(now, EventType::kOffline, id.value);
    }
  }
  if (!online) {
    for (auto& [id, r] : instances_) {
      if (!r.local) continue;
      auto part = evacuate(id, false, now);
      moved.insert(moved.end(), part.begin(), part.end());
    }
  }
  return moved;
}

// ---------------------------------------------------------------- requests

RequestId RolloutManager::add_request(GroupId group, std::int32_t prompt_len,
                                      std::int32_t target_len) {
  if (prompt_len <= 0) throw Error("prompt_len must be positive");
  if (target_len <= 0 || target_len > config_.max_response_len) {
    throw Error("target_len outside [1, max_response_len]");
  }
  RolloutRequest request;
  request.request_id = next_request_id_++;
  request.group_id = group;
  request.prompt_len = prompt_len;
  request.target_len = target_len;
  request.generated.reserve(static_cast<std::size_t>(target_len));
  const RequestId id = request.request_id;
  requests_.emplace(id, std::move(request));
  ++incomplete_;
  return id;
}

bool RolloutManager::has_request(RequestId id) const {
  return requests_.count(id) != 0;
}

const RolloutRequest& RolloutManager::request(RequestId id) const {
  auto it = requests_.find(id);
  if (it == requests_.end()) throw Error("unknown request " + std::to_string(id));
  return it->second;
}

RolloutRequest& RolloutManager::mutable_request(RequestId id) {
  auto it = requests_.find(id);
  if (it == requests_.end()) throw Error("unknown request " + std::to_string(id));
  return it->second;
}

std::vector<RequestId> RolloutManager::request_ids() const {
  std::vector<RequestId> ids;
  ids.reserve(requests_.size());
  for (const auto& [id, r] : requests_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void RolloutManager::assign(RolloutRequest& request, const InstanceId& target,
                            Seconds now) {
  auto& record = mutable_instance(target);
  request.state = RequestState::kPending;
  request.owner = target;
  request.migrating_from = InstanceId{};
  request.route_history.push_back(RouteEntry{target, 0});
  pending_[target].push_back(request.request_id);
  record.m_pending += 1;
  commands_.push_back(GenerateCommand{target, request.request_id,
                                      request.prompt_len, request.generated_len()});
  log(now, EventType::kRoute, target.value,
      static_cast<std::int64_t>(request.request_id), request.generated_len(),
      global_version_);
}

void RolloutManager::detach(RolloutRequest& request) {
  auto& record = mutable_instance(request.owner);
  if (request.state == RequestState::kPending) {
    auto& queue = pending_[request.owner];
    auto it = std::find(queue.begin(), queue.end(), request.request_id);
    if (it == queue.end()) throw Error("pending queue out of sync", Error::Kind::kInternal);
    queue.erase(it);
    record.m_pending -= 1;
  } else if (request.state == RequestState::kExecuting) {
    if (executing_[request.owner].erase(request.request_id) != 1) {
      throw Error("executing set out of sync", Error::Kind::kInternal);
    }
    record.m_exec -= 1;
  }
  request.owner = InstanceId{};
}

RouteResult RolloutManager::route_request(RequestId id, Seconds now) {
  auto& request = mutable_request(id);
  if (request.state != RequestState::kUnrouted &&
      request.state != RequestState::kMigrating) {
    throw Error("request " + std::to_string(id) + " cannot be routed while " +
                to_string(request.state));
  }
  const auto pool = candidates();
  if (pool.empty()) return RouteResult{RouteOutcome::kNoCandidates, {}};
  const auto choice = select_instance(pool, config_.theta);
  if (std::holds_alternative<MustWait>(choice)) {
    return RouteResult{RouteOutcome::kMustWait, {}};
  }
  const auto& target = std::get<InstanceId>(choice);
  assign(request, target, now);
  return RouteResult{RouteOutcome::kRouted, target};
}

void RolloutManager::hold(RequestId id, bool front, Seconds now) {
  const auto& request = this->request(id);
  if (front) {
    waiting_.push_front(id);
  } else {
    waiting_.push_back(id);
  }
  log(now, EventType::kHold, request.migrating_from.value,
      static_cast<std::int64_t>(id), request.generated_len());
}

std::size_t RolloutManager::dispatch_waiting(Seconds now, std::size_t limit) {
  std::size_t placed = 0;
  while (!waiting_.empty() && placed < limit) {
    const RequestId id = waiting_.front();
    if (route_request(id, now).outcome != RouteOutcome::kRouted) break;
    waiting_.pop_front();
    ++placed;
  }
  return placed;
}

void RolloutManager::on_scheduled(RequestId id, Seconds now) {
  auto& request = mutable_request(id);
  if (request.state != RequestState::kPending) {
    throw Error("stream desync: request " + std::to_string(id) + " scheduled while " +
                to_string(request.state));
  }
  auto& queue = pending_[request.owner];
  auto it = std::find(queue.begin(), queue.end(), id);
  if (it == queue.end()) throw Error("pending queue out of sync", Error::Kind::kInternal);
  queue.erase(it);
  executing_[request.owner].insert(id);
  auto& record = mutable_instance(request.owner);
  record.m_pending -= 1;
  record.m_exec += 1;
  request.state = RequestState::kExecuting;
  log(now, EventType::kAdmit, request.owner.value, static_cast<std::int64_t>(id),
      request.generated_len());
}

void RolloutManager::complete(RolloutRequest& request, Seconds now) {
  const InstanceId owner = request.owner;
  detach(request);
  request.state = RequestState::kComplete;
  completed_.push_back(request.request_id);
  --incomplete_;
  log(now, EventType::kComplete, owner.value,
      static_cast<std::int64_t>(request.request_id), request.generated_len());
}

const RolloutRequest& RolloutManager::on_token(RequestId id, TokenId token,
                                               Seconds now) {
  auto& request = mutable_request(id);
  if (request.state != RequestState::kExecuting) {
    throw Error("stream desync: token for request " + std::to_string(id) + " while " +
                to_string(request.state));
  }
  request.generated.push_back(token);
  request.route_history.back().tokens += 1;
  if (request.generated_len() >= request.target_len ||
      request.generated_len() >= config_.max_response_len) {
    complete(request, now);
  }
  return request;
}

void RolloutManager::on_tokens(RequestId id, std::int64_t count, Seconds now) {
  auto& request = mutable_request(id);
  if (request.state != RequestState::kExecuting) {
    throw Error("stream desync: tokens for request " + std::to_string(id) +
                " while " + to_string(request.state));
  }
  if (count <= 0) return;
  if (count > request.remaining()) {
    throw Error("stream desync: request " + std::to_string(id) + " overran its length",
                Error::Kind::kInternal);
  }
  const std::int64_t start = request.generated_len();
  for (std::int64_t k = 0; k < count; ++k) {
    request.generated.push_back(
        synthetic_token(request.request_id, start + k, config_.vocab_size));
  }
  request.route_history.back().tokens += count;
  if (request.generated_len() >= request.target_len ||
      request.generated_len() >= config_.max_response_len) {
    complete(request, now);
  }
}

void RolloutManager::on_complete(RequestId id, Seconds now) {
  auto& request = mutable_request(id);
  if (request.state != RequestState::kExecuting) {
    throw Error("stream desync: completion for request " + std::to_string(id) +
                " while " + to_string(request.state));
  }
  request.target_len = static_cast<std::int32_t>(request.generated_len());
  complete(request, now);
}

std::vector<RequestId> RolloutManager::evacuate(const InstanceId& id,
                                                bool preempted, Seconds now) {
  std::vector<RequestId> affected(pending_[id].begin(), pending_[id].end());
  affected.insert(affected.end(), executing_[id].begin(), executing_[id].end());

  std::vector<RequestId> parked;
  for (RequestId rid : affected) {
    auto& request = mutable_request(rid);
    detach(request);
    request.state = RequestState::kMigrating;
    request.migrating_from = id;
    if (preempted && !config_.migrate_on_preempt && request.generated_len() > 0) {
      const std::int64_t lost = request.generated_len();
      request.generated.clear();
      request.route_history.clear();
      request.discarded_tokens += lost;
      log(now, EventType::kDiscard, id.value, static_cast<std::int64_t>(rid), lost);
    }
    ++migrations_;
    const auto routed = route_request(rid, now);
    if (routed.outcome == RouteOutcome::kRouted) {
      log(now, EventType::kMigrate, id.value, static_cast<std::int64_t>(rid),
          request.generated_len(), global_version_, routed.instance.value);
    } else {
      parked.push_back(rid);
    }
  }
  // In-progress work goes ahead of requests that never started.
  for (auto it = parked.rbegin(); it != parked.rend(); ++it) hold(*it, true, now);
  return affected;
}

std::vector<RequestId> RolloutManager::on_preempt(const InstanceId& id, Seconds now) {
  auto& record = mutable_instance(id);
  if (record.status == InstanceStatus::kPreempted) return {};
  if (record.local) throw Error("local engines are not preemptible");
  record.status = InstanceStatus::kPreempted;
  record.preempted_at = now;
  transfer_.abort(id, now);
  auto affected = evacuate(id, true, now);
  record.m_pending = 0;
  record.m_exec = 0;
  return affected;
}

void RolloutManager::apply_migration(const MigrationOrder& order, Seconds now) {
  if (order.from_instance == order.to_instance || order.request_ids.empty()) {
    throw Error("invalid migration order");
  }
  const auto& dest = instance(order.to_instance);
  if (dest.status != InstanceStatus::kActive || dest.weight_version != global_version_) {
    throw Error("migration target " + order.to_instance.value + " is not routable");
  }
  for (RequestId rid : order.request_ids) {
    auto& request = mutable_request(rid);
    const auto expected = order.kind == MigrationKind::kPending
                              ? RequestState::kPending
                              : RequestState::kExecuting;
    if (request.owner != order.from_instance || request.state != expected) {
      throw Error("migration order does not match request " + std::to_string(rid));
    }
    detach(request);
    commands_.push_back(CancelCommand{order.from_instance, rid});
    log(now, EventType::kCancel, order.from_instance.value,
        static_cast<std::int64_t>(rid), request.generated_len());
    request.state = RequestState::kMigrating;
    request.migrating_from = order.from_instance;
    ++migrations_;
    assign(request, order.to_instance, now);
    log(now, EventType::kMigrate, order.from_instance.value,
        static_cast<std::int64_t>(rid), request.generated_len(), global_version_,
        order.to_instance.value);
  }
}

std::vector<RequestId> RolloutManager::take_completed() {
  std::vector<RequestId> out;
  out.swap(completed_);
  return out;
}

std::vector<ManagerCommand> RolloutManager::take_commands() {
  std::vector<ManagerCommand> out;
  out.swap(commands_);
  return out;
}

void RolloutManager::clear_requests() {
  if (incomplete_ != 0) {
    throw Error("cannot clear requests while some are in flight", Error::Kind::kInternal);
  }
  requests_.clear();
  waiting_.clear();
  completed_.clear();
}

void RolloutManager::check_invariants() const {
  auto fail = [](const std::string& what) {
    throw Error("invariant violated: " + what, Error::Kind::kInternal);
  };
  std::size_t owned = 0;
  for (const auto& [id, r] : instances_) {
    const auto& queue = pending_.at(id);
    const auto& running = executing_.at(id);
    if (r.m_pending != static_cast<std::int32_t>(queue.size()) ||
        r.m_exec != static_cast<std::int32_t>(running.size())) {
      fail("queue depth counters on " + id.value);
    }
    if (r.status == InstanceStatus::kPreempted && (r.m_pending != 0 || r.m_exec != 0)) {
      fail("preempted instance " + id.value + " holds requests");
    }
    if (r.weight_version > global_version_) fail("weight version ahead on " + id.value);
    for (RequestId rid : queue) {
      const auto& q = requests_.at(rid);
      if (q.owner != id || q.state != RequestState::kPending) fail("pending owner");
    }
    for (RequestId rid : running) {
      const auto& q = requests_.at(rid);
      if (q.owner != id || q.state != RequestState::kExecuting) fail("executing owner");
    }
    owned += queue.size() + running.size();
  }
  std::size_t in_flight = 0;
  std::size_t migrating = 0;
  for (const auto& [rid, q] : requests_) {
    if (!tokens_conserved(q)) fail("token conservation on " + std::to_string(rid));
    if (q.generated_len() > q.target_len) fail("overrun on " + std::to_string(rid));
    const bool done = q.state == RequestState::kComplete;
    if (done != (q.generated_len() == q.target_len)) fail("completion state");
    if (!done) ++in_flight;
    if (q.state == RequestState::kPending || q.state == RequestState::kExecuting) {
      if (q.owner.value.empty()) fail("routed request without owner");
    } else if (!q.owner.value.empty()) {
      fail("unrouted request with owner");
    }
    if (q.state == RequestState::kUnrouted || q.state == RequestState::kMigrating) {
      ++migrating;
    }
  }
  if (in_flight != incomplete_) fail("incomplete counter");
  if (owned + migrating != in_flight) fail("request ownership accounting");
}

// ---------------------------------------------------------------- microbatches

MicrobatchAssembler::MicrobatchAssembler(std::int32_t m_b) : m_b_(m_b) {
  if (m_b < 1) throw Error("m_b must be >= 1");
}

std::optional<Microbatch> MicrobatchAssembler::push(
    const std::vector<std::pair<RequestId, std::int64_t>>& arrivals, Seconds now) {
  for (const auto& [id, tokens] : arrivals) {
    buffer_.push_back(id);
    tokens_ += tokens;
  }
  if (static_cast<std::int32_t>(buffer_.size()) < m_b_) return std::nullopt;
  Microbatch batch;
  batch.responses.swap(buffer_);
  batch.token_count = tokens_;
  batch.sealed_at = now;
  tokens_ = 0;
  return batch;
}

std::optional<Microbatch> MicrobatchAssembler::flush(Seconds now) {
  if (buffer_.empty()) return std::nullopt;
  Microbatch batch;
  batch.responses.swap(buffer_);
  batch.token_count = tokens_;
  batch.sealed_at = now;
  batch.final_flush = true;
  tokens_ = 0;
  return batch;
}

// ---------------------------------------------------------------- accounting

void StepAccounting::begin(std::int64_t step_index, Seconds now,
                           std::int32_t remote_count) {
  *this = StepAccounting{};
  step_index_ = step_index;
  start_ = now;
  last_change_ = now;
  count_ = remote_count;
}

void StepAccounting::remote_count_changed(Seconds now, std::int32_t count) {
  count_integral_ += static_cast<double>(count_) * (now - last_change_);
  last_change_ = now;
  count_ = count;
}

void StepAccounting::remote_activated(const InstanceId& id, Seconds at) {
  auto& seen = last_seen_[id];
  seen = std::max(seen, at);
}

void StepAccounting::remote_emission(const InstanceId& id, Seconds at) {
  auto& seen = last_seen_[id];
  seen = std::max(seen, at);
}

void StepAccounting::remote_gone(const InstanceId& id) { last_seen_.erase(id); }

StepStats StepAccounting::record_step(Seconds now, std::int64_t tokens_generated,
                                      std::int64_t tokens_trained,
                                      bool complete) const {
  if (!complete) throw Error("step not complete", Error::Kind::kSimulation);
  StepStats stats;
  stats.step_index = step_index_;
  stats.started_at = start_;
  stats.step_duration = now - start_;
  stats.t_wait_train = wait_train_;
  stats.t_train = train_;
  const double integral =
      count_integral_ + static_cast<double>(count_) * (now - last_change_);
  stats.n_bar_prem = stats.step_duration > 0 ? integral / stats.step_duration : 0;
  stats.n_hat_prem = count_;
  stats.remote_busy_time = remote_busy_;
  stats.t_remote = stats.n_bar_prem > 0 ? remote_busy_ / stats.n_bar_prem : 0;
  if (!last_seen_.empty()) {
    double total = 0;
    for (const auto& [id, at] : last_seen_) total += now - at;
    stats.t_wait_remote = total / static_cast<double>(last_seen_.size());
  }
  stats.tokens_generated = tokens_generated;
  stats.tokens_trained = tokens_trained;
  return stats;
}

}  // namespace spotrl
