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

#include "weight_transfer.h"

#include <algorithm>
#include <limits>

namespace spotrl {
namespace {

constexpr double kByteSlack = 1e-3;

}  // namespace

WeightTransfer::WeightTransfer(std::vector<TransferAgent> agents)
    : agents_(std::move(agents)) {
  std::sort(agents_.begin(), agents_.end(),
            [](const TransferAgent& a, const TransferAgent& b) {
              return a.agent_id < b.agent_id;
            });
  for (std::size_t i = 1; i < agents_.size(); ++i) {
    if (agents_[i].agent_id == agents_[i - 1].agent_id) {
      throw Error("duplicate transfer agent id " + agents_[i].agent_id);
    }
  }
}

const std::string& WeightTransfer::pair_agent(const InstanceId& instance) {
  if (agents_.empty()) throw Error("no transfer agents");
  const auto& chosen = agents_[cursor_ % agents_.size()].agent_id;
  cursor_ = (cursor_ + 1) % agents_.size();
  pairing_[instance] = chosen;
  return chosen;
}

std::optional<std::string> WeightTransfer::paired_agent(
    const InstanceId& instance) const {
  auto it = pairing_.find(instance);
  if (it == pairing_.end()) return std::nullopt;
  return it->second;
}

TransferAgent& WeightTransfer::agent(const std::string& id) {
  for (auto& a : agents_) {
    if (a.agent_id == id) return a;
  }
  throw Error("unknown transfer agent " + id);
}

WeightVersion WeightTransfer::staged_version() const {
  WeightVersion v = std::numeric_limits<WeightVersion>::max();
  for (const auto& a : agents_) v = std::min(v, a.buffer_version);
  return agents_.empty() ? 0 : v;
}

void WeightTransfer::stage_weights(WeightVersion version, Seconds now,
                                   Seconds delay) {
  advance_internal(now);
  if (delay < 0) throw Error("staging delay must be >= 0");
  staging_ = std::make_pair(version, now + delay);
  promote_staging(now);
}

void WeightTransfer::promote_staging(Seconds now) {
  if (!staging_ || staging_->second > now) return;
  for (auto& a : agents_) {
    a.buffer_version = std::max(a.buffer_version, staging_->first);
  }
  staging_.reset();
  start_queued(now);
}

void WeightTransfer::start_queued(Seconds now) {
  bool changed = false;
  for (auto& [id, job] : jobs_) {
    if (job.state != PullState::kQueued) continue;
    auto& a = agent(job.agent_id);
    if (a.buffer_version < job.version) continue;
    job.state = PullState::kRunning;
    job.started_at = now;
    a.active_pulls.insert(id);
    changed = true;
  }
  if (changed) recompute_rates();
}

void WeightTransfer::recompute_rates() {
  for (auto& [id, job] : jobs_) {
    if (job.state != PullState::kRunning) {
      job.rate = 0;
      continue;
    }
    const auto& a = agent(job.agent_id);
    const double share =
        a.egress_bandwidth / static_cast<double>(std::max<std::size_t>(1, a.active_pulls.size()));
    job.rate = std::min(share, job.ingress_bandwidth);
  }
}

void WeightTransfer::start_pull(const InstanceId& instance, WeightVersion version,
                                double bytes_total, double ingress_bandwidth,
                                Seconds now) {
  advance_internal(now);
  auto agent_id = paired_agent(instance);
  if (!agent_id) throw Error("instance " + instance.value + " is not paired");
  if (!(bytes_total > 0) || !(ingress_bandwidth > 0)) {
    throw Error("pull needs positive size and bandwidth");
  }
  abort(instance, now);
  PullJob job;
  job.instance_id = instance;
  job.agent_id = *agent_id;
  job.version = version;
  job.bytes_total = bytes_total;
  job.ingress_bandwidth = ingress_bandwidth;
  job.started_at = now;
  jobs_[instance] = job;
  start_queued(now);
}

bool WeightTransfer::abort(const InstanceId& instance, Seconds now) {
  advance_internal(now);
  auto it = jobs_.find(instance);
  if (it == jobs_.end()) return false;
  agent(it->second.agent_id).active_pulls.erase(instance);
  jobs_.erase(it);
  recompute_rates();
  return true;
}

std::optional<Seconds> WeightTransfer::next_event_time() const {
  if (!unreported_.empty()) return clock_;
  return next_internal_time();
}

std::optional<Seconds> WeightTransfer::next_internal_time() const {
  std::optional<Seconds> next;
  if (staging_) next = staging_->second;
  for (const auto& [id, job] : jobs_) {
    if (job.state != PullState::kRunning || job.rate <= 0) continue;
    const Seconds t =
        clock_ + std::max(0.0, job.bytes_total - job.bytes_done) / job.rate;
    if (!next || t < *next) next = t;
  }
  return next;
}

std::vector<PullCompletion> WeightTransfer::advance_to(Seconds now) {
  advance_internal(now);
  std::vector<PullCompletion> done;
  done.swap(unreported_);
  return done;
}

void WeightTransfer::advance_internal(Seconds now) {
  auto& done = unreported_;
  if (now < clock_) now = clock_;
  // Piecewise: move to each intermediate finish or staging point in turn.
  while (true) {
    auto next = next_internal_time();
    const bool step_inside = next && *next <= now;
    const Seconds target = step_inside ? *next : now;
    const Seconds dt = target - clock_;
    for (auto& [id, job] : jobs_) {
      if (job.state == PullState::kRunning) {
        job.bytes_done = std::min(job.bytes_total, job.bytes_done + job.rate * dt);
      }
    }
    clock_ = target;

    std::vector<InstanceId> finished;
    for (auto& [id, job] : jobs_) {
      if (job.state != PullState::kRunning) continue;
      const double left = job.bytes_total - job.bytes_done;
      if (left <= kByteSlack ||
          (job.rate > 0 && clock_ + left / job.rate <= clock_)) {
        finished.push_back(id);
      }
    }
    for (const auto& id : finished) {
      auto& job = jobs_.at(id);
      done.push_back(PullCompletion{id, job.agent_id, job.version, clock_,
                                    job.started_at});
      agent(job.agent_id).active_pulls.erase(id);
      jobs_.erase(id);
    }
    if (!finished.empty()) recompute_rates();
    promote_staging(clock_);
    if (!step_inside) break;
  }
}

double model_bytes_for_preset(const std::string& preset) {
  if (preset == "8b") return 8e9 * 2;
  if (preset == "14b") return 14e9 * 2;
  if (preset == "32b") return 32e9 * 2;
  throw Error("unknown model preset '" + preset + "'");
}

}  // namespace spotrl
