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

#include "load_balancer.h"

#include <algorithm>
#include <cmath>

namespace spotrl {

Selection select_instance(std::span<const InstanceRecord> registry,
                          std::int32_t theta) {
  if (registry.empty()) throw Error("no active instances");
  const InstanceRecord* best = nullptr;
  for (const auto& record : registry) {
    if (record.m_pending >= theta) continue;
    if (best == nullptr || record.m_pending < best->m_pending ||
        (record.m_pending == best->m_pending &&
         record.instance_id < best->instance_id)) {
      best = &record;
    }
  }
  if (best == nullptr) return MustWait{};
  return best->instance_id;
}

std::int32_t estimate_plateau(const ProfileTable& profile,
                              double current_mean_context, double epsilon,
                              const ContextFactor& factor) {
  if (!profile.ready()) throw ProfileNotReady();

  std::vector<ProfileEntry> entries = profile.entries;
  std::sort(entries.begin(), entries.end(),
            [](const ProfileEntry& a, const ProfileEntry& b) {
              return a.batch_size < b.batch_size;
            });
  if (factor) {
    const double now = factor(current_mean_context);
    for (auto& e : entries) {
      const double then = factor(e.context);
      if (then > 0) e.decode_throughput *= now / then;
    }
  }

  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    const auto& lo = entries[i];
    const auto& hi = entries[i + 1];
    if (lo.decode_throughput <= 0) continue;
    const double gain =
        (hi.decode_throughput - lo.decode_throughput) / lo.decode_throughput;
    const double growth = static_cast<double>(hi.batch_size - lo.batch_size) /
                          static_cast<double>(lo.batch_size);
    if (gain / growth < epsilon) return lo.batch_size;
  }
  return entries.back().batch_size;
}

std::vector<MigrationOrder> lb_tick(std::span<const InstanceLoad> registry,
                                    const ProfileTable* profile,
                                    double current_mean_context,
                                    const LbConfig& config,
                                    const ContextFactor& factor) {
  std::vector<MigrationOrder> orders;
  if (registry.size() < 2) return orders;

  // Registry order is not trusted; ties go to the lowest id.
  std::vector<const InstanceLoad*> sorted;
  sorted.reserve(registry.size());
  for (const auto& load : registry) sorted.push_back(&load);
  std::sort(sorted.begin(), sorted.end(),
            [](const InstanceLoad* a, const InstanceLoad* b) {
              return a->instance_id < b->instance_id;
            });

  const InstanceLoad* idle_queue = nullptr;
  bool any_pending = false;
  for (const auto* load : sorted) {
    if (load->m_pending == 0 && idle_queue == nullptr) idle_queue = load;
    if (load->m_pending > 0) any_pending = true;
  }

  if (idle_queue != nullptr && any_pending) {
    const InstanceLoad* source = sorted.front();
    for (const auto* load : sorted) {
      if (load->m_pending > source->m_pending) source = load;
    }
    if (source->pending.empty()) {
      throw Error("load snapshot pending list out of sync",
                  Error::Kind::kInternal);
    }
    // Newest arrival moves; the source keeps its FIFO head.
    orders.push_back(MigrationOrder{{source->pending.back()},
                                    source->instance_id,
                                    idle_queue->instance_id,
                                    MigrationKind::kPending});
    return orders;
  }

  const InstanceLoad* idle_batch = nullptr;
  for (const auto* load : sorted) {
    if (load->m_exec == 0) {
      idle_batch = load;
      break;
    }
  }
  if (idle_batch == nullptr) return orders;

  const InstanceLoad* source = sorted.front();
  for (const auto* load : sorted) {
    if (load->m_exec > source->m_exec) source = load;
  }
  if (profile == nullptr || !profile->ready()) return orders;
  const std::int32_t plateau = estimate_plateau(
      *profile, current_mean_context, config.epsilon_plateau, factor);
  const std::int32_t r = std::max(source->m_exec - plateau, 0);
  if (r == 0) return orders;

  std::vector<ExecutingRequest> candidates = source->executing;
  if (static_cast<std::int32_t>(candidates.size()) < r) {
    throw Error("load snapshot executing list out of sync",
                Error::Kind::kInternal);
  }
  // Shortest prefixes move: least re-prefill work.
  std::sort(candidates.begin(), candidates.end(),
            [](const ExecutingRequest& a, const ExecutingRequest& b) {
              if (a.generated != b.generated) return a.generated < b.generated;
              return a.request_id < b.request_id;
            });
  MigrationOrder order;
  order.from_instance = source->instance_id;
  order.to_instance = idle_batch->instance_id;
  order.kind = MigrationKind::kExecuting;
  for (std::int32_t k = 0; k < r; ++k) {
    order.request_ids.push_back(candidates[static_cast<std::size_t>(k)].request_id);
  }
  orders.push_back(std::move(order));
  return orders;
}

}  // namespace spotrl
