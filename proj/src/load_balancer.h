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

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "domain.h"

namespace spotrl {

struct LbConfig {
  std::int32_t theta = 4;
  double epsilon_plateau = 0.05;
  Seconds lb_tick_seconds = 1.0;
};

enum class MigrationKind { kPending, kExecuting };

struct MigrationOrder {
  std::vector<RequestId> request_ids;
  InstanceId from_instance;
  InstanceId to_instance;
  MigrationKind kind = MigrationKind::kPending;
};

struct ExecutingRequest {
  RequestId request_id = 0;
  std::int64_t generated = 0;
};

// Registry snapshot entry for the rebalancer. m_pending/m_exec must equal the
// list sizes; pending is in arrival order.
struct InstanceLoad {
  InstanceId instance_id;
  std::int32_t m_pending = 0;
  std::int32_t m_exec = 0;
  std::vector<RequestId> pending;
  std::vector<ExecutingRequest> executing;
};

struct MustWait {};

using Selection = std::variant<InstanceId, MustWait>;

// Join-shortest-queue with delayed dispatch: the instance with the fewest
// pending requests among those below theta, lowest id on ties. MustWait when
// every instance is at theta. Throws on an empty registry.
Selection select_instance(std::span<const InstanceRecord> registry,
                          std::int32_t theta);

// Relative scale of decode throughput at context c; observations are rescaled
// by factor(c_now) / factor(c_capture).
using ContextFactor = std::function<double(double context)>;

class ProfileNotReady : public Error {
 public:
  ProfileNotReady() : Error("profile not ready") {}
};

// Smallest observed batch size b whose step to the next observation gains less
// than epsilon in throughput per unit relative batch growth. Largest batch when
// no plateau is seen.
std::int32_t estimate_plateau(const ProfileTable& profile,
                              double current_mean_context, double epsilon,
                              const ContextFactor& factor = {});

// One iteration of the continuous rebalancer. At most one order; pending and
// executing branches are mutually exclusive. A null profile (or one that is not
// ready) disables executing migration.
std::vector<MigrationOrder> lb_tick(std::span<const InstanceLoad> registry,
                                    const ProfileTable* profile,
                                    double current_mean_context,
                                    const LbConfig& config,
                                    const ContextFactor& factor = {});

}  // namespace spotrl
