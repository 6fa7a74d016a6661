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

#include <optional>

#include "domain.h"

namespace spotrl {

struct SchedulerConfig {
  double eta = 2.0;
  // Unset: a quarter of the estimated pure-local rollout time of step 1.
  std::optional<Seconds> t_init_seconds;
  bool memory_enabled = true;
  // Off reproduces the "w/o seeding" variant: the window is pinned at zero.
  bool seeding_enabled = true;
};

// Memory writes require |n_bar - n_hat| below this.
inline constexpr double kStableAvailabilityTolerance = 1e-6;
// t_train at or below this keeps the previous cap.
inline constexpr Seconds kMinTrainTime = 1e-3;
// Used when no rollout-time estimate exists.
inline constexpr Seconds kDefaultInitialSeedWindow = 30.0;

// Schedule for the first step: window t_init, cap initialised to n_resv.
StepSchedule initial_schedule(Seconds t_init, std::int32_t n_resv, double eta);

// t_seed + (t_wait_train - t_wait_remote) / eta, clamped at zero.
Seconds update_seed_window(const StepSchedule& schedule, const StepStats& stats);

// (t_remote * n_bar + t_seed * n_resv) / t_train with the window that was in
// effect during the measured step. Keeps the previous cap when t_train is
// degenerate.
double update_instance_cap(const StepSchedule& schedule, const StepStats& stats);

// Writes memory[n_hat] = t_seed_used when availability did not change over the
// step; returns the resulting memory.
std::map<std::int32_t, Seconds> memory_commit(const StepSchedule& schedule,
                                              const StepStats& stats,
                                              Seconds t_seed_used);

std::optional<Seconds> memory_retrieve(const StepSchedule& schedule,
                                       std::int32_t n_hat_prem);

// One pass of the adaptation loop body. Pure: the returned schedule is the one
// to execute next.
StepSchedule plan_step(const StepSchedule& schedule, const StepStats& last_stats,
                       const SchedulerConfig& config = {});

}  // namespace spotrl
