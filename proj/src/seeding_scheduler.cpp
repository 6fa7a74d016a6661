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

#include "seeding_scheduler.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace spotrl {
namespace {

void check_finite(const StepStats& stats) {
  const double fields[] = {stats.t_wait_train, stats.t_wait_remote,
                           stats.t_train,      stats.t_remote,
                           stats.n_bar_prem,   stats.step_duration};
  for (double v : fields) {
    if (!std::isfinite(v)) throw Error("corrupt stats");
  }
}

void check_eta(const StepSchedule& schedule) {
  if (!(schedule.eta > 0) || !std::isfinite(schedule.eta)) {
    throw Error("adaptation rate eta must be positive");
  }
}

}  // namespace

StepSchedule initial_schedule(Seconds t_init, std::int32_t n_resv, double eta) {
  if (!(t_init >= 0)) throw Error("initial seeding window must be >= 0");
  if (n_resv < 0) throw Error("n_resv must be >= 0");
  StepSchedule schedule;
  schedule.t_seed = t_init;
  schedule.n_prem_cap = static_cast<double>(n_resv);
  schedule.n_resv = n_resv;
  schedule.eta = eta;
  check_eta(schedule);
  return schedule;
}

Seconds update_seed_window(const StepSchedule& schedule,
                           const StepStats& stats) {
  check_eta(schedule);
  check_finite(stats);
  const Seconds next =
      schedule.t_seed + (stats.t_wait_train - stats.t_wait_remote) / schedule.eta;
  return std::max<Seconds>(0.0, next);
}

double update_instance_cap(const StepSchedule& schedule,
                           const StepStats& stats) {
  check_finite(stats);
  if (stats.t_train <= kMinTrainTime) {
    spdlog::warn("step {}: t_train={}s below guard, keeping cap {}",
                 stats.step_index, stats.t_train, schedule.n_prem_cap);
    return schedule.n_prem_cap;
  }
  return (stats.t_remote * stats.n_bar_prem +
          schedule.t_seed * static_cast<double>(schedule.n_resv)) /
         stats.t_train;
}

std::map<std::int32_t, Seconds> memory_commit(const StepSchedule& schedule,
                                              const StepStats& stats,
                                              Seconds t_seed_used) {
  auto memory = schedule.memory;
  const double churn =
      std::abs(stats.n_bar_prem - static_cast<double>(stats.n_hat_prem));
  if (churn < kStableAvailabilityTolerance) {
    memory[stats.n_hat_prem] = std::max<Seconds>(0.0, t_seed_used);
  }
  return memory;
}

std::optional<Seconds> memory_retrieve(const StepSchedule& schedule,
                                       std::int32_t n_hat_prem) {
  auto it = schedule.memory.find(n_hat_prem);
  if (it == schedule.memory.end()) return std::nullopt;
  return it->second;
}

StepSchedule plan_step(const StepSchedule& schedule, const StepStats& last_stats,
                       const SchedulerConfig& config) {
  StepSchedule next = schedule;
  if (!config.seeding_enabled) {
    // Window pinned at zero; only the cap adapts.
    next.t_seed = 0;
    StepSchedule measured = schedule;
    measured.t_seed = 0;
    next.n_prem_cap = update_instance_cap(measured, last_stats);
    return next;
  }

  next.t_seed = update_seed_window(schedule, last_stats);
  next.n_prem_cap = update_instance_cap(schedule, last_stats);
  if (config.memory_enabled) {
    next.memory = memory_commit(schedule, last_stats, next.t_seed);
    if (auto remembered = memory_retrieve(next, last_stats.n_hat_prem)) {
      next.t_seed = *remembered;
    }
  }
  return next;
}

}  // namespace spotrl
