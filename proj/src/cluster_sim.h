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

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "domain.h"
#include "event_log.h"
#include "generation_model.h"
#include "load_balancer.h"
#include "seeding_scheduler.h"
#include "traces.h"

namespace spotrl {

enum class SimMode { kHybrid, kColocated, kDisaggBalanced };

const char* to_string(SimMode mode);
SimMode parse_mode(const std::string& text);

struct SimConfig {
  std::uint64_t seed = 1;
  SimMode mode = SimMode::kHybrid;

  std::int32_t prompt_count = 128;
  std::int32_t group_size = 8;
  std::int32_t m_b = 16;
  LengthDistribution lengths;

  GenerationModel generation;
  TrainerModel trainer;
  CostModel cost;

  double model_bytes = 28e9;
  double instance_ingress = 6.25e9;
  double agent_egress = 25e9;
  std::int32_t agents_per_node = 1;
  Seconds staging_delay = 0;
  // false: synchronized transfer, weights only move at step boundaries.
  bool pull_mode = true;
  // false: recompute baseline.
  bool migrate_on_preempt = true;

  SchedulerConfig scheduler;
  std::int32_t n_resv = 4;
  LbConfig lb;
  bool lb_enabled = true;

  double local_speed = 1.0;
  Seconds switch_cost = 2.0;
  std::int32_t remote_gpu_count = 2;

  std::int64_t max_steps = 10;
  // Stop at the first step boundary past this time; 0 disables.
  Seconds max_duration = 0;

  // Overrides for experiments that pin the control variables.
  std::optional<double> fixed_cap;
  std::optional<Seconds> fixed_t_seed;
  // DisaggBalanced pool size; unset uses the closed form.
  std::optional<std::int32_t> disagg_pool;
  // Price of one dedicated remote instance in DisaggBalanced; unset is a
  // quarter of the reserved node rate.
  std::optional<double> disagg_instance_rate;

  bool record_events = true;
  // Run the manager's consistency checks after every event.
  bool audit = false;
};

void validate(const SimConfig& config);

// Pure-local rollout time of one step estimated from the models.
Seconds estimate_local_rollout_time(const SimConfig& config);
// Training time of one step estimated from the models.
Seconds estimate_train_time(const SimConfig& config);
// Smallest pool whose pure-remote rollout estimate fits within the training
// estimate.
std::int32_t disagg_pool_size(const SimConfig& config);
// Window used for step 1 when none is configured.
Seconds initial_seed_window(const SimConfig& config);

struct ExperimentResult {
  std::vector<StepStats> timeline;
  std::vector<StepSchedule> schedules;  // schedule executed by each step
  // Sum of target lengths drawn for each step, independent of the event loop.
  std::vector<std::int64_t> step_target_tokens;
  std::vector<ActivityInterval> activity;
  EventLog events;
  CostReport cost;
  ProfileTable profile;
  Seconds end_time = 0;
  std::int32_t disagg_pool = 0;
  std::int64_t deferred_allocations = 0;

  // Trained tokens over total wall time.
  double avg_throughput() const;
  // Mean of the per-step trained-only throughput.
  double mean_step_throughput() const;
};

class Simulator {
 public:
  Simulator(SimConfig config, std::vector<TraceEvent> trace);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  // Executes one full step; false once the experiment budget is exhausted.
  std::optional<StepStats> run_step();
  bool finished() const;
  // Closes the experiment and returns everything recorded.
  ExperimentResult finish();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

ExperimentResult run_experiment(const SimConfig& config,
                                const std::vector<TraceEvent>& trace);

}  // namespace spotrl
