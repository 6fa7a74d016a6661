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
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cluster_sim.h"

namespace spotrl {

// Runs fn(0..n-1) on up to `jobs` threads; results keep index order.
template <typename T>
std::vector<T> parallel_map(std::size_t n, std::int32_t jobs,
                            const std::function<T(std::size_t)>& fn);

// Availability traces used by the canned scenarios.
std::vector<TraceEvent> static_pool_trace(std::int32_t instances,
                                          const std::string& prefix = "spot-");

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write(std::ostream& out) const;
};

// Steps at the start of a run excluded from steady-state averages.
inline constexpr std::int64_t kWarmupSteps = 3;

double steady_throughput(const ExperimentResult& result,
                         std::int64_t warmup = kWarmupSteps);

// ---------------------------------------------------------------- scaling

struct ScalingPoint {
  std::int32_t instances = 0;
  double avg_throughput = 0;
  double steady_throughput = 0;
  double mean_t_remote = 0;   // steady-state steps
  double mean_t_train = 0;
  double mean_cap = 0;
  double mean_used = 0;       // time-averaged remote instances
  double tokens_per_dollar = 0;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  // First instance count whose remote rollout time fits within t_train; -1 if
  // none in the sweep.
  std::int32_t saturation = -1;
};

ScalingResult run_scaling(const SimConfig& base, std::int32_t max_instances,
                          std::int32_t jobs = 1);
CsvTable to_table(const ScalingResult& result);

// ---------------------------------------------------------------- seeding

struct SeedingVariant {
  std::string name;  // full, no-memory, no-seeding
  ExperimentResult result;
  double avg_throughput = 0;
  // Steps needed to settle after each change to a previously seen count.
  std::vector<std::int32_t> reconvergence_steps;
};

struct SeedingResult {
  std::vector<SeedingVariant> variants;
  std::vector<std::int32_t> phases;  // availability of each phase
  Seconds phase_seconds = 0;
};

// Availability cycles through `phases` (one block of phase_seconds each).
std::vector<TraceEvent> cycling_trace(const std::vector<std::int32_t>& phases,
                                      Seconds phase_seconds);

// Steps after `change_step` until t_seed stops moving by more than
// max(abs_tol, rel_tol * t_seed) between consecutive steps.
std::int32_t reconvergence_steps(const std::vector<StepStats>& timeline,
                                 std::size_t change_index, std::size_t end_index,
                                 double abs_tol = 2.0, double rel_tol = 0.10);

SeedingResult run_seeding(const SimConfig& base, const std::vector<std::int32_t>& phases,
                          Seconds phase_seconds, std::int32_t jobs = 1);
CsvTable to_table(const SeedingResult& result);
CsvTable to_timeline_table(const SeedingResult& result);

// ---------------------------------------------------------------- fault handling

struct FaultCase {
  double fraction = 0;  // point of the measured step's rollout
  Seconds preempt_at = 0;
  Seconds baseline_step = 0;
  Seconds migrate_step = 0;
  Seconds recompute_step = 0;
  double migrate_overhead() const { return migrate_step - baseline_step; }
  double recompute_overhead() const { return recompute_step - baseline_step; }
  // 1 - migrate / recompute overhead.
  double reduction() const;
};

struct FaultResult {
  std::int64_t measured_step = 0;
  std::int32_t instances = 0;
  std::int32_t preempted = 0;
  Seconds step_start = 0;
  Seconds baseline_rollout = 0;
  std::vector<FaultCase> cases;
};

FaultResult run_fault_handling(const SimConfig& base, std::int32_t instances,
                               std::int32_t preempted,
                               const std::vector<double>& fractions,
                               std::int64_t measured_step = kWarmupSteps + 2,
                               std::int32_t jobs = 1);
CsvTable to_table(const FaultResult& result);

// ---------------------------------------------------------------- weight transfer

struct TransferCase {
  std::string kind;  // join, restart
  std::string mode;  // pull, synchronized
  Seconds event_at = 0;
  std::int64_t tokens_in_step = 0;  // produced by the joining instance
  Seconds step_duration = 0;
};

struct TransferResult {
  std::int64_t measured_step = 0;
  std::string instance;
  std::vector<TransferCase> cases;
};

// Tokens produced by `instance` during `step` after time `since`, read from
// decode events.
std::int64_t instance_tokens_in_step(const EventLog& log, const std::string& instance,
                                     std::int64_t step, Seconds since = -1);

TransferResult run_weight_transfer(const SimConfig& base, std::int32_t instances,
                                   double fraction = 0.3,
                                   std::int64_t measured_step = kWarmupSteps + 1,
                                   std::int32_t jobs = 1);
CsvTable to_table(const TransferResult& result);

// ---------------------------------------------------------------- length sweep

struct LengthPoint {
  std::int32_t max_response_len = 0;
  double colocated_throughput = 0;
  double hybrid_throughput = 0;
  double colocated_tokens_per_dollar = 0;
  double hybrid_tokens_per_dollar = 0;
  double mean_cap = 0;
  double relative_throughput() const;
  double relative_cost_efficiency() const;
};

struct LengthResult {
  std::int32_t instances = 0;
  std::vector<LengthPoint> points;
};

LengthResult run_length_sweep(const SimConfig& base, std::int32_t instances,
                              const std::vector<std::int32_t>& max_lengths,
                              std::int32_t jobs = 1);
CsvTable to_table(const LengthResult& result);

// ---------------------------------------------------------------- segments

struct ComparisonRow {
  std::string mode;
  double avg_throughput = 0;
  double tokens_per_dollar = 0;
  double total_dollars = 0;
  std::int64_t steps = 0;
};

// Runs each mode over the same trace for `duration` seconds.
std::vector<ComparisonRow> compare_modes(const SimConfig& base,
                                         const std::vector<TraceEvent>& trace,
                                         const std::vector<SimMode>& modes,
                                         Seconds duration, std::int32_t jobs = 1);

}  // namespace spotrl

#include "scenarios_inl.h"
