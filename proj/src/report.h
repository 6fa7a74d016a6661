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

#include <ostream>
#include <string>
#include <vector>

#include "cluster_sim.h"
#include "scenarios.h"

namespace spotrl {

// One CSV row per step.
void write_timeline_csv(std::ostream& out, const std::vector<StepStats>& timeline);

struct RunSummary {
  std::string mode;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  Seconds end_time = 0;
  double avg_throughput = 0;        // trained tokens / wall time
  double mean_step_throughput = 0;  // mean of per-step trained-only throughput
  std::int64_t tokens_trained = 0;
  std::int64_t tokens_generated = 0;
  double tokens_per_dollar = 0;
  double total_dollars = 0;
  double reserved_dollars = 0;
  double preemptible_dollars = 0;
  // Time-weighted remote instances in use and allocated by the trace.
  double mean_instances_used = 0;
  double mean_instances_allocated = 0;
  std::int64_t deferred_allocations = 0;
  std::int64_t migrations = 0;
  std::int64_t fallback_steps = 0;
  std::int32_t disagg_pool = 0;
};

RunSummary summarize_run(const SimConfig& config, const std::vector<TraceEvent>& trace,
                         const ExperimentResult& result);
std::string to_json(const RunSummary& summary);

// timeline.csv, events.jsonl, summary.json and the effective config.ini.
void write_run_outputs(const std::string& out_dir, const SimConfig& config,
                       const std::vector<TraceEvent>& trace,
                       const ExperimentResult& result);

struct AblationOptions {
  std::int32_t jobs = 1;
  std::int32_t max_instances = 8;  // scaling sweep upper bound
  std::int32_t instances = 6;      // pool for fault-handling and length-sweep
};

const std::vector<std::string>& ablation_names();
// Runs a canned scenario, writes its CSV files to out_dir and returns a short
// human-readable report. Unknown names throw.
std::string run_ablation(const std::string& name, const SimConfig& base,
                         const AblationOptions& options, const std::string& out_dir);

}  // namespace spotrl
