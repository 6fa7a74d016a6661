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

#include "report.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "config.h"
#include "traces.h"

namespace spotrl {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string(), Error::Kind::kIo);
  return out;
}

void write_table(const std::filesystem::path& path, const CsvTable& table) {
  auto out = open_out(path);
  table.write(out);
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw Error("cannot create " + dir + ": " + ec.message(), Error::Kind::kIo);
  return p;
}

}  // namespace

void write_timeline_csv(std::ostream& out, const std::vector<StepStats>& timeline) {
  out << "step,started_at,step_duration,t_wait_train,t_wait_remote,t_train,t_remote,"
         "n_bar_prem,n_hat_prem,t_seed,n_prem_cap,seeding_time,rollout_time,"
         "remote_busy_time,tokens_generated,tokens_trained,local_tokens,remote_tokens,"
         "responses,microbatches,migrations,tokens_discarded,fallback,throughput\n";
  for (const auto& s : timeline) {
    out << s.step_index << ',' << num(s.started_at) << ',' << num(s.step_duration) << ','
        << num(s.t_wait_train) << ',' << num(s.t_wait_remote) << ',' << num(s.t_train) << ','
        << num(s.t_remote) << ',' << num(s.n_bar_prem) << ',' << s.n_hat_prem << ','
        << num(s.t_seed_used) << ',' << num(s.n_prem_cap_used) << ','
        << num(s.seeding_time) << ',' << num(s.rollout_time) << ','
        << num(s.remote_busy_time) << ',' << s.tokens_generated << ',' << s.tokens_trained
        << ',' << s.local_tokens << ',' << s.remote_tokens << ',' << s.responses << ','
        << s.microbatches << ',' << s.migrations << ',' << s.tokens_discarded << ','
        << (s.fallback ? 1 : 0) << ',' << num(compute_throughput(s).trained_only) << '\n';
  }
}

RunSummary summarize_run(const SimConfig& config, const std::vector<TraceEvent>& trace,
                         const ExperimentResult& result) {
  RunSummary s;
  s.mode = to_string(config.mode);
  s.seed = config.seed;
  s.steps = static_cast<std::int64_t>(result.timeline.size());
  s.end_time = result.end_time;
  s.avg_throughput = result.avg_throughput();
  s.mean_step_throughput = result.mean_step_throughput();
  s.tokens_per_dollar = result.cost.tokens_per_dollar;
  s.total_dollars = result.cost.total_dollars;
  s.reserved_dollars = result.cost.reserved_dollars;
  s.preemptible_dollars = result.cost.preemptible_dollars;
  s.deferred_allocations = result.deferred_allocations;
  s.disagg_pool = result.disagg_pool;
  double used = 0;
  for (const auto& st : result.timeline) {
    s.tokens_trained += st.tokens_trained;
    s.tokens_generated += st.tokens_generated;
    s.migrations += st.migrations;
    s.fallback_steps += st.fallback ? 1 : 0;
    used += st.n_bar_prem * st.step_duration;
  }
  if (result.end_time > 0) {
    s.mean_instances_used = used / result.end_time;
    if (config.mode != SimMode::kDisaggBalanced && !trace.empty()) {
      s.mean_instances_allocated = summarize(trace, result.end_time).avg_instances;
    } else if (config.mode == SimMode::kDisaggBalanced) {
      s.mean_instances_allocated = result.disagg_pool;
    }
  }
  return s;
}

std::string to_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["mode"] = s.mode;
  j["seed"] = s.seed;
  j["steps"] = s.steps;
  j["end_time"] = s.end_time;
  j["avg_throughput"] = s.avg_throughput;
  j["mean_step_throughput"] = s.mean_step_throughput;
  j["tokens_trained"] = s.tokens_trained;
  j["tokens_generated"] = s.tokens_generated;
  j["tokens_per_dollar"] = s.tokens_per_dollar;
  j["total_dollars"] = s.total_dollars;
  j["reserved_dollars"] = s.reserved_dollars;
  j["preemptible_dollars"] = s.preemptible_dollars;
  j["mean_instances_used"] = s.mean_instances_used;
  j["mean_instances_allocated"] = s.mean_instances_allocated;
  j["deferred_allocations"] = s.deferred_allocations;
  j["migrations"] = s.migrations;
  j["fallback_steps"] = s.fallback_steps;
  j["disagg_pool"] = s.disagg_pool;
  return j.dump(2) + "\n";
}

void write_run_outputs(const std::string& out_dir, const SimConfig& config,
                       const std::vector<TraceEvent>& trace,
                       const ExperimentResult& result) {
  const auto dir = ensure_dir(out_dir);
  {
    auto out = open_out(dir / "timeline.csv");
    write_timeline_csv(out, result.timeline);
  }
  {
    auto out = open_out(dir / "events.jsonl");
    result.events.write_jsonl(out);
  }
  {
    auto out = open_out(dir / "summary.json");
    out << to_json(summarize_run(config, trace, result));
  }
  {
    auto out = open_out(dir / "config.ini");
    out << write_config(config);
  }
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names = {"seeding", "weight-transfer",
                                                 "fault-handling", "scaling", "length-sweep"};
  return names;
}

std::string run_ablation(const std::string& name, const SimConfig& base,
                         const AblationOptions& options, const std::string& out_dir) {
  std::ostringstream report;
  if (name == "scaling") {
    const auto r = run_scaling(base, options.max_instances, options.jobs);
    const auto dir = ensure_dir(out_dir);
    write_table(dir / "scaling.csv", to_table(r));
    const double b = r.points.front().steady_throughput;
    report << "scaling: 0.." << options.max_instances << " instances, saturation at "
           << r.saturation << "\n";
    for (const auto& p : r.points) {
      report << "  " << p.instances << " instances: " << num(p.steady_throughput)
             << " tok/s (" << num(b > 0 ? 100 * (p.steady_throughput / b - 1) : 0) << "%)\n";
    }
  } else if (name == "seeding") {
    const auto r = run_seeding(base, {6, 1, 6}, 3600, options.jobs);
    const auto dir = ensure_dir(out_dir);
    write_table(dir / "seeding.csv", to_table(r));
    write_table(dir / "seeding_timeline.csv", to_timeline_table(r));
    for (const auto& v : r.variants) {
      report << "  " << v.name << ": " << num(v.avg_throughput) << " tok/s\n";
    }
  } else if (name == "fault-handling") {
    const auto r = run_fault_handling(base, options.instances, options.instances / 2,
                                      {1.0 / 3.0, 2.0 / 3.0}, kWarmupSteps + 2, options.jobs);
    const auto dir = ensure_dir(out_dir);
    write_table(dir / "fault_handling.csv", to_table(r));
    for (const auto& c : r.cases) {
      report << "  preempt " << r.preempted << "/" << r.instances << " at " << num(c.fraction)
             << " of rollout: migrate +" << num(c.migrate_overhead()) << " s, recompute +"
             << num(c.recompute_overhead()) << " s, reduction "
             << num(100 * c.reduction()) << "%\n";
    }
  } else if (name == "weight-transfer") {
    const auto r = run_weight_transfer(base, 4, 0.3, kWarmupSteps + 1, options.jobs);
    const auto dir = ensure_dir(out_dir);
    write_table(dir / "weight_transfer.csv", to_table(r));
    for (const auto& c : r.cases) {
      report << "  " << c.kind << " / " << c.mode << ": " << c.tokens_in_step
             << " tokens in step " << r.measured_step << "\n";
    }
  } else if (name == "length-sweep") {
    const auto r =
        run_length_sweep(base, options.instances, {5120, 8192, 11264, 14336}, options.jobs);
    const auto dir = ensure_dir(out_dir);
    write_table(dir / "length_sweep.csv", to_table(r));
    for (const auto& p : r.points) {
      report << "  max " << p.max_response_len << ": relative throughput "
             << num(p.relative_throughput()) << "x, cost efficiency "
             << num(p.relative_cost_efficiency()) << "x\n";
    }
  } else {
    throw Error("unknown ablation '" + name +
                "' (seeding, weight-transfer, fault-handling, scaling, length-sweep)");
  }
  return report.str();
}

}  // namespace spotrl
