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

#include "scenarios.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace spotrl {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt_int(std::int64_t v) { return std::to_string(v); }

std::string pool_id(const std::string& prefix, std::int32_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return prefix + buf;
}

template <typename F>
double steady_mean(const ExperimentResult& r, F&& field) {
  double sum = 0;
  std::int64_t n = 0;
  for (const auto& s : r.timeline) {
    if (s.step_index <= kWarmupSteps) continue;
    sum += field(s);
    ++n;
  }
  if (n == 0) {
    for (const auto& s : r.timeline) {
      sum += field(s);
      ++n;
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : 0;
}

SimConfig unbounded(SimConfig c, Seconds duration) {
  c.max_duration = duration;
  c.max_steps = 1000000;
  return c;
}

}  // namespace

std::vector<TraceEvent> static_pool_trace(std::int32_t instances, const std::string& prefix) {
  std::vector<TraceEvent> trace;
  for (std::int32_t i = 0; i < instances; ++i) {
    trace.push_back({0, TraceKind::kAllocate, pool_id(prefix, i)});
  }
  return trace;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw Error("csv row width mismatch", Error::Kind::kInternal);
  rows.push_back(std::move(row));
}

void CsvTable::write(std::ostream& out) const {
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

double steady_throughput(const ExperimentResult& result, std::int64_t warmup) {
  double sum = 0;
  std::int64_t n = 0;
  for (const auto& s : result.timeline) {
    if (s.step_index <= warmup) continue;
    sum += compute_throughput(s).trained_only;
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : result.mean_step_throughput();
}

// ---------------------------------------------------------------- scaling

ScalingResult run_scaling(const SimConfig& base, std::int32_t max_instances,
                          std::int32_t jobs) {
  if (max_instances < 0) throw Error("max_instances must be >= 0");
  ScalingResult out;
  out.points = parallel_map<ScalingPoint>(
      static_cast<std::size_t>(max_instances) + 1, jobs, [&](std::size_t i) {
        SimConfig c = base;
        c.mode = SimMode::kHybrid;
        c.record_events = false;
        const auto n = static_cast<std::int32_t>(i);
        const auto r = run_experiment(c, static_pool_trace(n));
        ScalingPoint p;
        p.instances = n;
        p.avg_throughput = r.avg_throughput();
        p.steady_throughput = steady_throughput(r);
        p.mean_t_train = steady_mean(r, [](const StepStats& s) { return s.t_train; });
        p.mean_cap = steady_mean(r, [](const StepStats& s) { return s.n_prem_cap_used; });
        p.mean_used = steady_mean(r, [](const StepStats& s) { return s.n_bar_prem; });
        // Rollout work in instance-seconds, seeded part included, spread over the pool.
        p.mean_t_remote = n == 0 ? 0 : steady_mean(r, [&](const StepStats& s) {
          const double seeded = std::min(s.t_seed_used, s.seeding_time) * c.n_resv;
          return (s.remote_busy_time + seeded) / n;
        });
        p.tokens_per_dollar = r.cost.tokens_per_dollar;
        return p;
      });
  for (const auto& p : out.points) {
    if (p.instances > 0 && p.mean_t_remote <= p.mean_t_train) {
      out.saturation = p.instances;
      break;
    }
  }
  return out;
}

CsvTable to_table(const ScalingResult& result) {
  CsvTable t;
  t.columns = {"instances", "avg_throughput", "steady_throughput", "gain_vs_0",
               "remote_rollout_time", "t_train", "mean_cap", "mean_used",
               "tokens_per_dollar", "saturated"};
  const double base = result.points.empty() ? 0 : result.points.front().steady_throughput;
  for (const auto& p : result.points) {
    t.add_row({fmt_int(p.instances), fmt_double(p.avg_throughput),
               fmt_double(p.steady_throughput),
               fmt_double(base > 0 ? p.steady_throughput / base - 1 : 0),
               fmt_double(p.mean_t_remote), fmt_double(p.mean_t_train),
               fmt_double(p.mean_cap), fmt_double(p.mean_used),
               fmt_double(p.tokens_per_dollar),
               result.saturation >= 0 && p.instances >= result.saturation ? "1" : "0"});
  }
  return t;
}

// ---------------------------------------------------------------- seeding

std::vector<TraceEvent> cycling_trace(const std::vector<std::int32_t>& phases,
                                      Seconds phase_seconds) {
  if (phases.empty() || !(phase_seconds > 0)) throw Error("empty availability cycle");
  std::vector<TraceEvent> trace;
  std::vector<std::string> alive;
  std::int32_t next_id = 0;
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const Seconds at = static_cast<double>(k) * phase_seconds;
    if (phases[k] < 0) throw Error("negative availability");
    while (static_cast<std::int32_t>(alive.size()) > phases[k]) {
      trace.push_back({at, TraceKind::kPreempt, alive.back()});
      alive.pop_back();
    }
    while (static_cast<std::int32_t>(alive.size()) < phases[k]) {
      alive.push_back(pool_id("spot-", next_id++));
      trace.push_back({at, TraceKind::kAllocate, alive.back()});
    }
  }
  return trace;
}

std::int32_t reconvergence_steps(const std::vector<StepStats>& timeline,
                                 std::size_t change_index, std::size_t end_index,
                                 double abs_tol, double rel_tol) {
  end_index = std::min(end_index, timeline.size());
  for (std::size_t j = change_index + 1; j + 1 < end_index; ++j) {
    const double a = timeline[j].t_seed_used;
    const double b = timeline[j + 1].t_seed_used;
    if (std::abs(b - a) <= std::max(abs_tol, rel_tol * std::max(a, b))) {
      return static_cast<std::int32_t>(j - change_index);
    }
  }
  return static_cast<std::int32_t>(end_index - change_index);
}

SeedingResult run_seeding(const SimConfig& base, const std::vector<std::int32_t>& phases,
                          Seconds phase_seconds, std::int32_t jobs) {
  SeedingResult out;
  out.phases = phases;
  out.phase_seconds = phase_seconds;
  const auto trace = cycling_trace(phases, phase_seconds);
  const std::vector<std::string> names = {"full", "no-memory", "no-seeding"};
  out.variants = parallel_map<SeedingVariant>(names.size(), jobs, [&](std::size_t i) {
    SimConfig c = unbounded(base, phase_seconds * static_cast<double>(phases.size()));
    c.mode = SimMode::kHybrid;
    c.scheduler.memory_enabled = names[i] != "no-memory";
    c.scheduler.seeding_enabled = names[i] != "no-seeding";
    SeedingVariant v;
    v.name = names[i];
    v.result = run_experiment(c, trace);
    v.avg_throughput = v.result.avg_throughput();

    // Phase boundaries as seen from the step timeline.
    const auto& tl = v.result.timeline;
    std::vector<std::size_t> changes;
    for (std::size_t k = 1; k < tl.size(); ++k) {
      if (tl[k].n_hat_prem != tl[k - 1].n_hat_prem) changes.push_back(k);
    }
    std::set<std::int32_t> seen{tl.empty() ? 0 : tl.front().n_hat_prem};
    for (std::size_t c_i = 0; c_i < changes.size(); ++c_i) {
      const std::size_t k = changes[c_i];
      const std::size_t end = c_i + 1 < changes.size() ? changes[c_i + 1] : tl.size();
      if (seen.count(tl[k].n_hat_prem) != 0) {
        v.reconvergence_steps.push_back(reconvergence_steps(tl, k, end));
      }
      seen.insert(tl[k].n_hat_prem);
    }
    return v;
  });
  return out;
}

CsvTable to_table(const SeedingResult& result) {
  CsvTable t;
  t.columns = {"variant", "avg_throughput", "steps", "reconvergence_steps"};
  for (const auto& v : result.variants) {
    std::string steps;
    for (std::size_t i = 0; i < v.reconvergence_steps.size(); ++i) {
      steps += (i ? ";" : "") + std::to_string(v.reconvergence_steps[i]);
    }
    t.add_row({v.name, fmt_double(v.avg_throughput),
               fmt_int(static_cast<std::int64_t>(v.result.timeline.size())), steps});
  }
  return t;
}

CsvTable to_timeline_table(const SeedingResult& result) {
  CsvTable t;
  t.columns = {"variant", "step", "started_at", "t_seed", "n_hat", "n_bar", "throughput"};
  for (const auto& v : result.variants) {
    for (const auto& s : v.result.timeline) {
      t.add_row({v.name, fmt_int(s.step_index), fmt_double(s.started_at),
                 fmt_double(s.t_seed_used), fmt_int(s.n_hat_prem), fmt_double(s.n_bar_prem),
                 fmt_double(compute_throughput(s).trained_only)});
    }
  }
  return t;
}

// ---------------------------------------------------------------- fault handling

double FaultCase::reduction() const {
  const double rec = recompute_overhead();
  return rec > 0 ? 1.0 - migrate_overhead() / rec : 0;
}

FaultResult run_fault_handling(const SimConfig& base, std::int32_t instances,
                               std::int32_t preempted, const std::vector<double>& fractions,
                               std::int64_t measured_step, std::int32_t jobs) {
  if (preempted < 1 || preempted > instances) throw Error("bad preemption count");
  if (measured_step < 1) throw Error("measured_step must be >= 1");
  SimConfig c = base;
  c.mode = SimMode::kHybrid;
  c.max_steps = measured_step;
  c.max_duration = 0;
  c.record_events = false;
  const auto pool = static_pool_trace(instances);
  const auto baseline = run_experiment(c, pool);
  const StepStats& ref = baseline.timeline.at(static_cast<std::size_t>(measured_step - 1));

  FaultResult out;
  out.measured_step = measured_step;
  out.instances = instances;
  out.preempted = preempted;
  out.step_start = ref.started_at;
  out.baseline_rollout = ref.rollout_time;

  struct Job {
    std::size_t fraction;
    bool migrate;
  };
  std::vector<Job> work;
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    work.push_back({f, true});
    work.push_back({f, false});
  }
  const auto durations = parallel_map<Seconds>(work.size(), jobs, [&](std::size_t i) {
    SimConfig v = c;
    v.migrate_on_preempt = work[i].migrate;
    auto trace = pool;
    const Seconds at = ref.started_at + fractions[work[i].fraction] * ref.rollout_time;
    for (std::int32_t k = 0; k < preempted; ++k) {
      trace.push_back({at, TraceKind::kPreempt, pool_id("spot-", instances - 1 - k)});
    }
    const auto r = run_experiment(v, trace);
    return r.timeline.at(static_cast<std::size_t>(measured_step - 1)).step_duration;
  });
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    FaultCase fc;
    fc.fraction = fractions[f];
    fc.preempt_at = ref.started_at + fractions[f] * ref.rollout_time;
    fc.baseline_step = ref.step_duration;
    fc.migrate_step = durations[2 * f];
    fc.recompute_step = durations[2 * f + 1];
    out.cases.push_back(fc);
  }
  return out;
}

CsvTable to_table(const FaultResult& result) {
  CsvTable t;
  t.columns = {"fraction", "preempt_offset", "baseline_step", "migrate_step",
               "recompute_step", "migrate_overhead", "recompute_overhead", "reduction"};
  for (const auto& c : result.cases) {
    t.add_row({fmt_double(c.fraction), fmt_double(c.preempt_at - result.step_start),
               fmt_double(c.baseline_step), fmt_double(c.migrate_step),
               fmt_double(c.recompute_step), fmt_double(c.migrate_overhead()),
               fmt_double(c.recompute_overhead()), fmt_double(c.reduction())});
  }
  return t;
}

// ---------------------------------------------------------------- weight transfer

std::int64_t instance_tokens_in_step(const EventLog& log, const std::string& instance,
                                     std::int64_t step, Seconds since) {
  std::int64_t current = 0;
  std::int64_t tokens = 0;
  for (const auto& ev : log.records()) {
    if (ev.type == EventType::kStepBegin) current = ev.version;
    if (ev.type == EventType::kStepEnd) current = 0;
    if (current == step && ev.type == EventType::kDecode && ev.instance == instance &&
        ev.at > since) {
      tokens += ev.value;
    }
  }
  return tokens;
}

TransferResult run_weight_transfer(const SimConfig& base, std::int32_t instances,
                                   double fraction, std::int64_t measured_step,
                                   std::int32_t jobs) {
  SimConfig c = base;
  c.mode = SimMode::kHybrid;
  c.max_steps = measured_step;
  c.max_duration = 0;
  c.record_events = false;
  const auto pool = static_pool_trace(instances);
  // The transfer mode changes the schedule from step 1, so each mode gets its
  // own baseline to place the event inside the measured step.
  const auto baselines = parallel_map<StepStats>(2, jobs, [&](std::size_t i) {
    SimConfig v = c;
    v.pull_mode = i == 0;
    return run_experiment(v, pool).timeline.at(static_cast<std::size_t>(measured_step - 1));
  });

  TransferResult out;
  out.measured_step = measured_step;
  out.instance = "spot-join";
  struct Job {
    std::string kind;
    bool pull;
  };
  const std::vector<Job> work = {{"join", true}, {"join", false},
                                 {"restart", true}, {"restart", false}};
  out.cases = parallel_map<TransferCase>(work.size(), jobs, [&](std::size_t i) {
    SimConfig v = c;
    v.pull_mode = work[i].pull;
    v.record_events = true;
    const StepStats& ref = baselines[work[i].pull ? 0 : 1];
    const Seconds at = ref.started_at + fraction * ref.rollout_time;
    auto trace = pool;
    std::string id = "spot-join";
    if (work[i].kind == "restart") {
      id = pool_id("spot-", 0);
      trace.push_back({at, TraceKind::kPreempt, id});
    }
    trace.push_back({at, TraceKind::kAllocate, id});
    const auto r = run_experiment(v, trace);
    TransferCase tc;
    tc.kind = work[i].kind;
    tc.mode = work[i].pull ? "pull" : "synchronized";
    tc.event_at = at;
    tc.tokens_in_step = instance_tokens_in_step(r.events, id, measured_step, at);
    tc.step_duration = r.timeline.at(static_cast<std::size_t>(measured_step - 1)).step_duration;
    return tc;
  });
  return out;
}

CsvTable to_table(const TransferResult& result) {
  CsvTable t;
  t.columns = {"kind", "mode", "event_at", "tokens_in_step", "step_duration"};
  for (const auto& c : result.cases) {
    t.add_row({c.kind, c.mode, fmt_double(c.event_at), fmt_int(c.tokens_in_step),
               fmt_double(c.step_duration)});
  }
  return t;
}

// ---------------------------------------------------------------- length sweep

double LengthPoint::relative_throughput() const {
  return colocated_throughput > 0 ? hybrid_throughput / colocated_throughput : 0;
}

double LengthPoint::relative_cost_efficiency() const {
  return colocated_tokens_per_dollar > 0
             ? hybrid_tokens_per_dollar / colocated_tokens_per_dollar
             : 0;
}

LengthResult run_length_sweep(const SimConfig& base, std::int32_t instances,
                              const std::vector<std::int32_t>& max_lengths,
                              std::int32_t jobs) {
  LengthResult out;
  out.instances = instances;
  const auto pool = static_pool_trace(instances);
  const auto runs =
      parallel_map<ExperimentResult>(2 * max_lengths.size(), jobs, [&](std::size_t i) {
        SimConfig c = base;
        c.record_events = false;
        c.lengths.max_response_len = max_lengths[i / 2];
        c.mode = i % 2 == 0 ? SimMode::kColocated : SimMode::kHybrid;
        return run_experiment(c, c.mode == SimMode::kHybrid ? pool
                                                            : std::vector<TraceEvent>{});
      });
  for (std::size_t k = 0; k < max_lengths.size(); ++k) {
    LengthPoint p;
    p.max_response_len = max_lengths[k];
    p.colocated_throughput = steady_throughput(runs[2 * k]);
    p.hybrid_throughput = steady_throughput(runs[2 * k + 1]);
    p.colocated_tokens_per_dollar = runs[2 * k].cost.tokens_per_dollar;
    p.hybrid_tokens_per_dollar = runs[2 * k + 1].cost.tokens_per_dollar;
    p.mean_cap = steady_mean(runs[2 * k + 1], [](const StepStats& s) { return s.n_bar_prem; });
    out.points.push_back(p);
  }
  return out;
}

CsvTable to_table(const LengthResult& result) {
  CsvTable t;
  t.columns = {"max_response_len", "colocated_throughput", "hybrid_throughput",
               "relative_throughput", "relative_cost_efficiency", "instances_used"};
  for (const auto& p : result.points) {
    t.add_row({fmt_int(p.max_response_len), fmt_double(p.colocated_throughput),
               fmt_double(p.hybrid_throughput), fmt_double(p.relative_throughput()),
               fmt_double(p.relative_cost_efficiency()), fmt_double(p.mean_cap)});
  }
  return t;
}

// ---------------------------------------------------------------- segments

std::vector<ComparisonRow> compare_modes(const SimConfig& base,
                                         const std::vector<TraceEvent>& trace,
                                         const std::vector<SimMode>& modes,
                                         Seconds duration, std::int32_t jobs) {
  return parallel_map<ComparisonRow>(modes.size(), jobs, [&](std::size_t i) {
    SimConfig c = unbounded(base, duration);
    c.mode = modes[i];
    c.record_events = false;
    const auto r = run_experiment(c, trace);
    ComparisonRow row;
    row.mode = to_string(modes[i]);
    row.avg_throughput = r.avg_throughput();
    row.tokens_per_dollar = r.cost.tokens_per_dollar;
    row.total_dollars = r.cost.total_dollars;
    row.steps = static_cast<std::int64_t>(r.timeline.size());
    return row;
  });
}

}  // namespace spotrl
