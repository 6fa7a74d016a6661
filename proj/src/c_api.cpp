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

#include "spotrl/spotrl.h"

#include <spdlog/spdlog.h>

#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>

#include "cluster_sim.h"
#include "config.h"
#include "report.h"
#include "traces.h"

struct spotrl_config {
  spotrl::SimConfig value;
};

struct spotrl_trace {
  std::vector<spotrl::TraceEvent> events;
};

struct spotrl_experiment {
  spotrl::SimConfig config;
  std::vector<spotrl::TraceEvent> trace;
  spotrl::ExperimentResult result;
};

namespace {

thread_local std::string last_error;

spotrl_status status_of(spotrl::Error::Kind kind) {
  switch (kind) {
    case spotrl::Error::Kind::kInvalidArgument: return SPOTRL_ERR_INVALID_ARGUMENT;
    case spotrl::Error::Kind::kParse: return SPOTRL_ERR_PARSE;
    case spotrl::Error::Kind::kIo: return SPOTRL_ERR_IO;
    case spotrl::Error::Kind::kSimulation: return SPOTRL_ERR_SIMULATION;
    case spotrl::Error::Kind::kInternal: return SPOTRL_ERR_INTERNAL;
  }
  return SPOTRL_ERR_INTERNAL;
}

spotrl_status fail(spotrl_status status, const std::string& what) {
  last_error = what;
  return status;
}

// Runs fn, mapping every exception to a status code.
template <typename F>
spotrl_status guarded(F&& fn) {
  try {
    fn();
    return SPOTRL_OK;
  } catch (const spotrl::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SPOTRL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SPOTRL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SPOTRL_ERR_INTERNAL, "unknown error");
  }
}

#define SPOTRL_REQUIRE(ptr)                                                   \
  do {                                                                        \
    if ((ptr) == nullptr) {                                                   \
      return fail(SPOTRL_ERR_INVALID_ARGUMENT, #ptr " must not be NULL");     \
    }                                                                         \
  } while (0)

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* spotrl_version(void) { return "0.1.0"; }

const char* spotrl_last_error(void) { return last_error.c_str(); }

const char* spotrl_status_name(spotrl_status status) {
  switch (status) {
    case SPOTRL_OK: return "ok";
    case SPOTRL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SPOTRL_ERR_PARSE: return "parse error";
    case SPOTRL_ERR_IO: return "i/o error";
    case SPOTRL_ERR_SIMULATION: return "simulation error";
    case SPOTRL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void spotrl_string_free(char* text) { delete[] text; }

spotrl_status spotrl_set_log_level(const char* level) {
  SPOTRL_REQUIRE(level);
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && std::strcmp(level, "off") != 0) {
    return fail(SPOTRL_ERR_INVALID_ARGUMENT, std::string("unknown log level '") + level + "'");
  }
  spdlog::set_level(parsed);
  return SPOTRL_OK;
}

// ---------------------------------------------------------------- config

spotrl_status spotrl_config_new(spotrl_config** out) {
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = new spotrl_config{}; });
}

spotrl_status spotrl_config_load(const char* path, spotrl_config** out) {
  SPOTRL_REQUIRE(path);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = new spotrl_config{spotrl::load_config(path)}; });
}

spotrl_status spotrl_config_parse(const char* text, spotrl_config** out) {
  SPOTRL_REQUIRE(text);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = new spotrl_config{spotrl::parse_config_string(text)}; });
}

spotrl_status spotrl_config_clone(const spotrl_config* config, spotrl_config** out) {
  SPOTRL_REQUIRE(config);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = new spotrl_config{config->value}; });
}

spotrl_status spotrl_config_set(spotrl_config* config, const char* key, const char* value) {
  SPOTRL_REQUIRE(config);
  SPOTRL_REQUIRE(key);
  SPOTRL_REQUIRE(value);
  return guarded([&] {
    const std::string k = key;
    const auto dot = k.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == k.size()) {
      throw spotrl::Error("config key must be section.key, got '" + k + "'");
    }
    const std::string v = value;
    if (v.find('\n') != std::string::npos) throw spotrl::Error("config value spans lines");
    std::ostringstream text;
    text << '[' << k.substr(0, dot) << "]\n" << k.substr(dot + 1) << " = " << v << '\n';
    config->value = spotrl::parse_config_string(text.str(), config->value);
  });
}

spotrl_status spotrl_config_set_mode(spotrl_config* config, spotrl_mode mode) {
  SPOTRL_REQUIRE(config);
  switch (mode) {
    case SPOTRL_MODE_HYBRID: config->value.mode = spotrl::SimMode::kHybrid; break;
    case SPOTRL_MODE_COLOCATED: config->value.mode = spotrl::SimMode::kColocated; break;
    case SPOTRL_MODE_DISAGG: config->value.mode = spotrl::SimMode::kDisaggBalanced; break;
    default: return fail(SPOTRL_ERR_INVALID_ARGUMENT, "unknown mode");
  }
  return SPOTRL_OK;
}

spotrl_status spotrl_config_set_seed(spotrl_config* config, uint64_t seed) {
  SPOTRL_REQUIRE(config);
  config->value.seed = seed;
  return SPOTRL_OK;
}

spotrl_status spotrl_config_set_max_steps(spotrl_config* config, int64_t max_steps) {
  SPOTRL_REQUIRE(config);
  if (max_steps < 1) return fail(SPOTRL_ERR_INVALID_ARGUMENT, "max_steps must be >= 1");
  config->value.max_steps = max_steps;
  return SPOTRL_OK;
}

spotrl_status spotrl_config_write(const spotrl_config* config, char** out) {
  SPOTRL_REQUIRE(config);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = copy_string(spotrl::write_config(config->value)); });
}

void spotrl_config_free(spotrl_config* config) { delete config; }

// ---------------------------------------------------------------- traces

spotrl_status spotrl_trace_new(spotrl_trace** out) {
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = new spotrl_trace{}; });
}

spotrl_status spotrl_trace_load(const char* path, spotrl_trace** out) {
  SPOTRL_REQUIRE(path);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = new spotrl_trace{spotrl::load_trace(path)}; });
}

spotrl_status spotrl_trace_parse(const char* text, spotrl_trace** out) {
  SPOTRL_REQUIRE(text);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = new spotrl_trace{spotrl::parse_trace_string(text)}; });
}

void spotrl_synthesis_params_default(spotrl_synthesis_params* out) {
  if (out == nullptr) return;
  const spotrl::SynthesisParams p;
  out->mean_up = p.mean_up;
  out->mean_down = p.mean_down;
  out->max_instances = p.max_instances;
  out->duration = p.duration;
  out->replacement_prob = p.replacement_prob;
}

spotrl_status spotrl_trace_synthesize(const spotrl_synthesis_params* params, uint64_t seed,
                                      spotrl_trace** out) {
  SPOTRL_REQUIRE(params);
  SPOTRL_REQUIRE(out);
  return guarded([&] {
    spotrl::SynthesisParams p;
    p.mean_up = params->mean_up;
    p.mean_down = params->mean_down;
    p.max_instances = params->max_instances;
    p.duration = params->duration;
    p.replacement_prob = params->replacement_prob;
    *out = new spotrl_trace{spotrl::synthesize(p, seed)};
  });
}

spotrl_status spotrl_trace_append(spotrl_trace* trace, double at, int kind,
                                  const char* instance_id) {
  SPOTRL_REQUIRE(trace);
  SPOTRL_REQUIRE(instance_id);
  if (kind != 0 && kind != 1) return fail(SPOTRL_ERR_INVALID_ARGUMENT, "kind must be 0 or 1");
  return guarded([&] {
    auto events = trace->events;
    events.push_back({at, kind == 0 ? spotrl::TraceKind::kAllocate : spotrl::TraceKind::kPreempt,
                      instance_id});
    spotrl::validate_trace(events);
    trace->events = std::move(events);
  });
}

size_t spotrl_trace_size(const spotrl_trace* trace) {
  return trace == nullptr ? 0 : trace->events.size();
}

spotrl_status spotrl_trace_save(const spotrl_trace* trace, const char* path) {
  SPOTRL_REQUIRE(trace);
  SPOTRL_REQUIRE(path);
  return guarded([&] { spotrl::write_trace(path, trace->events); });
}

spotrl_status spotrl_trace_serialize(const spotrl_trace* trace, char** out) {
  SPOTRL_REQUIRE(trace);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = copy_string(spotrl::serialize_trace(trace->events)); });
}

spotrl_status spotrl_trace_summarize(const spotrl_trace* trace, double duration,
                                     spotrl_trace_summary* out) {
  SPOTRL_REQUIRE(trace);
  SPOTRL_REQUIRE(out);
  return guarded([&] {
    const auto s = duration < 0 ? spotrl::summarize(trace->events)
                                : spotrl::summarize(trace->events, duration);
    out->avg_instances = s.avg_instances;
    out->initial_instances = s.initial_instances;
    out->allocations = s.allocations;
    out->preemptions = s.preemptions;
    out->duration = s.duration;
    out->peak_instances = s.peak_instances;
  });
}

void spotrl_trace_free(spotrl_trace* trace) { delete trace; }

// ---------------------------------------------------------------- experiments

spotrl_status spotrl_experiment_run(const spotrl_config* config, const spotrl_trace* trace,
                                    spotrl_experiment** out) {
  SPOTRL_REQUIRE(config);
  SPOTRL_REQUIRE(out);
  return guarded([&] {
    auto e = std::make_unique<spotrl_experiment>();
    e->config = config->value;
    if (trace != nullptr) e->trace = trace->events;
    e->result = spotrl::run_experiment(e->config, e->trace);
    *out = e.release();
  });
}

spotrl_status spotrl_experiment_summary(const spotrl_experiment* experiment,
                                        spotrl_run_summary* out) {
  SPOTRL_REQUIRE(experiment);
  SPOTRL_REQUIRE(out);
  return guarded([&] {
    const auto s = spotrl::summarize_run(experiment->config, experiment->trace,
                                         experiment->result);
    out->steps = s.steps;
    out->end_time = s.end_time;
    out->avg_throughput = s.avg_throughput;
    out->mean_step_throughput = s.mean_step_throughput;
    out->tokens_trained = s.tokens_trained;
    out->tokens_per_dollar = s.tokens_per_dollar;
    out->total_dollars = s.total_dollars;
    out->reserved_dollars = s.reserved_dollars;
    out->preemptible_dollars = s.preemptible_dollars;
    out->mean_instances_used = s.mean_instances_used;
    out->mean_instances_allocated = s.mean_instances_allocated;
    out->deferred_allocations = s.deferred_allocations;
    out->migrations = s.migrations;
  });
}

size_t spotrl_experiment_step_count(const spotrl_experiment* experiment) {
  return experiment == nullptr ? 0 : experiment->result.timeline.size();
}

spotrl_status spotrl_experiment_step(const spotrl_experiment* experiment, size_t index,
                                     spotrl_step_stats* out) {
  SPOTRL_REQUIRE(experiment);
  SPOTRL_REQUIRE(out);
  if (index >= experiment->result.timeline.size()) {
    return fail(SPOTRL_ERR_INVALID_ARGUMENT, "step index out of range");
  }
  const auto& s = experiment->result.timeline[index];
  out->step_index = s.step_index;
  out->started_at = s.started_at;
  out->step_duration = s.step_duration;
  out->t_wait_train = s.t_wait_train;
  out->t_wait_remote = s.t_wait_remote;
  out->t_train = s.t_train;
  out->t_remote = s.t_remote;
  out->n_bar_prem = s.n_bar_prem;
  out->n_hat_prem = s.n_hat_prem;
  out->t_seed = s.t_seed_used;
  out->n_prem_cap = s.n_prem_cap_used;
  out->rollout_time = s.rollout_time;
  out->tokens_generated = s.tokens_generated;
  out->tokens_trained = s.tokens_trained;
  out->migrations = s.migrations;
  out->throughput = spotrl::compute_throughput(s).trained_only;
  return SPOTRL_OK;
}

spotrl_status spotrl_experiment_summary_json(const spotrl_experiment* experiment, char** out) {
  SPOTRL_REQUIRE(experiment);
  SPOTRL_REQUIRE(out);
  return guarded([&] {
    *out = copy_string(spotrl::to_json(
        spotrl::summarize_run(experiment->config, experiment->trace, experiment->result)));
  });
}

spotrl_status spotrl_experiment_events_jsonl(const spotrl_experiment* experiment, char** out) {
  SPOTRL_REQUIRE(experiment);
  SPOTRL_REQUIRE(out);
  return guarded([&] { *out = copy_string(experiment->result.events.to_jsonl()); });
}

spotrl_status spotrl_experiment_write(const spotrl_experiment* experiment, const char* out_dir) {
  SPOTRL_REQUIRE(experiment);
  SPOTRL_REQUIRE(out_dir);
  return guarded([&] {
    spotrl::write_run_outputs(out_dir, experiment->config, experiment->trace,
                              experiment->result);
  });
}

void spotrl_experiment_free(spotrl_experiment* experiment) { delete experiment; }

// ---------------------------------------------------------------- ablations

void spotrl_ablation_options_default(spotrl_ablation_options* out) {
  if (out == nullptr) return;
  const spotrl::AblationOptions o;
  out->jobs = o.jobs;
  out->max_instances = o.max_instances;
  out->instances = o.instances;
}

size_t spotrl_ablation_count(void) { return spotrl::ablation_names().size(); }

const char* spotrl_ablation_name(size_t index) {
  const auto& names = spotrl::ablation_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

spotrl_status spotrl_ablate(const spotrl_config* base, const char* scenario,
                            const spotrl_ablation_options* options, const char* out_dir,
                            char** report) {
  SPOTRL_REQUIRE(base);
  SPOTRL_REQUIRE(scenario);
  SPOTRL_REQUIRE(out_dir);
  return guarded([&] {
    spotrl::AblationOptions o;
    if (options != nullptr) {
      if (options->jobs < 1 || options->max_instances < 0 || options->instances < 2) {
        throw spotrl::Error("ablation options out of range");
      }
      o.jobs = options->jobs;
      o.max_instances = options->max_instances;
      o.instances = options->instances;
    }
    const std::string text = spotrl::run_ablation(scenario, base->value, o, out_dir);
    if (report != nullptr) *report = copy_string(text);
  });
}

}  // extern "C"
