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

// spotrl command-line front end. Everything goes through the C API.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>

#include "spotrl/spotrl.h"

namespace {

struct Failure {
  int code;
};

void check(spotrl_status status, const char* what) {
  if (status == SPOTRL_OK) return;
  std::fprintf(stderr, "spotrl: %s: %s\n", what, spotrl_last_error());
  throw Failure{status == SPOTRL_ERR_INVALID_ARGUMENT || status == SPOTRL_ERR_PARSE ? 2 : 1};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<spotrl_config, Deleter<spotrl_config, spotrl_config_free>>;
using TracePtr = std::unique_ptr<spotrl_trace, Deleter<spotrl_trace, spotrl_trace_free>>;
using ExperimentPtr =
    std::unique_ptr<spotrl_experiment, Deleter<spotrl_experiment, spotrl_experiment_free>>;

std::string take(char* text) {
  std::string out = text == nullptr ? "" : text;
  spotrl_string_free(text);
  return out;
}

struct CommonOptions {
  std::string config;
  std::string mode;
  std::string seed;
  std::string steps;
  std::string duration;
  std::string out = "spotrl-out";
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "INI experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--mode", o.mode, "hybrid, colocated or disagg")
      ->check(CLI::IsMember({"hybrid", "colocated", "disagg", "disagg-balanced"}));
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--steps", o.steps, "maximum number of RL steps");
  cmd->add_option("--duration", o.duration, "stop at the first step boundary after this many seconds");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--jobs", o.jobs, "worker threads for multi-run scenarios")
      ->check(CLI::PositiveNumber);
}

ConfigPtr build_config(const CommonOptions& o) {
  spotrl_config* raw = nullptr;
  if (o.config.empty()) {
    check(spotrl_config_new(&raw), "config");
  } else {
    check(spotrl_config_load(o.config.c_str(), &raw), o.config.c_str());
  }
  ConfigPtr config(raw);
  auto set = [&](const char* key, const std::string& value) {
    if (!value.empty()) check(spotrl_config_set(config.get(), key, value.c_str()), key);
  };
  set("experiment.mode", o.mode);
  set("experiment.seed", o.seed);
  set("experiment.max_steps", o.steps);
  set("experiment.max_duration", o.duration);
  return config;
}

int cmd_run(const CommonOptions& o, const std::string& trace_path) {
  auto config = build_config(o);
  TracePtr trace;
  if (!trace_path.empty()) {
    spotrl_trace* raw = nullptr;
    check(spotrl_trace_load(trace_path.c_str(), &raw), trace_path.c_str());
    trace.reset(raw);
  }
  spotrl_experiment* raw = nullptr;
  check(spotrl_experiment_run(config.get(), trace.get(), &raw), "run");
  ExperimentPtr experiment(raw);
  check(spotrl_experiment_write(experiment.get(), o.out.c_str()), o.out.c_str());
  spotrl_run_summary s{};
  check(spotrl_experiment_summary(experiment.get(), &s), "summary");
  std::printf("steps               %lld\n", static_cast<long long>(s.steps));
  std::printf("simulated time      %.1f s\n", s.end_time);
  std::printf("avg throughput      %.1f tokens/s\n", s.avg_throughput);
  std::printf("tokens per dollar   %.0f\n", s.tokens_per_dollar);
  std::printf("cost                $%.2f (reserved %.2f, preemptible %.2f)\n",
              s.total_dollars, s.reserved_dollars, s.preemptible_dollars);
  std::printf("instances used      %.2f of %.2f allocated\n", s.mean_instances_used,
              s.mean_instances_allocated);
  std::printf("outputs             %s/{timeline.csv,events.jsonl,summary.json,config.ini}\n",
              o.out.c_str());
  return 0;
}

int cmd_ablate(CommonOptions o, const std::string& scenario, int max_instances, int instances) {
  if (o.out == "spotrl-out") o.out += "/" + scenario;
  auto config = build_config(o);
  spotrl_ablation_options options;
  spotrl_ablation_options_default(&options);
  options.jobs = o.jobs;
  if (max_instances >= 0) options.max_instances = max_instances;
  if (instances >= 0) options.instances = instances;
  char* report = nullptr;
  check(spotrl_ablate(config.get(), scenario.c_str(), &options, o.out.c_str(), &report),
        scenario.c_str());
  std::printf("%s%s\n", take(report).c_str(), ("csv written to " + o.out).c_str());
  return 0;
}

int cmd_summarize(const std::string& path, double duration) {
  spotrl_trace* raw = nullptr;
  check(spotrl_trace_load(path.c_str(), &raw), path.c_str());
  TracePtr trace(raw);
  spotrl_trace_summary s{};
  check(spotrl_trace_summarize(trace.get(), duration, &s), "summarize");
  std::printf("{\"avg_instances\": %.4f, \"initial_instances\": %lld, \"allocations\": %lld, "
              "\"preemptions\": %lld, \"peak_instances\": %lld, \"duration\": %.1f}\n",
              s.avg_instances, static_cast<long long>(s.initial_instances),
              static_cast<long long>(s.allocations), static_cast<long long>(s.preemptions),
              static_cast<long long>(s.peak_instances), s.duration);
  return 0;
}

int cmd_synthesize(const spotrl_synthesis_params& p, std::uint64_t seed, const std::string& out) {
  spotrl_trace* raw = nullptr;
  check(spotrl_trace_synthesize(&p, seed, &raw), "synthesize");
  TracePtr trace(raw);
  if (out.empty() || out == "-") {
    char* text = nullptr;
    check(spotrl_trace_serialize(trace.get(), &text), "serialize");
    std::fputs(take(text).c_str(), stdout);
  } else {
    check(spotrl_trace_save(trace.get(), out.c_str()), out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* level = std::getenv("SPOTRL_LOG_LEVEL")) {
    if (spotrl_set_log_level(level) != SPOTRL_OK) {
      std::fprintf(stderr, "spotrl: %s\n", spotrl_last_error());
      return 2;
    }
  } else {
    spotrl_set_log_level("warn");
  }

  CLI::App app{"Hybrid RL rollout simulator over preemptible instances"};
  app.set_version_flag("--version", spotrl_version());
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string trace_path;
  auto* run = app.add_subcommand("run", "run one experiment and write its reports");
  add_common(run, run_opts);
  run->add_option("--trace", trace_path, "availability trace (.trace.jsonl)")
      ->check(CLI::ExistingFile);

  CommonOptions ablate_opts;
  std::string scenario;
  int max_instances = -1;
  int instances = -1;
  auto* ablate = app.add_subcommand("ablate", "run a canned ablation scenario");
  ablate->add_option("scenario", scenario, "seeding, weight-transfer, fault-handling, scaling, length-sweep")
      ->required();
  add_common(ablate, ablate_opts);
  ablate->add_option("--max-instances", max_instances, "scaling: largest pool in the sweep");
  ablate->add_option("--instances", instances, "fault-handling / length-sweep: pool size");

  std::string summarize_path;
  double summarize_duration = -1;
  auto* summarize = app.add_subcommand("summarize-trace", "print availability statistics");
  summarize->add_option("trace", summarize_path, "trace file")->required()->check(CLI::ExistingFile);
  summarize->add_option("--duration", summarize_duration, "window length (default: last event)");

  spotrl_synthesis_params synth;
  spotrl_synthesis_params_default(&synth);
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  auto* synthesize = app.add_subcommand("synthesize-trace", "generate a synthetic trace");
  synthesize->add_option("--mean-up", synth.mean_up, "mean up period (s)");
  synthesize->add_option("--mean-down", synth.mean_down, "mean down period (s)");
  synthesize->add_option("--max-instances", synth.max_instances, "instance slots");
  synthesize->add_option("--duration", synth.duration, "trace length (s)");
  synthesize->add_option("--replacement-prob", synth.replacement_prob,
                         "chance a preemption is replaced at the same instant");
  synthesize->add_option("--seed", synth_seed, "random seed");
  synthesize->add_option("--out", synth_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts, trace_path);
    if (*ablate) return cmd_ablate(ablate_opts, scenario, max_instances, instances);
    if (*summarize) return cmd_summarize(summarize_path, summarize_duration);
    if (*synthesize) return cmd_synthesize(synth, synth_seed, synth_out);
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
