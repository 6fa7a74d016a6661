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

/* C interface to the spotrl simulator and trace tooling.
 *
 * Objects are opaque handles created by *_new / *_load / *_run functions and
 * released with the matching *_free. Every fallible call returns a
 * spotrl_status; on failure spotrl_last_error() describes the problem for the
 * calling thread until its next failing call. Output pointers are written
 * only on success. Strings returned through char** are owned by the caller and
 * released with spotrl_string_free.
 *
 * Handles are not synchronized: use one handle from one thread at a time.
 * Distinct handles may be used concurrently.
 */

#ifndef SPOTRL_SPOTRL_H_
#define SPOTRL_SPOTRL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SPOTRL_API __declspec(dllexport)
#else
#define SPOTRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spotrl_status {
  SPOTRL_OK = 0,
  SPOTRL_ERR_INVALID_ARGUMENT = 1,
  SPOTRL_ERR_PARSE = 2,
  SPOTRL_ERR_IO = 3,
  SPOTRL_ERR_SIMULATION = 4,
  SPOTRL_ERR_INTERNAL = 5,
} spotrl_status;

typedef enum spotrl_mode {
  SPOTRL_MODE_HYBRID = 0,
  SPOTRL_MODE_COLOCATED = 1,
  SPOTRL_MODE_DISAGG = 2,
} spotrl_mode;

typedef struct spotrl_config spotrl_config;
typedef struct spotrl_trace spotrl_trace;
typedef struct spotrl_experiment spotrl_experiment;

SPOTRL_API const char* spotrl_version(void);
SPOTRL_API const char* spotrl_last_error(void);
SPOTRL_API const char* spotrl_status_name(spotrl_status status);
SPOTRL_API void spotrl_string_free(char* text);
/* trace, debug, info, warn, error, critical or off. */
SPOTRL_API spotrl_status spotrl_set_log_level(const char* level);

/* ---------------------------------------------------------------- config */

SPOTRL_API spotrl_status spotrl_config_new(spotrl_config** out);
/* INI file / text; keys not present keep their defaults. */
SPOTRL_API spotrl_status spotrl_config_load(const char* path, spotrl_config** out);
SPOTRL_API spotrl_status spotrl_config_parse(const char* text, spotrl_config** out);
SPOTRL_API spotrl_status spotrl_config_clone(const spotrl_config* config,
                                             spotrl_config** out);
/* key is "section.key", e.g. "experiment.seed". The value is validated
 * together with the rest of the config. */
SPOTRL_API spotrl_status spotrl_config_set(spotrl_config* config, const char* key,
                                           const char* value);
SPOTRL_API spotrl_status spotrl_config_set_mode(spotrl_config* config, spotrl_mode mode);
SPOTRL_API spotrl_status spotrl_config_set_seed(spotrl_config* config, uint64_t seed);
SPOTRL_API spotrl_status spotrl_config_set_max_steps(spotrl_config* config,
                                                     int64_t max_steps);
/* Effective config in INI form. */
SPOTRL_API spotrl_status spotrl_config_write(const spotrl_config* config, char** out);
SPOTRL_API void spotrl_config_free(spotrl_config* config);

/* ---------------------------------------------------------------- traces */

typedef struct spotrl_trace_summary {
  double avg_instances;
  int64_t initial_instances;
  int64_t allocations;
  int64_t preemptions;
  double duration;
  int64_t peak_instances;
} spotrl_trace_summary;

typedef struct spotrl_synthesis_params {
  double mean_up;
  double mean_down;
  int32_t max_instances;
  double duration;
  double replacement_prob;
} spotrl_synthesis_params;

SPOTRL_API spotrl_status spotrl_trace_new(spotrl_trace** out);
SPOTRL_API spotrl_status spotrl_trace_load(const char* path, spotrl_trace** out);
SPOTRL_API spotrl_status spotrl_trace_parse(const char* text, spotrl_trace** out);
SPOTRL_API void spotrl_synthesis_params_default(spotrl_synthesis_params* out);
SPOTRL_API spotrl_status spotrl_trace_synthesize(const spotrl_synthesis_params* params,
                                                 uint64_t seed, spotrl_trace** out);
/* kind: 0 allocate, 1 preempt. Events must keep the trace valid. */
SPOTRL_API spotrl_status spotrl_trace_append(spotrl_trace* trace, double at, int kind,
                                             const char* instance_id);
SPOTRL_API size_t spotrl_trace_size(const spotrl_trace* trace);
SPOTRL_API spotrl_status spotrl_trace_save(const spotrl_trace* trace, const char* path);
SPOTRL_API spotrl_status spotrl_trace_serialize(const spotrl_trace* trace, char** out);
/* duration < 0 uses the last event time. */
SPOTRL_API spotrl_status spotrl_trace_summarize(const spotrl_trace* trace, double duration,
                                                spotrl_trace_summary* out);
SPOTRL_API void spotrl_trace_free(spotrl_trace* trace);

/* ---------------------------------------------------------------- experiments */

typedef struct spotrl_step_stats {
  int64_t step_index;
  double started_at;
  double step_duration;
  double t_wait_train;
  double t_wait_remote;
  double t_train;
  double t_remote;
  double n_bar_prem;
  int32_t n_hat_prem;
  double t_seed;
  double n_prem_cap;
  double rollout_time;
  int64_t tokens_generated;
  int64_t tokens_trained;
  int64_t migrations;
  double throughput;
} spotrl_step_stats;

typedef struct spotrl_run_summary {
  int64_t steps;
  double end_time;
  double avg_throughput;
  double mean_step_throughput;
  int64_t tokens_trained;
  double tokens_per_dollar;
  double total_dollars;
  double reserved_dollars;
  double preemptible_dollars;
  double mean_instances_used;
  double mean_instances_allocated;
  int64_t deferred_allocations;
  int64_t migrations;
} spotrl_run_summary;

/* trace may be NULL (no preemptible capacity). */
SPOTRL_API spotrl_status spotrl_experiment_run(const spotrl_config* config,
                                               const spotrl_trace* trace,
                                               spotrl_experiment** out);
SPOTRL_API spotrl_status spotrl_experiment_summary(const spotrl_experiment* experiment,
                                                   spotrl_run_summary* out);
SPOTRL_API size_t spotrl_experiment_step_count(const spotrl_experiment* experiment);
SPOTRL_API spotrl_status spotrl_experiment_step(const spotrl_experiment* experiment,
                                                size_t index, spotrl_step_stats* out);
SPOTRL_API spotrl_status spotrl_experiment_summary_json(const spotrl_experiment* experiment,
                                                        char** out);
SPOTRL_API spotrl_status spotrl_experiment_events_jsonl(const spotrl_experiment* experiment,
                                                        char** out);
/* Writes timeline.csv, events.jsonl, summary.json and config.ini. */
SPOTRL_API spotrl_status spotrl_experiment_write(const spotrl_experiment* experiment,
                                                 const char* out_dir);
SPOTRL_API void spotrl_experiment_free(spotrl_experiment* experiment);

/* ---------------------------------------------------------------- ablations */

typedef struct spotrl_ablation_options {
  int32_t jobs;
  int32_t max_instances;
  int32_t instances;
} spotrl_ablation_options;

SPOTRL_API void spotrl_ablation_options_default(spotrl_ablation_options* out);
/* Number of canned scenarios and their names. */
SPOTRL_API size_t spotrl_ablation_count(void);
SPOTRL_API const char* spotrl_ablation_name(size_t index);
/* Runs a canned scenario and writes its CSV files to out_dir. report, if not
 * NULL, receives a short text summary. */
SPOTRL_API spotrl_status spotrl_ablate(const spotrl_config* base, const char* scenario,
                                       const spotrl_ablation_options* options,
                                       const char* out_dir, char** report);

#ifdef __cplusplus
}
#endif

#endif /* SPOTRL_SPOTRL_H_ */
