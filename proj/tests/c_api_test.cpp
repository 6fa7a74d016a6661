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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <spotrl/spotrl.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace {

std::string take(char* text) {
  std::string out = text == nullptr ? "" : text;
  spotrl_string_free(text);
  return out;
}

spotrl_config* small_config(int64_t steps = 3) {
  spotrl_config* c = nullptr;
  REQUIRE(spotrl_config_new(&c) == SPOTRL_OK);
  REQUIRE(spotrl_config_set(c, "rollout.prompt_count", "32") == SPOTRL_OK);
  REQUIRE(spotrl_config_set_max_steps(c, steps) == SPOTRL_OK);
  return c;
}

spotrl_trace* pool(int n) {
  spotrl_trace* t = nullptr;
  REQUIRE(spotrl_trace_new(&t) == SPOTRL_OK);
  for (int k = 0; k < n; ++k) {
    const std::string id = "spot-" + std::to_string(k);
    REQUIRE(spotrl_trace_append(t, 0, 0, id.c_str()) == SPOTRL_OK);
  }
  return t;
}

TEST_CASE("version and status names") {
  CHECK(std::string(spotrl_version()) == "0.1.0");
  CHECK(std::string(spotrl_status_name(SPOTRL_OK)) == "ok");
  CHECK(std::string(spotrl_status_name(SPOTRL_ERR_PARSE)) == "parse error");
  CHECK(spotrl_set_log_level("warn") == SPOTRL_OK);
  CHECK(spotrl_set_log_level("loud") == SPOTRL_ERR_INVALID_ARGUMENT);
}

TEST_CASE("null arguments are rejected without touching outputs") {
  CHECK(spotrl_config_new(nullptr) == SPOTRL_ERR_INVALID_ARGUMENT);
  CHECK(std::string(spotrl_last_error()).size() > 0);
  spotrl_trace* t = reinterpret_cast<spotrl_trace*>(0x1);
  CHECK(spotrl_trace_parse(nullptr, &t) == SPOTRL_ERR_INVALID_ARGUMENT);
  CHECK(t == reinterpret_cast<spotrl_trace*>(0x1));
  CHECK(spotrl_trace_size(nullptr) == 0);
  spotrl_config_free(nullptr);
  spotrl_trace_free(nullptr);
  spotrl_experiment_free(nullptr);
  spotrl_string_free(nullptr);
}

TEST_CASE("config errors carry codes and messages") {
  spotrl_config* c = nullptr;
  REQUIRE(spotrl_config_new(&c) == SPOTRL_OK);
  CHECK(spotrl_config_set(c, "experiment.sede", "1") == SPOTRL_ERR_PARSE);
  CHECK(std::string(spotrl_last_error()).find("sede") != std::string::npos);
  CHECK(spotrl_config_set(c, "seed", "1") == SPOTRL_ERR_INVALID_ARGUMENT);
  CHECK(spotrl_config_set(c, "experiment.seed", "1\n[x]") == SPOTRL_ERR_INVALID_ARGUMENT);
  CHECK(spotrl_config_set(c, "rollout.prompt_count", "0") != SPOTRL_OK);
  CHECK(spotrl_config_set_mode(c, static_cast<spotrl_mode>(9)) == SPOTRL_ERR_INVALID_ARGUMENT);
  CHECK(spotrl_config_set(c, "experiment.seed", "42") == SPOTRL_OK);
  char* text = nullptr;
  REQUIRE(spotrl_config_write(c, &text) == SPOTRL_OK);
  const auto ini = take(text);
  CHECK(ini.find("seed = 42") != std::string::npos);
  spotrl_config* back = nullptr;
  REQUIRE(spotrl_config_parse(ini.c_str(), &back) == SPOTRL_OK);
  REQUIRE(spotrl_config_write(back, &text) == SPOTRL_OK);
  CHECK(take(text) == ini);
  spotrl_config* copy = nullptr;
  REQUIRE(spotrl_config_clone(c, &copy) == SPOTRL_OK);
  REQUIRE(spotrl_config_write(copy, &text) == SPOTRL_OK);
  CHECK(take(text) == ini);
  CHECK(spotrl_config_load("/nonexistent.ini", &copy) == SPOTRL_ERR_IO);
  spotrl_config_free(c);
  spotrl_config_free(back);
  spotrl_config_free(copy);
}

TEST_CASE("traces through the C interface") {
  spotrl_trace* t = pool(2);
  CHECK(spotrl_trace_append(t, 10, 1, "spot-0") == SPOTRL_OK);
  CHECK(spotrl_trace_append(t, 5, 1, "spot-1") == SPOTRL_ERR_PARSE);
  CHECK(spotrl_trace_append(t, 20, 1, "spot-0") == SPOTRL_ERR_PARSE);
  CHECK(spotrl_trace_append(t, 20, 3, "spot-0") == SPOTRL_ERR_INVALID_ARGUMENT);
  CHECK(spotrl_trace_size(t) == 3);
  spotrl_trace_summary s;
  REQUIRE(spotrl_trace_summarize(t, 20, &s) == SPOTRL_OK);
  CHECK(s.initial_instances == 2);
  CHECK(s.preemptions == 1);
  CHECK(s.avg_instances == doctest::Approx(1.5));
  REQUIRE(spotrl_trace_summarize(t, -1, &s) == SPOTRL_OK);
  CHECK(s.duration == 10);

  char* text = nullptr;
  REQUIRE(spotrl_trace_serialize(t, &text) == SPOTRL_OK);
  const auto jsonl = take(text);
  spotrl_trace* back = nullptr;
  REQUIRE(spotrl_trace_parse(jsonl.c_str(), &back) == SPOTRL_OK);
  CHECK(spotrl_trace_size(back) == 3);
  CHECK(spotrl_trace_parse("{\"at\":0}\n", &back) == SPOTRL_ERR_PARSE);

  const auto path = (std::filesystem::temp_directory_path() / "spotrl_c_api.jsonl").string();
  REQUIRE(spotrl_trace_save(t, path.c_str()) == SPOTRL_OK);
  spotrl_trace* loaded = nullptr;
  REQUIRE(spotrl_trace_load(path.c_str(), &loaded) == SPOTRL_OK);
  CHECK(spotrl_trace_size(loaded) == 3);
  std::filesystem::remove(path);
  CHECK(spotrl_trace_load(path.c_str(), &loaded) == SPOTRL_ERR_IO);

  spotrl_synthesis_params p;
  spotrl_synthesis_params_default(&p);
  CHECK(p.max_instances > 0);
  spotrl_trace* synth = nullptr;
  REQUIRE(spotrl_trace_synthesize(&p, 4, &synth) == SPOTRL_OK);
  CHECK(spotrl_trace_size(synth) > 0);
  p.mean_up = -1;
  CHECK(spotrl_trace_synthesize(&p, 4, &synth) == SPOTRL_ERR_INVALID_ARGUMENT);
  spotrl_trace_free(t);
  spotrl_trace_free(back);
  spotrl_trace_free(loaded);
  spotrl_trace_free(synth);
}

TEST_CASE("experiments run and report") {
  spotrl_config* c = small_config();
  spotrl_trace* t = pool(4);
  spotrl_experiment* e = nullptr;
  REQUIRE(spotrl_experiment_run(c, t, &e) == SPOTRL_OK);
  REQUIRE(spotrl_experiment_step_count(e) == 3);
  spotrl_run_summary s;
  REQUIRE(spotrl_experiment_summary(e, &s) == SPOTRL_OK);
  CHECK(s.steps == 3);
  int64_t trained = 0;
  for (size_t k = 0; k < 3; ++k) {
    spotrl_step_stats st;
    REQUIRE(spotrl_experiment_step(e, k, &st) == SPOTRL_OK);
    CHECK(st.step_index == static_cast<int64_t>(k) + 1);
    trained += st.tokens_trained;
  }
  CHECK(trained == s.tokens_trained);
  CHECK(s.total_dollars == doctest::Approx(s.reserved_dollars + s.preemptible_dollars));
  CHECK(s.tokens_per_dollar == doctest::Approx(s.tokens_trained / s.total_dollars));
  spotrl_step_stats st;
  CHECK(spotrl_experiment_step(e, 3, &st) == SPOTRL_ERR_INVALID_ARGUMENT);

  char* text = nullptr;
  REQUIRE(spotrl_experiment_summary_json(e, &text) == SPOTRL_OK);
  CHECK(take(text).find("\"tokens_per_dollar\"") != std::string::npos);
  REQUIRE(spotrl_experiment_events_jsonl(e, &text) == SPOTRL_OK);
  const auto events = take(text);
  CHECK(events.find("step_begin") != std::string::npos);

  spotrl_experiment* again = nullptr;
  REQUIRE(spotrl_experiment_run(c, t, &again) == SPOTRL_OK);
  REQUIRE(spotrl_experiment_events_jsonl(again, &text) == SPOTRL_OK);
  CHECK(take(text) == events);

  const auto dir = std::filesystem::temp_directory_path() / "spotrl_c_api_run";
  REQUIRE(spotrl_experiment_write(e, dir.string().c_str()) == SPOTRL_OK);
  for (const char* f : {"timeline.csv", "events.jsonl", "summary.json", "config.ini"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::filesystem::remove_all(dir);

  spotrl_experiment* empty = nullptr;
  REQUIRE(spotrl_experiment_run(c, nullptr, &empty) == SPOTRL_OK);
  REQUIRE(spotrl_experiment_summary(empty, &s) == SPOTRL_OK);
  CHECK(s.preemptible_dollars == 0);

  spotrl_experiment_free(e);
  spotrl_experiment_free(again);
  spotrl_experiment_free(empty);
  spotrl_trace_free(t);
  spotrl_config_free(c);
}

TEST_CASE("distinct handles run concurrently") {
  spotrl_config* c = small_config(2);
  std::vector<std::string> logs(4);
  std::vector<std::thread> pool_threads;
  for (int k = 0; k < 4; ++k) {
    pool_threads.emplace_back([&, k] {
      spotrl_config* mine = nullptr;
      spotrl_config_clone(c, &mine);
      spotrl_trace* t = pool(3);
      spotrl_experiment* e = nullptr;
      if (spotrl_experiment_run(mine, t, &e) == SPOTRL_OK) {
        char* text = nullptr;
        spotrl_experiment_events_jsonl(e, &text);
        logs[k] = take(text);
      }
      spotrl_experiment_free(e);
      spotrl_trace_free(t);
      spotrl_config_free(mine);
    });
  }
  for (auto& th : pool_threads) th.join();
  for (int k = 1; k < 4; ++k) CHECK(logs[k] == logs[0]);
  CHECK_FALSE(logs[0].empty());
  spotrl_config_free(c);
}

TEST_CASE("ablations are listed and validated") {
  CHECK(spotrl_ablation_count() == 5);
  for (size_t k = 0; k < spotrl_ablation_count(); ++k) CHECK(spotrl_ablation_name(k) != nullptr);
  CHECK(spotrl_ablation_name(99) == nullptr);
  spotrl_ablation_options o;
  spotrl_ablation_options_default(&o);
  CHECK(o.jobs >= 1);
  spotrl_config* c = small_config();
  const auto dir = (std::filesystem::temp_directory_path() / "spotrl_c_api_ablate").string();
  CHECK(spotrl_ablate(c, "no-such", &o, dir.c_str(), nullptr) == SPOTRL_ERR_INVALID_ARGUMENT);
  o.max_instances = 1;
  char* report = nullptr;
  REQUIRE(spotrl_ablate(c, "scaling", &o, dir.c_str(), &report) == SPOTRL_OK);
  CHECK_FALSE(take(report).empty());
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "scaling.csv"));
  std::filesystem::remove_all(dir);
  spotrl_config_free(c);
}

}  // namespace
