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

#include <cmath>
#include <random>
#include <sstream>

#include "cluster_sim.h"
#include "oracles.h"

#ifndef SPOTRL_DATA_DIR
#define SPOTRL_DATA_DIR "data"
#endif

namespace spotrl {
namespace {

std::vector<TraceEvent> segment_a() {
  return load_trace(std::string(SPOTRL_DATA_DIR) + "/traces/segment_a.trace.jsonl");
}

SimConfig small(SimMode mode, std::int64_t steps = 5) {
  SimConfig c;
  c.mode = mode;
  c.max_steps = steps;
  c.prompt_count = 32;
  return c;
}

std::string jsonl(const EventLog& log) {
  std::ostringstream out;
  log.write_jsonl(out);
  return out.str();
}

std::function<double(const std::string&)> rates(const SimConfig& c) {
  return [c](const std::string& id) {
    if (id.rfind("disagg-", 0) == 0) {
      return c.disagg_instance_rate ? *c.disagg_instance_rate : c.cost.reserved_rate / 4.0;
    }
    return c.cost.preemptible_rate;
  };
}

// Every decoded token either completes or is discarded, and each step trains
// exactly the tokens it drew.
void check_conservation(const ExperimentResult& r) {
  const auto t = oracle::token_ledger(r.events);
  REQUIRE(t.decoded.size() == r.timeline.size());
  for (std::size_t k = 0; k < t.decoded.size(); ++k) {
    CAPTURE(k);
    CHECK(t.decoded[k] == t.completed[k] + t.discarded[k]);
    CHECK(t.completed[k] == t.trained[k]);
    CHECK(t.trained[k] == r.step_target_tokens[k]);
    CHECK(r.timeline[k].tokens_trained == r.step_target_tokens[k]);
    CHECK(r.timeline[k].tokens_discarded == t.discarded[k]);
  }
}

void check_clean(const ExperimentResult& r) {
  const auto own = oracle::audit_ownership(r.events);
  CHECK_MESSAGE(own.violations == 0, own.first);
  std::int64_t responses = 0;
  for (const auto& s : r.timeline) responses += s.responses;
  CHECK(own.completions == responses);
  const auto ver = oracle::audit_versions(r.events);
  CHECK(ver.stale_tokens == 0);
  CHECK(ver.stale_routes == 0);
  CHECK(ver.tokens > 0);
}

TEST_CASE("identical inputs give byte-identical event logs") {
  const auto trace = segment_a();
  auto c = small(SimMode::kHybrid);
  const auto a = run_experiment(c, trace);
  const auto b = run_experiment(c, trace);
  CHECK(jsonl(a.events) == jsonl(b.events));
  CHECK(a.end_time == b.end_time);
  c.seed = 2;
  CHECK(jsonl(run_experiment(c, trace).events) != jsonl(a.events));
}

TEST_CASE("stepping the simulator equals a single run") {
  const auto trace = segment_a();
  const auto c = small(SimMode::kHybrid, 4);
  Simulator sim(c, trace);
  std::int64_t steps = 0;
  while (auto s = sim.run_step()) {
    CHECK(s->step_index == steps + 1);
    ++steps;
  }
  CHECK(sim.finished());
  CHECK(steps == 4);
  const auto stepped = sim.finish();
  CHECK(jsonl(stepped.events) == jsonl(run_experiment(c, trace).events));
}

TEST_CASE("an empty trace leaves all work on the reserved node") {
  const auto r = run_experiment(small(SimMode::kHybrid), {});
  REQUIRE(r.timeline.size() == 5);
  for (const auto& s : r.timeline) {
    CHECK(s.remote_tokens == 0);
    CHECK(s.local_tokens == s.tokens_generated);
    CHECK(s.n_hat_prem == 0);
  }
  CHECK(r.cost.preemptible_dollars == 0);
  check_conservation(r);
}

TEST_CASE("colocated mode ignores preemptible capacity") {
  const auto r = run_experiment(small(SimMode::kColocated), segment_a());
  for (const auto& s : r.timeline) CHECK(s.remote_tokens == 0);
  CHECK(r.cost.preemptible_dollars == 0);
  check_conservation(r);
}

TEST_CASE("hybrid runs conserve tokens and keep the log clean") {
  for (bool migrate : {true, false}) {
    for (bool pull : {true, false}) {
      CAPTURE(migrate);
      CAPTURE(pull);
      auto c = small(SimMode::kHybrid, 6);
      c.migrate_on_preempt = migrate;
      c.pull_mode = pull;
      c.audit = true;
      const auto r = run_experiment(c, segment_a());
      check_conservation(r);
      check_clean(r);
      std::int64_t remote = 0;
      for (const auto& s : r.timeline) remote += s.remote_tokens;
      CHECK(remote > 0);
    }
  }
}

TEST_CASE("fuzzed availability keeps conservation and ownership") {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 8; ++trial) {
    SynthesisParams p;
    p.mean_up = 300 + 600 * (trial % 3);
    p.mean_down = 200;
    p.max_instances = 4 + trial % 5;
    p.duration = 5000;
    p.replacement_prob = 0.2 * (trial % 2);
    auto c = small(SimMode::kHybrid, 5);
    c.seed = rng();
    c.audit = true;
    c.migrate_on_preempt = trial % 4 != 3;
    const auto r = run_experiment(c, synthesize(p, rng()));
    check_conservation(r);
    check_clean(r);
  }
}

TEST_CASE("dollar totals match the interval oracle") {
  for (auto mode : {SimMode::kHybrid, SimMode::kColocated, SimMode::kDisaggBalanced}) {
    CAPTURE(to_string(mode));
    const auto c = small(mode);
    const auto r = run_experiment(c, segment_a());
    const auto want = oracle::interval_cost(r.events, c.cost, rates(c));
    CHECK(r.cost.total_dollars == doctest::Approx(want.total_dollars).epsilon(1e-9));
    CHECK(r.cost.preemptible_dollars ==
          doctest::Approx(want.preemptible_dollars).epsilon(1e-9));
    CHECK(r.cost.tokens_trained == want.tokens_trained);
  }
}

TEST_CASE("step statistics agree with the event log") {
  const auto r = run_experiment(small(SimMode::kHybrid), segment_a());
  std::vector<const EventRecord*> begins, ends;
  for (const auto& e : r.events.records()) {
    if (e.type == EventType::kStepBegin) begins.push_back(&e);
    if (e.type == EventType::kStepEnd) ends.push_back(&e);
  }
  REQUIRE(begins.size() == r.timeline.size());
  REQUIRE(ends.size() == r.timeline.size());
  for (std::size_t k = 0; k < r.timeline.size(); ++k) {
    const auto& s = r.timeline[k];
    CHECK(s.step_index == static_cast<std::int64_t>(k) + 1);
    CHECK(s.started_at == begins[k]->at);
    CHECK(s.step_duration == doctest::Approx(ends[k]->at - begins[k]->at));
    CHECK(s.tokens_trained == ends[k]->value);
    CHECK(begins[k]->value == applied_cap(r.schedules[k].n_prem_cap));
    CHECK(s.t_seed_used == r.schedules[k].t_seed);
    if (k > 0) CHECK(s.started_at == doctest::Approx(ends[k - 1]->at));
  }
}

TEST_CASE("disaggregated mode uses a dedicated pool") {
  auto c = small(SimMode::kDisaggBalanced);
  const auto r = run_experiment(c, {});
  CHECK(r.disagg_pool == disagg_pool_size(c));
  CHECK(r.disagg_pool > 0);
  for (const auto& s : r.timeline) CHECK(s.local_tokens == 0);
  check_conservation(r);
  c.disagg_pool = 3;
  CHECK(run_experiment(c, {}).disagg_pool == 3);
}

TEST_CASE("duration budget stops at a step boundary") {
  auto c = small(SimMode::kHybrid, 1000);
  c.max_duration = 1500;
  const auto r = run_experiment(c, segment_a());
  REQUIRE_FALSE(r.timeline.empty());
  const auto& last = r.timeline.back();
  CHECK(last.started_at < 1500);
  CHECK(last.started_at + last.step_duration >= 1500);
}

TEST_CASE("config validation") {
  SimConfig c;
  c.prompt_count = 0;
  CHECK_THROWS(validate(c));
  c = SimConfig{};
  c.max_steps = 0;
  c.max_duration = 0;
  CHECK_THROWS(validate(c));
  c = SimConfig{};
  c.model_bytes = -1;
  CHECK_THROWS(run_experiment(c, {}));
  CHECK(parse_mode("disagg") == SimMode::kDisaggBalanced);
  CHECK_THROWS(parse_mode("nope"));
}

TEST_CASE("model estimates") {
  SimConfig c;
  CHECK(estimate_local_rollout_time(c) > 0);
  CHECK(estimate_train_time(c) > 0);
  CHECK(initial_seed_window(c) >= 0);
  auto more = c;
  more.prompt_count *= 2;
  CHECK(estimate_train_time(more) > estimate_train_time(c));
}

}  // namespace
}  // namespace spotrl
