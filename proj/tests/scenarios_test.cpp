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

#include <sstream>
#include <stdexcept>

#include "scenarios.h"

namespace spotrl {
namespace {

SimConfig quick(std::int64_t steps = 6) {
  SimConfig c;
  c.prompt_count = 32;
  c.max_steps = steps;
  return c;
}

StepStats seeded(std::int64_t index, Seconds t_seed) {
  StepStats s;
  s.step_index = index;
  s.t_seed_used = t_seed;
  return s;
}

TEST_CASE("parallel map keeps index order and forwards failures") {
  std::function<int(std::size_t)> square = [](std::size_t i) { return static_cast<int>(i * i); };
  const auto serial = parallel_map<int>(50, 1, square);
  CHECK(parallel_map<int>(50, 8, square) == serial);
  CHECK(serial[7] == 49);
  CHECK(parallel_map<int>(0, 4, square).empty());
  std::function<int(std::size_t)> bad = [](std::size_t i) -> int {
    if (i == 3) throw std::runtime_error("boom");
    return 0;
  };
  CHECK_THROWS_WITH(parallel_map<int>(10, 4, bad), "boom");
}

TEST_CASE("static pool allocates everything at time zero") {
  const auto t = static_pool_trace(3);
  REQUIRE(t.size() == 3);
  for (const auto& ev : t) {
    CHECK(ev.at == 0);
    CHECK(ev.kind == TraceKind::kAllocate);
  }
  CHECK_NOTHROW(validate_trace(t));
  CHECK(summarize(t, 100).avg_instances == 3);
}

TEST_CASE("cycling trace follows its phases") {
  const std::vector<std::int32_t> phases{6, 1, 6, 3};
  const auto t = cycling_trace(phases, 100);
  CHECK_NOTHROW(validate_trace(t));
  for (std::size_t k = 0; k < phases.size(); ++k) {
    CHECK(alive_at(t, 100.0 * k + 50) == phases[k]);
  }
  CHECK(summarize(t, 400).avg_instances == doctest::Approx(4));
  CHECK_THROWS(cycling_trace({}, 10));
  CHECK_THROWS(cycling_trace({2, -1}, 10));
}

TEST_CASE("csv table writes a header and rows") {
  CsvTable t;
  t.columns = {"a", "b"};
  t.add_row({"1", "2"});
  CHECK_THROWS(t.add_row({"1"}));
  std::ostringstream out;
  t.write(out);
  CHECK(out.str() == "a,b\n1,2\n");
}

TEST_CASE("reconvergence counts steps until the window settles") {
  std::vector<StepStats> tl;
  const std::vector<Seconds> seeds{30, 30, 90, 60, 45, 44, 44, 44};
  for (std::size_t k = 0; k < seeds.size(); ++k) tl.push_back(seeded(k + 1, seeds[k]));
  // Change at index 1; 90 -> 60 -> 45 -> 44 settles on the third pair.
  CHECK(reconvergence_steps(tl, 1, tl.size()) == 3);
  CHECK(reconvergence_steps(tl, 4, tl.size()) == 1);
  // Never settles inside the window.
  CHECK(reconvergence_steps(tl, 1, 4) == 3);
}

TEST_CASE("steady throughput skips the warmup steps") {
  ExperimentResult r;
  for (int k = 1; k <= 5; ++k) {
    StepStats s;
    s.step_index = k;
    s.step_duration = 10;
    s.tokens_trained = k <= 3 ? 10 : 1000;
    r.timeline.push_back(s);
  }
  CHECK(steady_throughput(r) == doctest::Approx(100));
  CHECK(steady_throughput(r, 0) == doctest::Approx((1 + 1 + 1 + 100 + 100) / 5.0));
}

TEST_CASE("fault case reduction") {
  FaultCase c;
  c.baseline_step = 100;
  c.migrate_step = 110;
  c.recompute_step = 140;
  CHECK(c.migrate_overhead() == 10);
  CHECK(c.recompute_overhead() == 40);
  CHECK(c.reduction() == doctest::Approx(0.75));
  c.recompute_step = 100;
  CHECK(c.reduction() == 0);
}

TEST_CASE("instance tokens in a step are read from decode records") {
  EventLog log;
  log.record(0, EventType::kStepBegin, {}, -1, 0, 1);
  log.record(5, EventType::kDecode, "x", -1, 40, 1);
  log.record(6, EventType::kStepEnd, {}, -1, 40);
  log.record(6, EventType::kStepBegin, {}, -1, 0, 2);
  log.record(7, EventType::kDecode, "x", -1, 10, 2);
  log.record(9, EventType::kDecode, "y", -1, 99, 2);
  log.record(12, EventType::kDecode, "x", -1, 5, 2);
  log.record(13, EventType::kStepEnd, {}, -1, 114);
  CHECK(instance_tokens_in_step(log, "x", 1) == 40);
  CHECK(instance_tokens_in_step(log, "x", 2) == 15);
  CHECK(instance_tokens_in_step(log, "x", 2, 8) == 5);
  CHECK(instance_tokens_in_step(log, "z", 2) == 0);
}

TEST_CASE("length point ratios") {
  LengthPoint p;
  CHECK(p.relative_throughput() == 0);
  p.colocated_throughput = 100;
  p.hybrid_throughput = 150;
  p.colocated_tokens_per_dollar = 10;
  p.hybrid_tokens_per_dollar = 12;
  CHECK(p.relative_throughput() == doctest::Approx(1.5));
  CHECK(p.relative_cost_efficiency() == doctest::Approx(1.2));
}

TEST_CASE("a short scaling sweep is thread-count independent") {
  const auto a = run_scaling(quick(), 3, 1);
  const auto b = run_scaling(quick(), 3, 4);
  REQUIRE(a.points.size() == 4);
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    CHECK(a.points[k].instances == static_cast<std::int32_t>(k));
    CHECK(a.points[k].avg_throughput == b.points[k].avg_throughput);
  }
  CHECK(a.saturation == b.saturation);
  CHECK(a.points[0].mean_used == 0);
  CHECK(a.points[3].steady_throughput > a.points[0].steady_throughput);
  CHECK(to_table(a).rows.size() == 4);
}

TEST_CASE("compare modes keeps the requested order") {
  const std::vector<SimMode> modes{SimMode::kColocated, SimMode::kHybrid};
  const auto rows = compare_modes(quick(100), static_pool_trace(4), modes, 900, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].mode == "colocated");
  CHECK(rows[1].mode == "hybrid");
  for (const auto& r : rows) {
    CHECK(r.steps > 0);
    CHECK(r.tokens_per_dollar > 0);
  }
  CHECK(rows[1].avg_throughput > rows[0].avg_throughput);
}

TEST_CASE("fault handling argument checks") {
  CHECK_THROWS(run_fault_handling(quick(), 2, 0, {0.5}));
  CHECK_THROWS(run_fault_handling(quick(), 2, 3, {0.5}));
  CHECK_THROWS(run_fault_handling(quick(), 2, 1, {0.5}, 0));
}

}  // namespace
}  // namespace spotrl
