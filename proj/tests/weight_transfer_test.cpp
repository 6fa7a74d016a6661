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

#include <limits>
#include <map>
#include <random>

#include "weight_transfer.h"

namespace spotrl {
namespace {

TransferAgent agent(const std::string& id, double egress = 25e9) {
  TransferAgent a;
  a.agent_id = id;
  a.node_id = "node-" + id;
  a.egress_bandwidth = egress;
  return a;
}

InstanceId inst(const std::string& id) { return InstanceId{id}; }

std::map<std::string, Seconds> finish_times(WeightTransfer& w, Seconds until) {
  std::map<std::string, Seconds> out;
  for (const auto& c : w.advance_to(until)) out[c.instance_id.value] = c.at;
  return out;
}

// Fluid model of concurrent pulls: egress split evenly per agent, capped by
// each puller's ingress, rates re-solved at every start and finish.
struct FluidPull {
  std::string agent;
  Seconds start;
  double bytes;
  double ingress;
};

std::vector<Seconds> fluid_finish(const std::vector<FluidPull>& pulls,
                                  const std::map<std::string, double>& egress) {
  std::vector<double> left;
  for (const auto& p : pulls) left.push_back(p.bytes);
  std::vector<Seconds> done(pulls.size(), -1);
  Seconds now = 0;
  while (true) {
    std::map<std::string, int> running;
    for (std::size_t k = 0; k < pulls.size(); ++k) {
      if (done[k] < 0 && pulls[k].start <= now) ++running[pulls[k].agent];
    }
    std::vector<double> rate(pulls.size(), 0);
    Seconds next = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pulls.size(); ++k) {
      if (done[k] >= 0) continue;
      if (pulls[k].start > now) {
        next = std::min(next, pulls[k].start);
        continue;
      }
      rate[k] = std::min(egress.at(pulls[k].agent) / running[pulls[k].agent], pulls[k].ingress);
      next = std::min(next, now + left[k] / rate[k]);
    }
    if (!std::isfinite(next)) break;
    for (std::size_t k = 0; k < pulls.size(); ++k) {
      if (rate[k] <= 0) continue;
      left[k] -= rate[k] * (next - now);
      if (left[k] <= 1e-3) done[k] = next;
    }
    now = next;
  }
  return done;
}

TEST_CASE("pairing is round-robin over agents in id order") {
  WeightTransfer w({agent("a2"), agent("a1")});
  std::vector<std::string> got;
  for (int k = 1; k <= 4; ++k) got.push_back(w.pair_agent(inst("i" + std::to_string(k))));
  CHECK(got == std::vector<std::string>{"a1", "a2", "a1", "a2"});
}

TEST_CASE("a single agent takes every instance") {
  WeightTransfer w({agent("solo")});
  for (int k = 0; k < 5; ++k) CHECK(w.pair_agent(inst("i" + std::to_string(k))) == "solo");
}

TEST_CASE("re-pairing after preemption takes the next cursor slot") {
  WeightTransfer w({agent("a1"), agent("a2"), agent("a3")});
  CHECK(w.pair_agent(inst("x")) == "a1");
  CHECK(w.pair_agent(inst("y")) == "a2");
  CHECK(w.pair_agent(inst("x")) == "a3");
  CHECK(*w.paired_agent(inst("x")) == "a3");
}

TEST_CASE("pairing stays balanced") {
  WeightTransfer w({agent("a"), agent("b"), agent("c")});
  std::map<std::string, int> count;
  for (int k = 0; k < 100; ++k) ++count[w.pair_agent(inst("i" + std::to_string(k)))];
  int lo = 1000, hi = 0;
  for (auto& [a, n] : count) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("agent construction errors") {
  CHECK_THROWS_WITH(WeightTransfer(std::vector<TransferAgent>{}).pair_agent(inst("x")), "no transfer agents");
  CHECK_THROWS(WeightTransfer({agent("a"), agent("a")}));
}

TEST_CASE("sole puller is ingress bound") {
  WeightTransfer w({agent("a")});
  w.pair_agent(inst("i"));
  w.stage_weights(1, 0, 0);
  w.start_pull(inst("i"), 1, 28e9, 6.25e9, 0);
  auto t = finish_times(w, 100);
  CHECK(t.at("i") == doctest::Approx(4.48));
}

TEST_CASE("two pullers on one agent share its egress") {
  WeightTransfer w({agent("a", 10e9)});
  w.pair_agent(inst("i"));
  w.pair_agent(inst("j"));
  w.stage_weights(1, 0, 0);
  w.start_pull(inst("i"), 1, 10e9, 50e9, 0);
  w.start_pull(inst("j"), 1, 10e9, 50e9, 0);
  auto t = finish_times(w, 100);
  CHECK(t.at("i") == doctest::Approx(2.0));
  CHECK(t.at("j") == doctest::Approx(2.0));
}

TEST_CASE("pulls queue until staging lands") {
  WeightTransfer w({agent("a")});
  w.pair_agent(inst("i"));
  w.stage_weights(3, 10, 5);
  w.start_pull(inst("i"), 3, 28e9, 6.25e9, 10);
  CHECK(w.jobs().at(inst("i")).state == PullState::kQueued);
  CHECK(w.advance_to(14.9).empty());
  auto t = finish_times(w, 100);
  CHECK(t.at("i") == doctest::Approx(15 + 4.48));
  CHECK(w.staged_version() == 3);
}

TEST_CASE("zero staging delay is instant") {
  WeightTransfer w({agent("a")});
  w.stage_weights(2, 7, 0);
  w.advance_to(7);
  CHECK(w.staged_version() == 2);
  CHECK(w.agents()[0].buffer_version == 2);
}

TEST_CASE("abort drops the job without completing it") {
  WeightTransfer w({agent("a")});
  w.pair_agent(inst("i"));
  w.stage_weights(1, 0, 0);
  w.start_pull(inst("i"), 1, 28e9, 6.25e9, 0);
  CHECK(w.abort(inst("i"), 1.0));
  CHECK_FALSE(w.abort(inst("i"), 1.0));
  CHECK(w.advance_to(100).empty());
  CHECK(w.jobs().empty());
}

TEST_CASE("an aborted puller frees bandwidth for the others") {
  WeightTransfer w({agent("a", 10e9)});
  w.pair_agent(inst("i"));
  w.pair_agent(inst("j"));
  w.stage_weights(1, 0, 0);
  w.start_pull(inst("i"), 1, 10e9, 50e9, 0);
  w.start_pull(inst("j"), 1, 10e9, 50e9, 0);
  w.advance_to(1.0);
  w.abort(inst("j"), 1.0);
  // 5 GB done at half rate, the rest at full rate.
  CHECK(finish_times(w, 100).at("i") == doctest::Approx(1.5));
}

TEST_CASE("pull errors") {
  WeightTransfer w({agent("a")});
  CHECK_THROWS(w.start_pull(inst("unpaired"), 1, 1, 1, 0));
  w.pair_agent(inst("i"));
  CHECK_THROWS(w.start_pull(inst("i"), 1, 0, 1, 0));
  CHECK_THROWS(w.stage_weights(1, 0, -1));
}

TEST_CASE("completion times follow the fluid sharing model") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TransferAgent> agents{agent("a", 5e9 + 30e9 * u(rng)),
                                      agent("b", 5e9 + 30e9 * u(rng))};
    std::map<std::string, double> egress{{"a", agents[0].egress_bandwidth},
                                         {"b", agents[1].egress_bandwidth}};
    WeightTransfer w(agents);
    w.stage_weights(1, 0, 0);
    std::vector<FluidPull> pulls;
    const int n = 1 + trial % 7;
    for (int k = 0; k < n; ++k) {
      const std::string id = "i" + std::to_string(k);
      const std::string a = w.pair_agent(inst(id));
      pulls.push_back({a, 10 * u(rng), 5e9 + 30e9 * u(rng), 2e9 + 10e9 * u(rng)});
    }
    std::vector<std::size_t> order(pulls.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](auto x, auto y) { return pulls[x].start < pulls[y].start; });
    std::map<std::string, Seconds> got;
    for (std::size_t k : order) {
      for (const auto& c : w.advance_to(pulls[k].start)) got[c.instance_id.value] = c.at;
      w.start_pull(inst("i" + std::to_string(k)), 1, pulls[k].bytes, pulls[k].ingress,
                   pulls[k].start);
    }
    for (auto& [id, at] : finish_times(w, 1e6)) got[id] = at;
    const auto want = fluid_finish(pulls, egress);
    for (std::size_t k = 0; k < pulls.size(); ++k) {
      CHECK(got.at("i" + std::to_string(k)) == doctest::Approx(want[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("a slow puller on another agent does not move a pull's finish") {
  WeightTransfer w({agent("a"), agent("b")});
  w.pair_agent(inst("fast"));
  w.pair_agent(inst("slow"));
  w.stage_weights(1, 0, 0);
  w.start_pull(inst("fast"), 1, 28e9, 6.25e9, 0);
  w.start_pull(inst("slow"), 1, 28e9, 0.5e9, 0);
  auto t = finish_times(w, 1000);
  CHECK(t.at("fast") == doctest::Approx(4.48));
  CHECK(t.at("slow") == doctest::Approx(56));
}

TEST_CASE("next event time tracks staging and running pulls") {
  WeightTransfer w({agent("a")});
  CHECK_FALSE(w.next_event_time().has_value());
  w.pair_agent(inst("i"));
  w.stage_weights(1, 0, 2);
  CHECK(*w.next_event_time() == doctest::Approx(2));
  w.start_pull(inst("i"), 1, 28e9, 6.25e9, 0);
  w.advance_to(2);
  CHECK(*w.next_event_time() == doctest::Approx(6.48));
}

TEST_CASE("model presets") {
  CHECK(model_bytes_for_preset("14b") == 28e9);
  CHECK(model_bytes_for_preset("8b") == 16e9);
  CHECK(model_bytes_for_preset("32b") == 64e9);
  CHECK_THROWS(model_bytes_for_preset("70b"));
}

}  // namespace
}  // namespace spotrl
