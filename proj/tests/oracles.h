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

// Independent re-derivations used by the unit and acceptance tests. Nothing
// here calls into the code under test except for plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "domain.h"
#include "event_log.h"
#include "load_balancer.h"
#include "traces.h"

namespace spotrl::oracle {

// ---------------------------------------------------------------- load balancer

// Shortest-queue selection with delayed dispatch, written out pass by pass:
// build the candidate set, then take the argmin over the whole registry.
inline std::optional<std::string> select(const std::vector<InstanceRecord>& registry,
                                         std::int32_t theta) {
  std::vector<const InstanceRecord*> candidates;
  for (const auto& i : registry) {
    const std::int32_t pending = i.m_pending;
    if (pending < theta) candidates.push_back(&i);
  }
  if (candidates.empty()) return std::nullopt;
  const InstanceRecord* best = nullptr;
  for (const auto& i : registry) {
    if (best == nullptr) {
      best = &i;
      continue;
    }
    if (std::make_pair(i.m_pending, i.instance_id.value) <
        std::make_pair(best->m_pending, best->instance_id.value)) {
      best = &i;
    }
  }
  return best->instance_id.value;
}

// Plateau as the first batch size whose relative throughput slope to the next
// observation drops below epsilon.
inline std::int32_t plateau(const ProfileTable& profile, double context, double epsilon,
                            const std::function<double(double)>& factor) {
  std::map<std::int32_t, std::pair<double, double>> by_batch;
  for (const auto& e : profile.entries) by_batch[e.batch_size] = {e.decode_throughput, e.context};
  std::vector<std::pair<double, double>> points;  // (batch, calibrated throughput)
  for (const auto& [b, tc] : by_batch) {
    double t = tc.first;
    if (factor && factor(tc.second) > 0) t = t * (factor(context) / factor(tc.second));
    points.emplace_back(static_cast<double>(b), t);
  }
  for (std::size_t k = 1; k < points.size(); ++k) {
    const auto [b0, t0] = points[k - 1];
    const auto [b1, t1] = points[k];
    if (!(t0 > 0)) continue;
    const double elasticity = ((t1 - t0) / t0) / ((b1 - b0) / b0);
    if (elasticity < epsilon) return static_cast<std::int32_t>(b0);
  }
  return static_cast<std::int32_t>(points.back().first);
}

// One rebalancer iteration: the pending check, else the idle-batch check.
inline std::vector<MigrationOrder> lb_tick(const std::vector<InstanceLoad>& registry,
                                           const ProfileTable* profile, double context,
                                           double epsilon,
                                           const std::function<double(double)>& factor) {
  std::vector<MigrationOrder> out;
  if (registry.size() < 2) return out;
  auto lowest = [&](auto pred) -> const InstanceLoad* {
    const InstanceLoad* pick = nullptr;
    for (const auto& i : registry) {
      if (pred(i) && (pick == nullptr || i.instance_id < pick->instance_id)) pick = &i;
    }
    return pick;
  };
  auto argmax = [&](auto key) -> const InstanceLoad* {
    const InstanceLoad* pick = nullptr;
    for (const auto& k : registry) {
      if (pick == nullptr || key(k) > key(*pick) ||
          (key(k) == key(*pick) && k.instance_id < pick->instance_id)) {
        pick = &k;
      }
    }
    return pick;
  };

  const auto* i = lowest([](const InstanceLoad& x) { return x.m_pending == 0; });
  const auto* k = lowest([](const InstanceLoad& x) { return x.m_pending > 0; });
  if (i != nullptr && k != nullptr) {
    const auto* j = argmax([](const InstanceLoad& x) { return x.m_pending; });
    out.push_back({{j->pending.back()}, j->instance_id, i->instance_id,
                   MigrationKind::kPending});
    return out;
  }
  i = lowest([](const InstanceLoad& x) { return x.m_exec == 0; });
  if (i == nullptr) return out;
  const auto* j = argmax([](const InstanceLoad& x) { return x.m_exec; });
  if (profile == nullptr || profile->entries.size() < 2) return out;
  const std::int32_t b = plateau(*profile, context, epsilon, factor);
  const std::int32_t r = std::max(j->m_exec - b, 0);
  if (r == 0) return out;
  std::multimap<std::pair<std::int64_t, RequestId>, RequestId> by_prefix;
  for (const auto& e : j->executing) by_prefix.emplace(std::make_pair(e.generated, e.request_id), e.request_id);
  MigrationOrder order{{}, j->instance_id, i->instance_id, MigrationKind::kExecuting};
  for (const auto& [key, id] : by_prefix) {
    if (static_cast<std::int32_t>(order.request_ids.size()) == r) break;
    order.request_ids.push_back(id);
  }
  out.push_back(order);
  return out;
}

// Randomized registry with at most `max_instances` instances holding at most
// `max_requests` requests between them, plus a profile that is sometimes
// missing or too small to use.
struct LbCase {
  std::vector<InstanceRecord> records;
  std::vector<InstanceLoad> loads;
  std::int32_t theta = 4;
  std::optional<ProfileTable> profile;
  double context = 1024;
  double epsilon = 0.05;
  bool calibrate = false;
};

inline LbCase random_lb_case(std::mt19937_64& rng, int max_instances = 8,
                             int max_requests = 64) {
  LbCase c;
  const int n = std::uniform_int_distribution<int>(1, max_instances)(rng);
  const int total = std::uniform_int_distribution<int>(0, max_requests)(rng);
  c.theta = std::uniform_int_distribution<int>(1, 8)(rng);
  std::vector<std::string> names;
  std::uniform_int_distribution<int> letter(0, 25);
  while (static_cast<int>(names.size()) < n) {
    std::string id = "inst-";
    id += static_cast<char>('a' + letter(rng));
    id += static_cast<char>('a' + letter(rng));
    if (std::find(names.begin(), names.end(), id) == names.end()) names.push_back(id);
  }
  c.loads.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) c.loads[static_cast<std::size_t>(k)].instance_id = InstanceId{names[static_cast<std::size_t>(k)]};
  // Skewed placement so empty instances and ties both show up often.
  std::uniform_int_distribution<int> where(0, n - 1);
  std::bernoulli_distribution pending(0.4);
  std::uniform_int_distribution<int> prefix(0, 6);
  std::bernoulli_distribution skew(0.5);
  for (int r = 0; r < total; ++r) {
    int k = where(rng);
    if (skew(rng)) k = std::min(k, where(rng));
    auto& load = c.loads[static_cast<std::size_t>(k)];
    const RequestId id = static_cast<RequestId>(1000 + r);
    if (pending(rng)) {
      load.pending.push_back(id);
    } else {
      load.executing.push_back({id, prefix(rng) * 8});
    }
  }
  for (auto& load : c.loads) {
    load.m_pending = static_cast<std::int32_t>(load.pending.size());
    load.m_exec = static_cast<std::int32_t>(load.executing.size());
    InstanceRecord rec;
    rec.instance_id = load.instance_id;
    rec.status = InstanceStatus::kActive;
    rec.m_pending = load.m_pending;
    rec.m_exec = load.m_exec;
    c.records.push_back(rec);
  }

  const int shape = std::uniform_int_distribution<int>(0, 5)(rng);
  if (shape > 0) {
    ProfileTable p;
    const int sizes = std::uniform_int_distribution<int>(1, 7)(rng);
    std::uniform_real_distribution<double> ctx(200.0, 8000.0);
    double t = std::uniform_real_distribution<double>(50.0, 200.0)(rng);
    std::set<std::int32_t> batches;
    while (static_cast<int>(batches.size()) < sizes) {
      batches.insert(std::uniform_int_distribution<int>(1, 40)(rng));
    }
    for (std::int32_t b : batches) {
      t *= std::uniform_real_distribution<double>(1.0, 1.9)(rng);
      p.entries.push_back({b, t, ctx(rng), 1});
    }
    c.profile = p;
  }
  c.context = std::uniform_real_distribution<double>(200.0, 8000.0)(rng);
  c.epsilon = std::uniform_real_distribution<double>(0.01, 0.4)(rng);
  c.calibrate = std::bernoulli_distribution(0.5)(rng);
  std::shuffle(c.records.begin(), c.records.end(), rng);
  std::shuffle(c.loads.begin(), c.loads.end(), rng);
  return c;
}

inline double hyperbolic_factor(double context) {
  const double gamma = 1.0 / 16384.0;
  return (1.0 + gamma * 1024.0) / (1.0 + gamma * context);
}

// Orders compared as data; request order inside an order is significant.
inline bool same_orders(const std::vector<MigrationOrder>& a,
                        const std::vector<MigrationOrder>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].kind != b[k].kind || a[k].from_instance != b[k].from_instance ||
        a[k].to_instance != b[k].to_instance || a[k].request_ids != b[k].request_ids) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------- traces

// Coverage count of per-instance lifetimes at every breakpoint.
inline TraceSummary sweep_summary(const std::vector<TraceEvent>& events,
                                  std::optional<Seconds> duration = std::nullopt) {
  TraceSummary s;
  if (events.empty() && !duration) return s;
  s.duration = duration ? *duration : events.back().at;
  struct Life {
    Seconds from;
    std::optional<Seconds> to;
  };
  std::map<std::string, std::vector<Life>> lives;
  std::set<Seconds> cuts{0.0, s.duration};
  for (const auto& ev : events) {
    const Seconds t = std::min(ev.at, s.duration);
    cuts.insert(t);
    auto& l = lives[ev.instance_id];
    if (ev.kind == TraceKind::kAllocate) {
      l.push_back({t, std::nullopt});
      (ev.at > 0 ? s.allocations : s.initial_instances) += 1;
    } else {
      l.back().to = t;
      s.preemptions += 1;
    }
  }
  auto covered = [&](Seconds a, Seconds b) {
    std::int64_t n = 0;
    for (const auto& [id, ls] : lives) {
      for (const auto& l : ls) {
        if (l.from <= a && b <= l.to.value_or(s.duration)) ++n;
      }
    }
    return n;
  };
  double area = 0;
  std::vector<Seconds> t(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    if (t[k + 1] > s.duration) break;
    area += static_cast<double>(covered(t[k], t[k + 1])) * (t[k + 1] - t[k]);
  }
  s.avg_instances = s.duration > 0 ? area / s.duration : 0;

  // Peak counts every event prefix, so simultaneous swaps are seen in order.
  std::int64_t alive = 0;
  for (const auto& ev : events) {
    alive += ev.kind == TraceKind::kAllocate ? 1 : -1;
    s.peak_instances = std::max(s.peak_instances, alive);
  }
  return s;
}

// Randomized valid trace: alternating lifetimes over a handful of ids, with
// simultaneous events and arbitrary fractional timestamps.
inline std::vector<TraceEvent> random_trace(std::mt19937_64& rng, std::size_t max_events) {
  std::uniform_int_distribution<int> ids(1, 6);
  std::uniform_int_distribution<std::size_t> len(0, max_events);
  std::uniform_real_distribution<double> gap(0.0, 400.0);
  std::bernoulli_distribution same_time(0.2);
  std::vector<TraceEvent> out;
  std::map<std::string, bool> alive;
  Seconds now = same_time(rng) ? 0.0 : gap(rng);
  const std::size_t n = len(rng);
  for (std::size_t k = 0; k < n; ++k) {
    if (!same_time(rng)) now += gap(rng);
    const std::string id = "i" + std::to_string(ids(rng)) + (k % 3 == 0 ? "-x" : "");
    const bool up = alive[id];
    out.push_back({now, up ? TraceKind::kPreempt : TraceKind::kAllocate, id});
    alive[id] = !up;
  }
  return out;
}

// ---------------------------------------------------------------- event log

struct IntervalCost {
  double wall_hours = 0;
  double reserved_dollars = 0;
  double preemptible_dollars = 0;
  double total_dollars = 0;
  std::int64_t tokens_trained = 0;
};

// Re-integrates instance lifetimes from register/preempt/end records.
inline IntervalCost interval_cost(const EventLog& log, const CostModel& cost,
                                  const std::function<double(const std::string&)>& rate_of) {
  IntervalCost out;
  std::map<std::string, Seconds> open;
  std::optional<Seconds> first_step;
  Seconds end = 0;
  double instance_seconds_dollars = 0;
  for (const auto& r : log.records()) {
    switch (r.type) {
      case EventType::kStepBegin:
        if (!first_step) first_step = r.at;
        break;
      case EventType::kStepEnd:
        out.tokens_trained += r.value;
        end = r.at;
        break;
      case EventType::kRegister:
        open[r.instance] = r.at;
        break;
      case EventType::kPreempt: {
        auto it = open.find(r.instance);
        if (it != open.end()) {
          instance_seconds_dollars += rate_of(r.instance) * (r.at - it->second);
          open.erase(it);
        }
        break;
      }
      case EventType::kExperimentEnd:
        for (const auto& [id, from] : open) instance_seconds_dollars += rate_of(id) * (r.at - from);
        open.clear();
        break;
      default:
        break;
    }
  }
  out.wall_hours = first_step ? (end - *first_step) / 3600.0 : 0;
  out.reserved_dollars = cost.reserved_rate * cost.reserved_node_count * out.wall_hours;
  out.preemptible_dollars = instance_seconds_dollars / 3600.0;
  out.total_dollars = out.reserved_dollars + out.preemptible_dollars;
  return out;
}

struct OwnershipAudit {
  std::int64_t violations = 0;
  std::string first;
  std::int64_t completions = 0;
  std::int64_t routes = 0;
};

// Replays ownership transfers: every route lands on an unowned request, every
// admit and completion comes from the owner, and preemption or a local engine
// going offline releases everything the instance held.
inline OwnershipAudit audit_ownership(const EventLog& log) {
  OwnershipAudit audit;
  std::map<std::int64_t, std::string> owner;
  std::set<std::int64_t> done;
  auto fail = [&](const EventRecord& r, const std::string& why) {
    if (audit.violations++ == 0) {
      audit.first = why + " at t=" + std::to_string(r.at) + " request " +
                    std::to_string(r.request) + " instance " + r.instance;
    }
  };
  for (const auto& r : log.records()) {
    switch (r.type) {
      case EventType::kStepBegin:
        if (!owner.empty()) fail(r, "owned requests across a step boundary");
        owner.clear();
        break;
      case EventType::kPreempt:
      case EventType::kOffline:
        std::erase_if(owner, [&](const auto& kv) { return kv.second == r.instance; });
        break;
      case EventType::kRoute:
        ++audit.routes;
        if (owner.count(r.request)) fail(r, "second owner");
        if (done.count(r.request)) fail(r, "route after completion");
        owner[r.request] = r.instance;
        break;
      case EventType::kCancel:
        if (owner[r.request] != r.instance) fail(r, "cancel by non-owner");
        owner.erase(r.request);
        break;
      case EventType::kAdmit:
        if (owner[r.request] != r.instance) fail(r, "admit by non-owner");
        break;
      case EventType::kComplete:
        ++audit.completions;
        if (owner[r.request] != r.instance) fail(r, "completion by non-owner");
        if (!done.insert(r.request).second) fail(r, "second completion");
        owner.erase(r.request);
        break;
      case EventType::kHold:
        if (owner.count(r.request) && owner[r.request] != r.instance) {
          fail(r, "hold while owned");
        }
        owner.erase(r.request);
        break;
      default:
        break;
    }
  }
  return audit;
}

struct VersionAudit {
  std::int64_t stale_tokens = 0;
  std::int64_t stale_routes = 0;
  std::int64_t tokens = 0;
};

// Serving version per instance, advanced only by explicit online records and
// dropped by pulls, preemption and offline transitions. Every decode and route
// must target an instance serving the current step's version.
inline VersionAudit audit_versions(const EventLog& log) {
  VersionAudit audit;
  std::int64_t current = 0;
  std::map<std::string, std::int64_t> serving;
  for (const auto& r : log.records()) {
    switch (r.type) {
      case EventType::kStepBegin:
        current = r.version;
        serving.clear();
        break;
      case EventType::kOnline:
        serving[r.instance] = r.version;
        break;
      case EventType::kPullStart:
      case EventType::kPreempt:
      case EventType::kOffline:
        serving.erase(r.instance);
        break;
      case EventType::kDecode: {
        audit.tokens += r.value;
        auto it = serving.find(r.instance);
        if (it == serving.end() || it->second != current) audit.stale_tokens += r.value;
        break;
      }
      case EventType::kRoute: {
        auto it = serving.find(r.instance);
        if (it == serving.end() || it->second != current) ++audit.stale_routes;
        break;
      }
      default:
        break;
    }
  }
  return audit;
}

struct TokenLedger {
  std::vector<std::int64_t> decoded;    // per step
  std::vector<std::int64_t> completed;  // per step, final lengths
  std::vector<std::int64_t> discarded;  // per step
  std::vector<std::int64_t> trained;    // per step
};

inline TokenLedger token_ledger(const EventLog& log) {
  TokenLedger t;
  for (const auto& r : log.records()) {
    if (r.type == EventType::kStepBegin) {
      t.decoded.push_back(0);
      t.completed.push_back(0);
      t.discarded.push_back(0);
      t.trained.push_back(0);
    }
    if (t.decoded.empty()) continue;
    switch (r.type) {
      case EventType::kDecode:
        t.decoded.back() += r.value;
        break;
      case EventType::kComplete:
        t.completed.back() += r.value;
        break;
      case EventType::kDiscard:
        t.discarded.back() += r.value;
        break;
      case EventType::kStepEnd:
        t.trained.back() = r.value;
        break;
      default:
        break;
    }
  }
  return t;
}

}  // namespace spotrl::oracle
