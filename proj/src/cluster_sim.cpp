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

#include "cluster_sim.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <random>

#include <spdlog/spdlog.h>

#include "rollout_manager.h"

namespace spotrl {

const char* to_string(SimMode mode) {
  switch (mode) {
    case SimMode::kHybrid: return "hybrid";
    case SimMode::kColocated: return "colocated";
    case SimMode::kDisaggBalanced: return "disagg";
  }
  return "?";
}

SimMode parse_mode(const std::string& text) {
  if (text == "hybrid") return SimMode::kHybrid;
  if (text == "colocated") return SimMode::kColocated;
  if (text == "disagg" || text == "disagg-balanced") return SimMode::kDisaggBalanced;
  throw Error("unknown mode '" + text + "' (hybrid, colocated, disagg)");
}

void validate(const SimConfig& c) {
  validate(c.generation);
  validate(c.lengths);
  if (c.prompt_count < 1 || c.group_size < 1) throw Error("empty step batch");
  if (c.m_b < 1) throw Error("m_b must be >= 1");
  if (c.n_resv < 1) throw Error("n_resv must be >= 1");
  if (!(c.model_bytes > 0) || !(c.instance_ingress > 0) || !(c.agent_egress > 0)) {
    throw Error("transfer sizes and bandwidths must be positive");
  }
  if (c.agents_per_node < 1) throw Error("agents_per_node must be >= 1");
  if (c.staging_delay < 0 || c.switch_cost < 0) throw Error("delays must be >= 0");
  if (!(c.local_speed > 0)) throw Error("local_speed must be positive");
  if (c.trainer.fixed_overhead < 0 || c.trainer.per_token_time < 0) {
    throw Error("trainer coefficients must be >= 0");
  }
  if (c.cost.reserved_rate < 0 || c.cost.preemptible_rate < 0 ||
      c.cost.reserved_node_count < 1) {
    throw Error("invalid cost model");
  }
  if (c.max_steps < 1) throw Error("max_steps must be >= 1");
  if (c.max_duration < 0) throw Error("max_duration must be >= 0");
  if (!(c.scheduler.eta > 0)) throw Error("eta must be positive");
  if (c.lb.theta < 1) throw Error("theta must be >= 1");
  if (!(c.lb.lb_tick_seconds > 0)) throw Error("lb_tick_seconds must be positive");
  if (c.remote_gpu_count < 1) throw Error("remote_gpu_count must be >= 1");
}

namespace {

std::int64_t step_requests(const SimConfig& c) {
  return static_cast<std::int64_t>(c.prompt_count) * c.group_size;
}

double mean_prompt(const SimConfig& c) {
  return 0.5 * (c.lengths.prompt_min + c.lengths.prompt_max);
}

// Decode rate of one saturated instance at the step's mean context.
double saturated_rate(const SimConfig& c) {
  const double ctx = mean_prompt(c) + 0.5 * expected_response_length(c.lengths);
  return instance_throughput(c.generation, c.generation.max_batch, ctx);
}

}  // namespace

Seconds estimate_local_rollout_time(const SimConfig& c) {
  const double work = static_cast<double>(step_requests(c)) *
                      expected_response_length(c.lengths);
  return work / (c.n_resv * c.local_speed * saturated_rate(c));
}

Seconds estimate_train_time(const SimConfig& c) {
  const double n = static_cast<double>(step_requests(c));
  const double tokens = n * (mean_prompt(c) + expected_response_length(c.lengths));
  return std::ceil(n / c.m_b) * c.trainer.fixed_overhead +
         tokens * c.trainer.per_token_time;
}

std::int32_t disagg_pool_size(const SimConfig& c) {
  const double work = static_cast<double>(step_requests(c)) *
                      expected_response_length(c.lengths);
  const double train = estimate_train_time(c);
  if (!(train > 0)) throw Error("training estimate must be positive");
  return std::max<std::int32_t>(
      1, static_cast<std::int32_t>(std::ceil(work / (saturated_rate(c) * train) - 1e-9)));
}

Seconds initial_seed_window(const SimConfig& c) {
  if (c.scheduler.t_init_seconds) return *c.scheduler.t_init_seconds;
  const Seconds estimate = estimate_local_rollout_time(c);
  return std::isfinite(estimate) && estimate > 0 ? 0.25 * estimate
                                                 : kDefaultInitialSeedWindow;
}

double ExperimentResult::avg_throughput() const {
  if (timeline.empty()) return 0;
  double tokens = 0;
  double time = 0;
  for (const auto& s : timeline) {
    tokens += static_cast<double>(s.tokens_trained);
    time += s.step_duration;
  }
  return time > 0 ? tokens / time : 0;
}

double ExperimentResult::mean_step_throughput() const {
  if (timeline.empty()) return 0;
  double sum = 0;
  for (const auto& s : timeline) sum += compute_throughput(s).trained_only;
  return sum / static_cast<double>(timeline.size());
}

// ============================================================== simulator

namespace {

// Ordering classes at equal timestamps.
enum EventClass : int {
  kClassTrace = 0,
  kClassEngine = 1,
  kClassLbTick = 2,
  kClassPull = 3,
  kClassSeal = 4,
  kClassTrainer = 5,
  kClassPhase = 6,
};

enum class Action {
  kTrace,
  kEngineWake,
  kLbTick,
  kPull,
  kSeal,
  kTrainDone,
  kSeedingEnd,
  kSwitchDone,
  kFallbackOnline,
};

struct QueuedEvent {
  Seconds at = 0;
  int cls = 0;
  std::uint64_t seq = 0;
  Action action = Action::kTrace;
  std::size_t index = 0;  // trace index
  InstanceId instance;
  std::uint64_t token = 0;

  bool operator>(const QueuedEvent& o) const {
    if (at != o.at) return at > o.at;
    if (cls != o.cls) return cls > o.cls;
    return seq > o.seq;
  }
};

struct Engine {
  InstanceId id;
  bool local = false;
  bool alive = true;
  double speed = 1.0;
  std::vector<RequestId> batch;
  Seconds last_sync = 0;
  Seconds stall_until = 0;
  double carry = 0;
  DecodeClock clock;
  double clock_context = 0;
  std::uint64_t wake_token = 0;
};

enum class Phase { kSeeding, kSwitching, kTraining, kFallback };

constexpr Seconds kProgressWatchdog = 1e6;

}  // namespace

class Simulator::Impl {
 public:
  Impl(SimConfig config, std::vector<TraceEvent> trace);

  std::optional<StepStats> run_step();
  bool finished() const;
  ExperimentResult finish();

 private:
  RolloutManager make_manager();
  void push(Seconds at, int cls, Action action, InstanceId instance = {},
            std::uint64_t token = 0, std::size_t index = 0);
  void dispatch_event(const QueuedEvent& ev);

  void begin_step();
  void end_step();
  StepSchedule schedule_for_step() const;

  // Engines.
  Engine& engine(const InstanceId& id);
  void sync(Engine& e);
  void admit(Engine& e);
  void reschedule(Engine& e);
  void on_engine_wake(const QueuedEvent& ev);

  // Manager plumbing.
  void process_commands();
  void dispatch();
  void after_completions();
  void note_transfer_change();

  // Cluster membership.
  void on_trace(std::size_t index);
  bool try_register(const InstanceId& id);
  void register_deferred();
  void preempt(const InstanceId& id);
  void on_pull_event();
  std::int32_t serving_remotes() const;

  // Phases and trainer.
  void seeding_end();
  void on_switch_done();
  void on_fallback_online();
  void maybe_fallback();
  void try_train();
  void on_train_done();
  void on_seal();
  void on_lb_tick(std::uint64_t token);
  bool step_complete() const;

  void log(EventType type, const std::string& instance = {}, std::int64_t request = -1,
           std::int64_t value = 0, std::int64_t version = 0,
           const std::string& peer = {});
  void audit();

  SimConfig config_;
  std::vector<TraceEvent> trace_;
  EventLog events_;
  RolloutManager manager_;
  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  Seconds now_ = 0;
  Seconds last_progress_ = 0;

  std::map<InstanceId, Engine> engines_;
  std::vector<InstanceId> local_ids_;
  std::deque<InstanceId> deferred_;
  std::map<InstanceId, std::size_t> open_activity_;

  StepSchedule schedule_;
  std::optional<StepStats> last_stats_;
  std::int64_t step_index_ = 0;
  Seconds step_start_ = 0;
  bool step_done_ = false;
  bool experiment_done_ = false;
  StepAccounting accounting_;
  MicrobatchAssembler assembler_;
  std::deque<Microbatch> train_queue_;
  Phase phase_ = Phase::kTraining;
  bool trainer_busy_ = false;
  std::optional<Seconds> idle_since_;
  std::int64_t trained_tokens_ = 0;
  std::int64_t microbatches_ = 0;
  std::int64_t step_migrations_start_ = 0;
  std::int64_t local_tokens_ = 0;
  std::int64_t remote_tokens_ = 0;
  Seconds rollout_time_ = 0;
  Seconds seeding_time_ = 0;
  bool fallback_ = false;
  bool seal_pending_ = false;
  std::uint64_t phase_token_ = 0;
  std::uint64_t lb_token_ = 0;
  std::uint64_t pull_token_ = 0;
  bool transfer_dirty_ = false;
  std::size_t trace_cursor_ = 0;
  std::vector<RequestId> step_requests_;

  ExperimentResult result_;
  ProfileTable profile_;
  std::int32_t pool_size_ = 0;
};

Simulator::Impl::Impl(SimConfig config, std::vector<TraceEvent> trace)
    : config_(std::move(config)),
      trace_(std::move(trace)),
      manager_(make_manager()),
      assembler_(config_.m_b) {
  validate(config_);
  validate_trace(trace_);
  events_.set_enabled(config_.record_events);
  if (config_.mode == SimMode::kDisaggBalanced) {
    pool_size_ = config_.disagg_pool ? *config_.disagg_pool : disagg_pool_size(config_);
    if (pool_size_ < 1) throw Error("disagg pool must hold at least one instance");
  }
  for (std::int32_t i = 0; i < config_.n_resv; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "local-%02d", i);
    InstanceId id{buf};
    manager_.add_local_engine(id, 2, 0);
    Engine e;
    e.id = id;
    e.local = true;
    e.speed = config_.local_speed;
    engines_.emplace(id, e);
    local_ids_.push_back(id);
  }
  for (std::size_t i = 0; i < trace_.size(); ++i) {
    if (config_.mode == SimMode::kDisaggBalanced) break;
    push(trace_[i].at, kClassTrace, Action::kTrace, {}, 0, i);
  }
  result_.disagg_pool = pool_size_;
  // Hybrid with no remote capacity ever offered collapses to co-located.
  if (config_.mode == SimMode::kHybrid &&
      std::none_of(trace_.begin(), trace_.end(), [](const TraceEvent& ev) {
        return ev.kind == TraceKind::kAllocate;
      })) {
    config_.mode = SimMode::kColocated;
  }
}

RolloutManager Simulator::Impl::make_manager() {
  ManagerConfig mc;
  mc.theta = config_.lb.theta;
  mc.max_response_len = config_.lengths.max_response_len;
  mc.migrate_on_preempt = config_.migrate_on_preempt;
  mc.pull_on_register = config_.pull_mode;
  mc.model_bytes = config_.model_bytes;
  mc.instance_ingress = config_.instance_ingress;
  std::vector<TransferAgent> agents;
  for (std::int32_t node = 0; node < config_.cost.reserved_node_count; ++node) {
    for (std::int32_t k = 0; k < config_.agents_per_node; ++k) {
      TransferAgent a;
      char buf[48];
      std::snprintf(buf, sizeof(buf), "agent-%02d-%02d", node, k);
      a.agent_id = buf;
      std::snprintf(buf, sizeof(buf), "node-%02d", node);
      a.node_id = buf;
      a.egress_bandwidth = config_.agent_egress / config_.agents_per_node;
      agents.push_back(a);
    }
  }
  return RolloutManager(mc, WeightTransfer(std::move(agents)), &events_);
}

void Simulator::Impl::push(Seconds at, int cls, Action action, InstanceId instance,
                           std::uint64_t token, std::size_t index) {
  QueuedEvent ev;
  ev.at = at;
  ev.cls = cls;
  ev.seq = seq_++;
  ev.action = action;
  ev.instance = std::move(instance);
  ev.token = token;
  ev.index = index;
  queue_.push(std::move(ev));
}

void Simulator::Impl::log(EventType type, const std::string& instance,
                          std::int64_t request, std::int64_t value,
                          std::int64_t version, const std::string& peer) {
  events_.record(now_, type, instance, request, value, version, peer);
}

void Simulator::Impl::audit() {
  if (!config_.audit) return;
  manager_.check_invariants();
  for (const auto& [id, e] : engines_) {
    if (!e.alive && !e.batch.empty()) {
      throw Error("dead engine " + id.value + " holds requests", Error::Kind::kInternal);
    }
    if (e.batch.size() != manager_.executing_set(id).size()) {
      throw Error("engine batch out of sync on " + id.value, Error::Kind::kInternal);
    }
  }
}

// ---------------------------------------------------------------- steps

StepSchedule Simulator::Impl::schedule_for_step() const {
  StepSchedule s;
  if (step_index_ == 0) {
    s = initial_schedule(initial_seed_window(config_), config_.n_resv,
                         config_.scheduler.eta);
    if (!config_.scheduler.seeding_enabled) s.t_seed = 0;
  } else {
    s = plan_step(schedule_, *last_stats_, config_.scheduler);
  }
  switch (config_.mode) {
    case SimMode::kColocated:
      s.t_seed = std::numeric_limits<double>::infinity();
      s.n_prem_cap = 0;
      break;
    case SimMode::kDisaggBalanced:
      s.t_seed = 0;
      s.n_prem_cap = pool_size_;
      break;
    case SimMode::kHybrid:
      if (config_.fixed_cap) s.n_prem_cap = *config_.fixed_cap;
      if (config_.fixed_t_seed) s.t_seed = *config_.fixed_t_seed;
      break;
  }
  return s;
}

void Simulator::Impl::begin_step() {
  schedule_ = schedule_for_step();
  ++step_index_;
  step_start_ = now_;
  step_done_ = false;
  trained_tokens_ = 0;
  microbatches_ = 0;
  local_tokens_ = 0;
  remote_tokens_ = 0;
  rollout_time_ = 0;
  seeding_time_ = 0;
  fallback_ = false;
  step_migrations_start_ = manager_.migrations();
  train_queue_.clear();
  trainer_busy_ = false;
  idle_since_.reset();
  ++phase_token_;
  ++lb_token_;

  log(EventType::kStepBegin, {}, -1, applied_cap(schedule_.n_prem_cap), step_index_);
  manager_.set_instance_cap(schedule_.n_prem_cap);
  manager_.clear_requests();
  manager_.begin_version(step_index_, now_, config_.staging_delay);
  note_transfer_change();
  accounting_.begin(step_index_, now_, manager_.remote_count());
  process_commands();

  if (step_index_ == 1 && config_.mode == SimMode::kDisaggBalanced) {
    for (std::int32_t i = 0; i < pool_size_; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "disagg-%02d", i);
      try_register(InstanceId{buf});
    }
  }
  register_deferred();

  // Draw the batch: one prompt length per group, one target per response.
  std::seed_seq seq{static_cast<std::uint64_t>(config_.seed),
                    static_cast<std::uint64_t>(step_index_)};
  std::mt19937_64 rng(seq);
  std::int64_t target_sum = 0;
  step_requests_.clear();
  for (std::int32_t g = 0; g < config_.prompt_count; ++g) {
    const std::int32_t prompt = sample_prompt_length(rng, config_.lengths);
    for (std::int32_t k = 0; k < config_.group_size; ++k) {
      const std::int32_t target =
          sample_response_length(rng, config_.lengths, step_index_ - 1);
      const RequestId id = manager_.add_request(g, prompt, target);
      manager_.hold(id, false, now_);
      step_requests_.push_back(id);
      target_sum += target;
    }
  }
  result_.step_target_tokens.push_back(target_sum);
  result_.schedules.push_back(schedule_);

  if (schedule_.t_seed > 0) {
    phase_ = Phase::kSeeding;
    manager_.set_local_online(true, now_);
    if (std::isfinite(schedule_.t_seed)) {
      push(now_ + schedule_.t_seed, kClassPhase, Action::kSeedingEnd, {}, phase_token_);
    }
  } else {
    phase_ = Phase::kTraining;
    idle_since_ = now_;
  }
  dispatch();
  if (config_.lb_enabled) {
    push(now_ + config_.lb.lb_tick_seconds, kClassLbTick, Action::kLbTick, {}, lb_token_);
  }
  last_progress_ = now_;
  maybe_fallback();
}

bool Simulator::Impl::step_complete() const {
  return manager_.incomplete_count() == 0 && assembler_.buffered() == 0 &&
         train_queue_.empty() && !trainer_busy_ && !seal_pending_ &&
         phase_ == Phase::kTraining;
}

void Simulator::Impl::end_step() {
  std::int64_t generated = 0;
  for (RequestId id : step_requests_) {
    const auto& r = manager_.request(id);
    generated += r.generated_len();
  }
  StepStats stats = accounting_.record_step(now_, generated, trained_tokens_, true);
  stats.t_seed_used = schedule_.t_seed;
  stats.n_prem_cap_used = schedule_.n_prem_cap;
  stats.seeding_time = seeding_time_;
  stats.rollout_time = rollout_time_;
  stats.responses = static_cast<std::int64_t>(step_requests_.size());
  stats.microbatches = microbatches_;
  stats.migrations = manager_.migrations() - step_migrations_start_;
  for (RequestId id : step_requests_) {
    stats.tokens_discarded += manager_.request(id).discarded_tokens;
  }
  stats.local_tokens = local_tokens_;
  stats.remote_tokens = remote_tokens_;
  stats.fallback = fallback_;
  if (stats.tokens_trained != stats.tokens_generated ||
      stats.tokens_generated != result_.step_target_tokens.back()) {
    throw Error("step " + std::to_string(step_index_) + " lost tokens",
                Error::Kind::kInternal);
  }
  if (stats.t_wait_train + stats.t_train > stats.step_duration + 1e-6) {
    throw Error("training phase exceeds step duration", Error::Kind::kInternal);
  }
  log(EventType::kStepEnd, {}, -1, stats.tokens_trained, step_index_);
  result_.timeline.push_back(stats);
  last_stats_ = stats;
  step_done_ = true;
  ++lb_token_;
  ++phase_token_;
  if (static_cast<std::int64_t>(result_.timeline.size()) >= config_.max_steps ||
      (config_.max_duration > 0 && now_ >= config_.max_duration)) {
    experiment_done_ = true;
  }
}

std::optional<StepStats> Simulator::Impl::run_step() {
  if (experiment_done_) return std::nullopt;
  begin_step();
  while (!step_done_) {
    if (queue_.empty()) {
      throw Error("simulation stalled in step " + std::to_string(step_index_),
                  Error::Kind::kSimulation);
    }
    QueuedEvent ev = queue_.top();
    queue_.pop();
    if (ev.at < now_) throw Error("event scheduled in the past", Error::Kind::kInternal);
    now_ = ev.at;
    dispatch_event(ev);
    if (step_complete() && !step_done_) end_step();
    audit();
    if (now_ - last_progress_ > kProgressWatchdog) {
      throw Error("no progress for " + std::to_string(kProgressWatchdog) + " s",
                  Error::Kind::kSimulation);
    }
  }
  return result_.timeline.back();
}

bool Simulator::Impl::finished() const { return experiment_done_; }

void Simulator::Impl::dispatch_event(const QueuedEvent& ev) {
  switch (ev.action) {
    case Action::kTrace:
      on_trace(ev.index);
      break;
    case Action::kEngineWake:
      on_engine_wake(ev);
      break;
    case Action::kLbTick:
      on_lb_tick(ev.token);
      break;
    case Action::kPull:
      if (ev.token == pull_token_) on_pull_event();
      break;
    case Action::kSeal:
      on_seal();
      break;
    case Action::kTrainDone:
      on_train_done();
      break;
    case Action::kSeedingEnd:
      if (ev.token == phase_token_ && phase_ == Phase::kSeeding) seeding_end();
      break;
    case Action::kSwitchDone:
      if (ev.token == phase_token_) on_switch_done();
      break;
    case Action::kFallbackOnline:
      if (ev.token == phase_token_) on_fallback_online();
      break;
  }
  if (transfer_dirty_) {
    transfer_dirty_ = false;
    if (auto t = manager_.transfer().next_event_time()) {
      push(std::max(*t, now_), kClassPull, Action::kPull, {}, ++pull_token_);
    }
  }
}

ExperimentResult Simulator::Impl::finish() {
  experiment_done_ = true;
  for (auto& [id, index] : open_activity_) result_.activity[index].end = now_;
  open_activity_.clear();
  log(EventType::kExperimentEnd);
  result_.end_time = now_;
  result_.profile = profile_;
  if (!result_.timeline.empty()) {
    result_.cost = compute_cost_efficiency(result_.timeline, result_.activity, config_.cost);
  }
  result_.events = std::move(events_);
  return std::move(result_);
}

// ---------------------------------------------------------------- engines

Engine& Simulator::Impl::engine(const InstanceId& id) {
  auto it = engines_.find(id);
  if (it == engines_.end()) throw Error("no engine " + id.value, Error::Kind::kInternal);
  return it->second;
}

void Simulator::Impl::sync(Engine& e) {
  if (now_ <= e.last_sync) return;
  const Seconds start = std::max(e.last_sync, e.stall_until);
  e.last_sync = now_;
  if (e.batch.empty() || now_ <= start) return;
  const Seconds dt = now_ - start;
  const double x = e.clock.iterations_in(dt);
  const double total = e.carry + x;
  std::int64_t min_remaining = std::numeric_limits<std::int64_t>::max();
  for (RequestId id : e.batch) {
    min_remaining = std::min(min_remaining, manager_.request(id).remaining());
  }
  auto whole = static_cast<std::int64_t>(std::floor(total + 1e-7));
  if (whole >= min_remaining) {
    whole = min_remaining;
    e.carry = 0;
  } else {
    e.carry = std::max(0.0, total - static_cast<double>(whole));
  }
  const auto& record = manager_.instance(e.id);
  if (record.weight_version != manager_.global_version()) {
    throw Error("decode on stale weights at " + e.id.value, Error::Kind::kInternal);
  }
  const auto b = static_cast<std::int64_t>(e.batch.size());
  if (!e.local) {
    accounting_.remote_busy(dt);
    profile_.observe(static_cast<std::int32_t>(b),
                     x * static_cast<double>(b) / dt / e.speed, e.clock_context + x / 2);
  }
  if (whole <= 0) return;
  for (RequestId id : e.batch) manager_.on_tokens(id, whole, now_);
  const std::int64_t emitted = whole * b;
  (e.local ? local_tokens_ : remote_tokens_) += emitted;
  if (!e.local) accounting_.remote_emission(e.id, now_);
  last_progress_ = now_;
  log(EventType::kDecode, e.id.value, -1, emitted, record.weight_version);
  std::erase_if(e.batch, [&](RequestId id) {
    return manager_.request(id).state == RequestState::kComplete;
  });
}

void Simulator::Impl::admit(Engine& e) {
  sync(e);
  const auto& queue = manager_.pending_queue(e.id);
  double prefill = 0;
  while (static_cast<std::int32_t>(e.batch.size()) < config_.generation.max_batch &&
         !queue.empty()) {
    const RequestId id = queue.front();
    manager_.on_scheduled(id, now_);
    e.batch.push_back(id);
    prefill += static_cast<double>(manager_.request(id).context_len());
  }
  if (prefill > 0) {
    e.stall_until = std::max(e.stall_until, now_) +
                    prefill / (config_.generation.prefill_rate * e.speed);
  }
  reschedule(e);
}

void Simulator::Impl::reschedule(Engine& e) {
  ++e.wake_token;
  if (e.batch.empty() || !e.alive) {
    e.carry = 0;
    return;
  }
  double ctx = 0;
  std::int64_t min_remaining = std::numeric_limits<std::int64_t>::max();
  for (RequestId id : e.batch) {
    const auto& r = manager_.request(id);
    ctx += static_cast<double>(r.context_len());
    min_remaining = std::min(min_remaining, r.remaining());
  }
  const auto b = static_cast<std::int32_t>(e.batch.size());
  e.clock_context = ctx / b + e.carry;
  e.clock = DecodeClock(config_.generation, b, e.clock_context, e.speed);
  const Seconds start = std::max(now_, e.stall_until);
  const Seconds wake =
      start + e.clock.time_for(static_cast<double>(min_remaining) - e.carry);
  push(wake, kClassEngine, Action::kEngineWake, e.id, e.wake_token);
}

void Simulator::Impl::on_engine_wake(const QueuedEvent& ev) {
  auto it = engines_.find(ev.instance);
  if (it == engines_.end()) return;
  Engine& e = it->second;
  if (!e.alive || ev.token != e.wake_token) return;
  admit(e);
  after_completions();
  dispatch();
}

// ---------------------------------------------------------------- plumbing

void Simulator::Impl::process_commands() {
  while (true) {
    auto commands = manager_.take_commands();
    if (commands.empty()) break;
    std::vector<InstanceId> touched;
    for (auto& cmd : commands) {
      if (auto* g = std::get_if<GenerateCommand>(&cmd)) {
        touched.push_back(g->instance);
      } else if (auto* c = std::get_if<CancelCommand>(&cmd)) {
        Engine& e = engine(c->instance);
        std::erase(e.batch, c->request_id);
        touched.push_back(c->instance);
      } else if (auto* p = std::get_if<PullWeightsCommand>(&cmd)) {
        manager_.transfer().start_pull(p->instance, p->version, config_.model_bytes,
                                       config_.instance_ingress, now_);
        note_transfer_change();
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (const auto& id : touched) {
      Engine& e = engine(id);
      if (e.alive) admit(e);
    }
  }
}

void Simulator::Impl::dispatch() {
  while (manager_.waiting_count() > 0) {
    if (manager_.dispatch_waiting(now_, 1) == 0) break;
    process_commands();
  }
}

void Simulator::Impl::after_completions() {
  if (seal_pending_) return;
  seal_pending_ = true;
  push(now_, kClassSeal, Action::kSeal);
}

void Simulator::Impl::note_transfer_change() { transfer_dirty_ = true; }

// ---------------------------------------------------------------- membership

std::int32_t Simulator::Impl::serving_remotes() const {
  std::int32_t n = 0;
  for (const auto& r : manager_.registry()) {
    if (r.local) continue;
    const bool pulling = r.status == InstanceStatus::kProvisioning &&
                         manager_.transfer().jobs().count(r.instance_id) != 0;
    if (r.status == InstanceStatus::kActive ||
        r.status == InstanceStatus::kPullingWeights || pulling) {
      ++n;
    }
  }
  return n;
}

void Simulator::Impl::on_trace(std::size_t index) {
  const auto& ev = trace_[index];
  InstanceId id{ev.instance_id};
  if (ev.kind == TraceKind::kPreempt) {
    // Output produced up to the revocation is flushed before it is recorded.
    auto it = engines_.find(id);
    if (it != engines_.end() && it->second.alive) sync(it->second);
  }
  log(ev.kind == TraceKind::kAllocate ? EventType::kAllocate : EventType::kPreempt,
      id.value);
  if (ev.kind == TraceKind::kAllocate) {
    if (!try_register(id)) {
      deferred_.push_back(id);
      ++result_.deferred_allocations;
    }
    return;
  }
  auto d = std::find(deferred_.begin(), deferred_.end(), id);
  if (d != deferred_.end()) {
    deferred_.erase(d);
    return;
  }
  preempt(id);
}

bool Simulator::Impl::try_register(const InstanceId& id) {
  const bool disagg = config_.mode == SimMode::kDisaggBalanced;
  if (manager_.register_instance(id, config_.remote_gpu_count, now_) !=
      RegistrationResult::kAccepted) {
    return false;
  }
  Engine e;
  e.id = id;
  e.last_sync = now_;
  engines_[id] = e;
  ActivityInterval interval;
  interval.instance_id = id;
  interval.start = now_;
  interval.end = now_;
  if (disagg) {
    interval.hourly_rate = config_.disagg_instance_rate
                               ? *config_.disagg_instance_rate
                               : config_.cost.reserved_rate / 4.0;
  }
  open_activity_[id] = result_.activity.size();
  result_.activity.push_back(interval);
  accounting_.remote_count_changed(now_, manager_.remote_count());
  process_commands();
  return true;
}

void Simulator::Impl::register_deferred() {
  while (!deferred_.empty() &&
         manager_.remote_count() < applied_cap(manager_.instance_cap())) {
    InstanceId id = deferred_.front();
    deferred_.pop_front();
    if (!try_register(id)) {
      deferred_.push_front(id);
      break;
    }
  }
}

void Simulator::Impl::preempt(const InstanceId& id) {
  auto it = engines_.find(id);
  if (it == engines_.end() || !it->second.alive) return;
  Engine& e = it->second;
  sync(e);
  manager_.on_preempt(id, now_);
  note_transfer_change();
  e.alive = false;
  e.batch.clear();
  e.carry = 0;
  ++e.wake_token;
  auto open = open_activity_.find(id);
  if (open != open_activity_.end()) {
    result_.activity[open->second].end = now_;
    open_activity_.erase(open);
  }
  accounting_.remote_count_changed(now_, manager_.remote_count());
  accounting_.remote_gone(id);
  process_commands();
  after_completions();
  dispatch();
  register_deferred();
  dispatch();
  maybe_fallback();
}

void Simulator::Impl::on_pull_event() {
  note_transfer_change();
  for (const auto& done : manager_.transfer().advance_to(now_)) {
    manager_.on_pull_complete(done.instance_id, done.version, now_);
    const auto& record = manager_.instance(done.instance_id);
    if (record.status == InstanceStatus::kActive) {
      Engine& e = engine(done.instance_id);
      e.last_sync = now_;
      accounting_.remote_activated(done.instance_id, now_);
      last_progress_ = now_;
    }
  }
  process_commands();
  dispatch();
}

// ---------------------------------------------------------------- phases

void Simulator::Impl::seeding_end() {
  for (const auto& id : local_ids_) sync(engine(id));
  seeding_time_ = now_ - step_start_;
  log(EventType::kSeedingEnd, {}, -1, static_cast<std::int64_t>(manager_.incomplete_count()),
      step_index_);
  manager_.set_local_online(false, now_);
  for (const auto& id : local_ids_) {
    Engine& e = engine(id);
    e.batch.clear();
    e.carry = 0;
    ++e.wake_token;
  }
  process_commands();
  dispatch();
  phase_ = Phase::kSwitching;
  ++phase_token_;
  push(now_ + config_.switch_cost, kClassPhase, Action::kSwitchDone, {}, phase_token_);
}

void Simulator::Impl::on_switch_done() {
  phase_ = Phase::kTraining;
  if (!idle_since_) idle_since_ = now_;
  try_train();
  maybe_fallback();
}

void Simulator::Impl::maybe_fallback() {
  if (phase_ != Phase::kTraining || trainer_busy_ || !train_queue_.empty() ||
      manager_.incomplete_count() == 0 || serving_remotes() > 0) {
    return;
  }
  if (config_.mode == SimMode::kDisaggBalanced) {
    throw Error("no rollout capacity left with work outstanding",
                Error::Kind::kSimulation);
  }
  phase_ = Phase::kFallback;
  fallback_ = true;
  ++phase_token_;
  log(EventType::kFallback, {}, -1, static_cast<std::int64_t>(manager_.incomplete_count()),
      step_index_);
  push(now_ + config_.switch_cost, kClassPhase, Action::kFallbackOnline, {}, phase_token_);
}

void Simulator::Impl::on_fallback_online() {
  manager_.set_local_online(true, now_);
  for (const auto& id : local_ids_) engine(id).last_sync = now_;
  dispatch();
  last_progress_ = now_;
}

// ---------------------------------------------------------------- trainer

void Simulator::Impl::try_train() {
  if (phase_ != Phase::kTraining || trainer_busy_ || train_queue_.empty()) return;
  if (idle_since_) {
    accounting_.trainer_wait(now_ - *idle_since_);
    idle_since_.reset();
  }
  const Microbatch& mb = train_queue_.front();
  const Seconds duration = microbatch_train_time(config_.trainer, mb.token_count);
  accounting_.trainer_train(duration);
  trainer_busy_ = true;
  log(EventType::kTrainStart, {}, -1, static_cast<std::int64_t>(mb.responses.size()),
      step_index_);
  push(now_ + duration, kClassTrainer, Action::kTrainDone);
}

void Simulator::Impl::on_train_done() {
  const Microbatch mb = std::move(train_queue_.front());
  train_queue_.pop_front();
  trainer_busy_ = false;
  for (RequestId id : mb.responses) trained_tokens_ += manager_.request(id).generated_len();
  ++microbatches_;
  last_progress_ = now_;
  log(EventType::kTrainEnd, {}, -1, mb.token_count, step_index_);
  if (!train_queue_.empty()) {
    try_train();
    return;
  }
  idle_since_ = now_;
  maybe_fallback();
}

void Simulator::Impl::on_seal() {
  seal_pending_ = false;
  std::vector<std::pair<RequestId, std::int64_t>> arrivals;
  for (RequestId id : manager_.take_completed()) {
    arrivals.emplace_back(id, manager_.request(id).context_len());
  }
  if (!arrivals.empty() && manager_.incomplete_count() == 0) {
    rollout_time_ = now_ - step_start_;
  }
  std::vector<Microbatch> sealed;
  if (auto mb = assembler_.push(arrivals, now_)) sealed.push_back(std::move(*mb));
  if (manager_.incomplete_count() == 0) {
    if (auto mb = assembler_.flush(now_)) sealed.push_back(std::move(*mb));
  }
  for (auto& mb : sealed) {
    log(EventType::kSeal, {}, -1, static_cast<std::int64_t>(mb.responses.size()),
        step_index_);
    train_queue_.push_back(std::move(mb));
  }
  if (manager_.incomplete_count() == 0) {
    if (phase_ == Phase::kSeeding) {
      seeding_end();
    } else if (phase_ == Phase::kFallback) {
      for (const auto& id : local_ids_) sync(engine(id));
      manager_.set_local_online(false, now_);
      phase_ = Phase::kSwitching;
      ++phase_token_;
      push(now_ + config_.switch_cost, kClassPhase, Action::kSwitchDone, {}, phase_token_);
    }
  }
  try_train();
}

void Simulator::Impl::on_lb_tick(std::uint64_t token) {
  if (token != lb_token_ || manager_.incomplete_count() == 0) return;
  const ProfileTable* profile =
      step_index_ >= 2 && profile_.ready() ? &profile_ : nullptr;
  const auto snapshot = manager_.load_snapshot();
  const GenerationModel& gm = config_.generation;
  const auto orders =
      lb_tick(snapshot, profile, manager_.mean_executing_context(), config_.lb,
              [&gm](double c) { return context_factor(gm, c); });
  for (const auto& order : orders) {
    sync(engine(order.from_instance));
    sync(engine(order.to_instance));
    manager_.apply_migration(order, now_);
    process_commands();
  }
  if (!orders.empty()) dispatch();
  push(now_ + config_.lb.lb_tick_seconds, kClassLbTick, Action::kLbTick, {}, lb_token_);
}

// ---------------------------------------------------------------- facade

Simulator::Simulator(SimConfig config, std::vector<TraceEvent> trace)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(trace))) {}

Simulator::~Simulator() = default;

std::optional<StepStats> Simulator::run_step() { return impl_->run_step(); }

bool Simulator::finished() const { return impl_->finished(); }

ExperimentResult Simulator::finish() { return impl_->finish(); }

ExperimentResult run_experiment(const SimConfig& config,
                                const std::vector<TraceEvent>& trace) {
  validate(config);
  Simulator sim(config, trace);
  while (sim.run_step()) {
  }
  return sim.finish();
}

}  // namespace spotrl
