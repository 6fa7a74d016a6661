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

#include "wire_hub.h"

#include <spdlog/spdlog.h>

namespace spotrl {

namespace {

[[noreturn]] void protocol_error(const std::string& what) {
  throw Error("wire: " + what, Error::Kind::kParse);
}

}  // namespace

WireHub::WireHub(RolloutManager& manager, EndpointResolver endpoint)
    : manager_(manager), endpoint_(std::move(endpoint)) {
  if (!endpoint_) endpoint_ = [](const std::string& agent) { return agent; };
}

WireHub::ConnectionId WireHub::open() {
  const ConnectionId id = next_id_++;
  connections_.emplace(id, Connection{});
  return id;
}

WireHub::Connection& WireHub::connection(ConnectionId id) {
  auto it = connections_.find(id);
  if (it == connections_.end() || it->second.closed) {
    throw Error("unknown or closed connection " + std::to_string(id));
  }
  return it->second;
}

const WireHub::Connection& WireHub::connection(ConnectionId id) const {
  auto it = connections_.find(id);
  if (it == connections_.end()) throw Error("unknown connection " + std::to_string(id));
  return it->second;
}

void WireHub::receive(ConnectionId id, std::string_view bytes, Seconds now) {
  auto& c = connection(id);
  c.lines.feed(bytes);
  while (auto line = c.lines.next_line()) {
    if (line->empty()) continue;
    handle(id, wire::decode(*line), now);
  }
}

bool WireHub::accept_output(const InstanceId& instance, std::int64_t request_id,
                            Seconds now) {
  if (request_id <= 0 || !manager_.has_request(static_cast<RequestId>(request_id))) {
    return false;
  }
  const auto rid = static_cast<RequestId>(request_id);
  const auto& request = manager_.request(rid);
  if (request.owner != instance) return false;
  if (manager_.instance(instance).weight_version != manager_.global_version()) return false;
  if (request.state == RequestState::kPending) manager_.on_scheduled(rid, now);
  return manager_.request(rid).state == RequestState::kExecuting;
}

void WireHub::handle(ConnectionId id, const wire::Message& message, Seconds now) {
  auto& c = connection(id);
  if (const auto* reg = std::get_if<wire::Register>(&message)) {
    if (c.registration) protocol_error("connection already registered");
    InstanceId instance{reg->instance_id};
    auto bound = by_instance_.find(instance);
    if (bound != by_instance_.end() && !connections_.at(bound->second).closed) {
      protocol_error("instance " + reg->instance_id + " is connected elsewhere");
    }
    c.registration = manager_.register_instance(instance, reg->gpu_count, now);
    if (*c.registration == RegistrationResult::kAccepted) {
      c.instance = instance;
      by_instance_[instance] = id;
    }
    return;
  }
  if (!c.instance) protocol_error(std::string(wire::type_name(message)) + " before register");
  const InstanceId& instance = *c.instance;

  if (const auto* st = std::get_if<wire::Status>(&message)) {
    c.status = *st;
    const auto& record = manager_.instance(instance);
    if (st->weight_version > record.weight_version &&
        st->weight_version <= manager_.global_version()) {
      // The live pull replaces the modelled transfer.
      manager_.transfer().abort(instance, now);
      manager_.on_pull_complete(instance, st->weight_version, now);
    }
    return;
  }
  if (const auto* tok = std::get_if<wire::Token>(&message)) {
    if (!accept_output(instance, tok->request_id, now)) {
      ++dropped_tokens_;
      return;
    }
    manager_.on_token(static_cast<RequestId>(tok->request_id), TokenId{tok->token_id}, now);
    return;
  }
  if (const auto* done = std::get_if<wire::Complete>(&message)) {
    if (!accept_output(instance, done->request_id, now)) return;
    manager_.on_complete(static_cast<RequestId>(done->request_id), now);
    return;
  }
  protocol_error(std::string(wire::type_name(message)) + " is a manager-to-instance message");
}

std::vector<RequestId> WireHub::close(ConnectionId id, Seconds now) {
  auto& c = connection(id);
  c.closed = true;
  if (!c.instance) return {};
  spdlog::info("connection {} for {} closed; treating as preemption", id, c.instance->value);
  by_instance_.erase(*c.instance);
  return manager_.on_preempt(*c.instance, now);
}

std::vector<ManagerCommand> WireHub::flush_commands() {
  std::vector<ManagerCommand> unrouted;
  for (auto& command : manager_.take_commands()) {
    const InstanceId& target = std::visit([](const auto& c) -> const InstanceId& {
      return c.instance;
    }, command);
    auto it = by_instance_.find(target);
    if (it == by_instance_.end()) {
      unrouted.push_back(std::move(command));
      continue;
    }
    auto& out = connections_.at(it->second).outbound;
    if (const auto* gen = std::get_if<GenerateCommand>(&command)) {
      const auto& request = manager_.request(gen->request_id);
      wire::Generate msg;
      msg.request_id = static_cast<std::int64_t>(gen->request_id);
      const std::uint32_t vocab = manager_.config().vocab_size;
      for (std::int32_t k = 0; k < gen->prompt_len; ++k) {
        // Prompt positions are negative so they never collide with output.
        msg.prompt_tokens.push_back(synthetic_token(gen->request_id, -1 - k, vocab).value);
      }
      for (std::int64_t k = 0; k < gen->prefix_len && k < request.generated_len(); ++k) {
        msg.prefix_tokens.push_back(request.generated[static_cast<std::size_t>(k)].value);
      }
      out += wire::encode(msg);
    } else if (const auto* cancel = std::get_if<CancelCommand>(&command)) {
      out += wire::encode(wire::Cancel{static_cast<std::int64_t>(cancel->request_id)});
    } else if (const auto* pull = std::get_if<PullWeightsCommand>(&command)) {
      out += wire::encode(wire::PullWeights{pull->version, endpoint_(pull->agent_id)});
    }
  }
  return unrouted;
}

std::string WireHub::take_outbound(ConnectionId id) {
  auto it = connections_.find(id);
  if (it == connections_.end()) return {};
  std::string out;
  out.swap(it->second.outbound);
  return out;
}

std::optional<InstanceId> WireHub::instance_of(ConnectionId id) const {
  return connection(id).instance;
}

std::optional<RegistrationResult> WireHub::registration(ConnectionId id) const {
  return connection(id).registration;
}

std::optional<wire::Status> WireHub::last_status(ConnectionId id) const {
  return connection(id).status;
}

}  // namespace spotrl
