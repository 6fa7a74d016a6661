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

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rollout_manager.h"
#include "wire.h"

namespace spotrl {

// Binds wire connections to a RolloutManager. Each connection carries one
// instance: its first message must be a register. Transport is the caller's
// job; the hub only sees bytes in and bytes out, so it runs unchanged over
// sockets or in-memory pipes.
class WireHub {
 public:
  using ConnectionId = std::uint64_t;
  using EndpointResolver = std::function<std::string(const std::string& agent_id)>;

  // `endpoint` maps a transfer agent id to the address sent in pull_weights.
  explicit WireHub(RolloutManager& manager, EndpointResolver endpoint = {});

  ConnectionId open();
  // Processes every complete line. Protocol violations throw
  // Error::Kind::kParse; the caller is expected to close the connection.
  void receive(ConnectionId connection, std::string_view bytes, Seconds now);
  void handle(ConnectionId connection, const wire::Message& message, Seconds now);
  // A registered instance that disconnects is treated as preempted. Returns
  // the requests that were moved off it.
  std::vector<RequestId> close(ConnectionId connection, Seconds now);

  // Drains the manager's commands into per-connection outbound bytes.
  // Commands for instances without a connection (local engines) are returned.
  std::vector<ManagerCommand> flush_commands();
  std::string take_outbound(ConnectionId connection);

  std::optional<InstanceId> instance_of(ConnectionId connection) const;
  std::optional<RegistrationResult> registration(ConnectionId connection) const;
  std::optional<wire::Status> last_status(ConnectionId connection) const;
  // Tokens that arrived for a request the sender no longer owns (cancelled or
  // migrated while in flight) or from an instance on stale weights.
  std::int64_t dropped_tokens() const { return dropped_tokens_; }

 private:
  struct Connection {
    wire::LineBuffer lines;
    std::optional<InstanceId> instance;
    std::optional<RegistrationResult> registration;
    std::optional<wire::Status> status;
    std::string outbound;
    bool closed = false;
  };

  Connection& connection(ConnectionId id);
  const Connection& connection(ConnectionId id) const;
  // True when `request` may take output from `instance` right now.
  bool accept_output(const InstanceId& instance, std::int64_t request, Seconds now);

  RolloutManager& manager_;
  EndpointResolver endpoint_;
  std::map<ConnectionId, Connection> connections_;
  std::map<InstanceId, ConnectionId> by_instance_;
  ConnectionId next_id_ = 1;
  std::int64_t dropped_tokens_ = 0;
};

}  // namespace spotrl
