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

#include "config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace spotrl {

namespace {

namespace pt = boost::property_tree;

std::string key_name(const std::string& section, const std::string& key) {
  return section + "." + key;
}

double to_double(const std::string& name, const std::string& text) {
  double v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error("config " + name + ": expected a number, got '" + text + "'",
                Error::Kind::kParse);
  }
  return v;
}

std::int64_t to_int(const std::string& name, const std::string& text) {
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error("config " + name + ": expected an integer, got '" + text + "'",
                Error::Kind::kParse);
  }
  return v;
}

std::uint64_t to_uint(const std::string& name, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error("config " + name + ": expected a non-negative integer, got '" + text + "'",
                Error::Kind::kParse);
  }
  return v;
}

bool to_bool(const std::string& name, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw Error("config " + name + ": expected a boolean, got '" + text + "'",
              Error::Kind::kParse);
}

std::string from_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

struct Key {
  std::string section;
  std::string key;
  std::function<void(SimConfig&, const std::string& name, const std::string& value)> set;
  // Empty string: not set.
  std::function<std::string(const SimConfig&)> get;
};

template <typename T>
Key real(std::string section, std::string key, T SimConfig::* member) {
  return {section, key,
          [member](SimConfig& c, const std::string& n, const std::string& v) {
            c.*member = static_cast<T>(to_double(n, v));
          },
          [member](const SimConfig& c) { return from_double(static_cast<double>(c.*member)); }};
}

template <typename T>
Key integer(std::string section, std::string key, T SimConfig::* member) {
  return {section, key,
          [member](SimConfig& c, const std::string& n, const std::string& v) {
            c.*member = static_cast<T>(to_int(n, v));
          },
          [member](const SimConfig& c) {
            return std::to_string(static_cast<std::int64_t>(c.*member));
          }};
}

Key boolean(std::string section, std::string key, bool SimConfig::* member) {
  return {section, key,
          [member](SimConfig& c, const std::string& n, const std::string& v) {
            c.*member = to_bool(n, v);
          },
          [member](const SimConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

// Nested fields: `part` picks the sub-struct.
template <typename P, typename T>
Key nested_real(std::string section, std::string key, P SimConfig::* part, T P::* member) {
  return {section, key,
          [=](SimConfig& c, const std::string& n, const std::string& v) {
            (c.*part).*member = static_cast<T>(to_double(n, v));
          },
          [=](const SimConfig& c) { return from_double(static_cast<double>((c.*part).*member)); }};
}

template <typename P, typename T>
Key nested_int(std::string section, std::string key, P SimConfig::* part, T P::* member) {
  return {section, key,
          [=](SimConfig& c, const std::string& n, const std::string& v) {
            (c.*part).*member = static_cast<T>(to_int(n, v));
          },
          [=](const SimConfig& c) {
            return std::to_string(static_cast<std::int64_t>((c.*part).*member));
          }};
}

template <typename P>
Key nested_bool(std::string section, std::string key, P SimConfig::* part, bool P::* member) {
  return {section, key,
          [=](SimConfig& c, const std::string& n, const std::string& v) {
            (c.*part).*member = to_bool(n, v);
          },
          [=](const SimConfig& c) { return std::string((c.*part).*member ? "true" : "false"); }};
}

template <typename T>
Key optional_real(std::string section, std::string key, std::optional<T> SimConfig::* member) {
  return {section, key,
          [member](SimConfig& c, const std::string& n, const std::string& v) {
            c.*member = static_cast<T>(to_double(n, v));
          },
          [member](const SimConfig& c) {
            return c.*member ? from_double(static_cast<double>(*(c.*member))) : std::string();
          }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"experiment", "seed",
                 [](SimConfig& c, const std::string& n, const std::string& v) {
                   c.seed = to_uint(n, v);
                 },
                 [](const SimConfig& c) { return std::to_string(c.seed); }});
    k.push_back({"experiment", "mode",
                 [](SimConfig& c, const std::string&, const std::string& v) {
                   c.mode = parse_mode(v);
                 },
                 [](const SimConfig& c) { return std::string(to_string(c.mode)); }});
    k.push_back(integer("experiment", "max_steps", &SimConfig::max_steps));
    k.push_back(real("experiment", "max_duration", &SimConfig::max_duration));
    k.push_back(boolean("experiment", "record_events", &SimConfig::record_events));
    k.push_back(boolean("experiment", "audit", &SimConfig::audit));

    k.push_back(integer("rollout", "prompt_count", &SimConfig::prompt_count));
    k.push_back(integer("rollout", "group_size", &SimConfig::group_size));
    k.push_back(integer("rollout", "m_b", &SimConfig::m_b));
    k.push_back(integer("rollout", "n_resv", &SimConfig::n_resv));
    k.push_back(real("rollout", "local_speed", &SimConfig::local_speed));
    k.push_back(real("rollout", "switch_cost", &SimConfig::switch_cost));
    k.push_back(integer("rollout", "remote_gpu_count", &SimConfig::remote_gpu_count));
    k.push_back(boolean("rollout", "migrate_on_preempt", &SimConfig::migrate_on_preempt));
    k.push_back(optional_real("rollout", "fixed_cap", &SimConfig::fixed_cap));
    k.push_back(optional_real("rollout", "fixed_t_seed", &SimConfig::fixed_t_seed));
    k.push_back({"rollout", "disagg_pool",
                 [](SimConfig& c, const std::string& n, const std::string& v) {
                   c.disagg_pool = static_cast<std::int32_t>(to_int(n, v));
                 },
                 [](const SimConfig& c) {
                   return c.disagg_pool ? std::to_string(*c.disagg_pool) : std::string();
                 }});

    using L = LengthDistribution;
    k.push_back(nested_real("lengths", "log_mean", &SimConfig::lengths, &L::log_mean));
    k.push_back(nested_real("lengths", "log_sigma", &SimConfig::lengths, &L::log_sigma));
    k.push_back(nested_int("lengths", "max_response_len", &SimConfig::lengths, &L::max_response_len));
    k.push_back(nested_real("lengths", "per_step_inflation", &SimConfig::lengths,
                            &L::per_step_inflation));
    k.push_back(nested_int("lengths", "prompt_min", &SimConfig::lengths, &L::prompt_min));
    k.push_back(nested_int("lengths", "prompt_max", &SimConfig::lengths, &L::prompt_max));

    using G = GenerationModel;
    k.push_back(nested_real("generation", "r_single", &SimConfig::generation, &G::r_single));
    k.push_back(nested_real("generation", "t_plateau", &SimConfig::generation, &G::t_plateau));
    k.push_back(nested_real("generation", "gamma", &SimConfig::generation, &G::gamma));
    k.push_back(nested_real("generation", "prefill_rate", &SimConfig::generation, &G::prefill_rate));
    k.push_back(nested_real("generation", "c_ref", &SimConfig::generation, &G::c_ref));
    k.push_back(nested_int("generation", "max_batch", &SimConfig::generation, &G::max_batch));

    using T = TrainerModel;
    k.push_back(nested_real("trainer", "fixed_overhead", &SimConfig::trainer, &T::fixed_overhead));
    k.push_back(nested_real("trainer", "per_token_time", &SimConfig::trainer, &T::per_token_time));

    using C = CostModel;
    k.push_back(nested_real("cost", "reserved_rate", &SimConfig::cost, &C::reserved_rate));
    k.push_back(nested_real("cost", "preemptible_rate", &SimConfig::cost, &C::preemptible_rate));
    k.push_back(nested_int("cost", "reserved_node_count", &SimConfig::cost,
                           &C::reserved_node_count));
    k.push_back(optional_real("cost", "disagg_instance_rate", &SimConfig::disagg_instance_rate));

    k.push_back(real("weights", "model_bytes", &SimConfig::model_bytes));
    k.push_back(real("weights", "instance_ingress", &SimConfig::instance_ingress));
    k.push_back(real("weights", "agent_egress", &SimConfig::agent_egress));
    k.push_back(integer("weights", "agents_per_node", &SimConfig::agents_per_node));
    k.push_back(real("weights", "staging_delay", &SimConfig::staging_delay));
    k.push_back(boolean("weights", "pull_mode", &SimConfig::pull_mode));

    using S = SchedulerConfig;
    k.push_back(nested_real("scheduler", "eta", &SimConfig::scheduler, &S::eta));
    k.push_back({"scheduler", "t_init_seconds",
                 [](SimConfig& c, const std::string& n, const std::string& v) {
                   c.scheduler.t_init_seconds = to_double(n, v);
                 },
                 [](const SimConfig& c) {
                   return c.scheduler.t_init_seconds ? from_double(*c.scheduler.t_init_seconds)
                                                     : std::string();
                 }});
    k.push_back(nested_bool("scheduler", "memory_enabled", &SimConfig::scheduler,
                            &S::memory_enabled));
    k.push_back(nested_bool("scheduler", "seeding_enabled", &SimConfig::scheduler,
                            &S::seeding_enabled));

    using B = LbConfig;
    k.push_back(boolean("load_balancer", "enabled", &SimConfig::lb_enabled));
    k.push_back(nested_int("load_balancer", "theta", &SimConfig::lb, &B::theta));
    k.push_back(nested_real("load_balancer", "epsilon_plateau", &SimConfig::lb,
                            &B::epsilon_plateau));
    k.push_back(nested_real("load_balancer", "lb_tick_seconds", &SimConfig::lb,
                            &B::lb_tick_seconds));
    return k;
  }();
  return table;
}

const Key* find_key(const std::string& section, const std::string& key) {
  for (const auto& k : keys()) {
    if (k.section == section && k.key == key) return &k;
  }
  return nullptr;
}

}  // namespace

SimConfig parse_config(std::istream& in, SimConfig base) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("config line " + std::to_string(e.line()) + ": " + e.message(),
                Error::Kind::kParse);
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw Error("config key '" + section + "' must be inside a [section]",
                  Error::Kind::kParse);
    }
    for (const auto& [key, value] : body) {
      const Key* k = find_key(section, key);
      if (k == nullptr) {
        throw Error("config: unknown key " + key_name(section, key), Error::Kind::kParse);
      }
      k->set(base, key_name(section, key), value.get_value<std::string>());
    }
  }
  validate(base);
  return base;
}

SimConfig parse_config_string(const std::string& text, SimConfig base) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

SimConfig load_config(const std::string& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path, Error::Kind::kIo);
  return parse_config(in, std::move(base));
}

std::string write_config(const SimConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : keys()) {
    const std::string value = k.get(config);
    if (value.empty()) continue;
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.key << " = " << value << '\n';
  }
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(key_name(k.section, k.key));
  return out;
}

}  // namespace spotrl
