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

#include "traces.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

namespace spotrl {

namespace {

Error parse_error(std::size_t line, const std::string& what) {
  return Error("trace line " + std::to_string(line) + ": " + what, Error::Kind::kParse);
}

}  // namespace

const char* to_string(TraceKind kind) {
  return kind == TraceKind::kAllocate ? "allocate" : "preempt";
}

std::vector<TraceEvent> parse_trace(std::istream& in) {
  std::vector<TraceEvent> events;
  std::vector<std::size_t> lines;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw parse_error(line_no, "invalid JSON");
    }
    if (!j.is_object()) throw parse_error(line_no, "expected an object");
    for (const auto& [key, value] : j.items()) {
      if (key != "at" && key != "kind" && key != "instance_id") {
        throw parse_error(line_no, "unknown field '" + key + "'");
      }
    }
    if (!j.contains("at") || !j["at"].is_number()) {
      throw parse_error(line_no, "missing numeric 'at'");
    }
    if (!j.contains("kind") || !j["kind"].is_string()) {
      throw parse_error(line_no, "missing 'kind'");
    }
    if (!j.contains("instance_id") || !j["instance_id"].is_string() ||
        j["instance_id"].get<std::string>().empty()) {
      throw parse_error(line_no, "missing 'instance_id'");
    }
    TraceEvent ev;
    ev.at = j["at"].get<double>();
    const auto kind = j["kind"].get<std::string>();
    if (kind == "allocate") {
      ev.kind = TraceKind::kAllocate;
    } else if (kind == "preempt") {
      ev.kind = TraceKind::kPreempt;
    } else {
      throw parse_error(line_no, "unknown kind '" + kind + "'");
    }
    ev.instance_id = j["instance_id"].get<std::string>();
    events.push_back(std::move(ev));
    lines.push_back(line_no);
  }
  validate_trace(events, lines);
  return events;
}

std::vector<TraceEvent> parse_trace_string(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

std::vector<TraceEvent> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace " + path, Error::Kind::kIo);
  return parse_trace(in);
}

void validate_trace(const std::vector<TraceEvent>& events,
                    const std::vector<std::size_t>& line_of) {
  std::map<std::string, bool> alive;
  Seconds last = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    const std::size_t line = line_of.empty() ? i + 1 : line_of[i];
    if (!std::isfinite(ev.at) || ev.at < 0) throw parse_error(line, "bad timestamp");
    if (ev.at < last) throw parse_error(line, "time goes backwards");
    last = ev.at;
    bool& up = alive[ev.instance_id];
    if (ev.kind == TraceKind::kAllocate) {
      if (up) throw parse_error(line, ev.instance_id + " allocated twice");
      up = true;
    } else {
      if (!up) throw parse_error(line, ev.instance_id + " preempted while not allocated");
      up = false;
    }
  }
}

std::string serialize_trace(const std::vector<TraceEvent>& events) {
  std::string out;
  for (const auto& ev : events) {
    nlohmann::ordered_json j;
    j["at"] = ev.at;
    j["kind"] = to_string(ev.kind);
    j["instance_id"] = ev.instance_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_trace(const std::string& path, const std::vector<TraceEvent>& events) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace " + path, Error::Kind::kIo);
  out << serialize_trace(events);
}

TraceSummary summarize(const std::vector<TraceEvent>& events,
                       std::optional<Seconds> duration) {
  TraceSummary s;
  if (events.empty() && !duration) return s;
  s.duration = duration ? *duration : events.back().at;
  std::int64_t count = 0;
  Seconds prev = 0;
  double area = 0;
  for (const auto& ev : events) {
    const Seconds t = std::min(ev.at, s.duration);
    area += static_cast<double>(count) * (t - prev);
    prev = t;
    if (ev.kind == TraceKind::kAllocate) {
      ++count;
      if (ev.at > 0) {
        ++s.allocations;
      } else {
        ++s.initial_instances;
      }
    } else {
      --count;
      ++s.preemptions;
    }
    s.peak_instances = std::max(s.peak_instances, count);
  }
  area += static_cast<double>(count) * std::max(0.0, s.duration - prev);
  s.avg_instances = s.duration > 0 ? area / s.duration : 0;
  return s;
}

std::int64_t alive_at(const std::vector<TraceEvent>& events, Seconds t) {
  std::int64_t count = 0;
  for (const auto& ev : events) {
    if (ev.at > t) break;
    count += ev.kind == TraceKind::kAllocate ? 1 : -1;
  }
  return count;
}

void validate(const SynthesisParams& p) {
  if (!(p.mean_up > 0) || !(p.mean_down > 0) || !(p.duration > 0) ||
      p.max_instances < 0 || p.replacement_prob < 0 || p.replacement_prob > 1) {
    throw Error("invalid synthesis parameters");
  }
}

std::vector<TraceEvent> synthesize(const SynthesisParams& p, std::uint64_t seed) {
  validate(p);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> up(1.0 / p.mean_up);
  std::exponential_distribution<double> down(1.0 / p.mean_down);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double p_up_initially = p.mean_up / (p.mean_up + p.mean_down);

  struct Stamped {
    TraceEvent ev;
    std::uint64_t order;
  };
  std::vector<Stamped> all;
  std::uint64_t order = 0;
  std::int64_t next_id = 1;
  auto fresh_id = [&] {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(next_id++));
    return p.id_prefix + buf;
  };

  for (std::int32_t slot = 0; slot < p.max_instances; ++slot) {
    bool is_up = coin(rng) < p_up_initially;
    Seconds t = 0;
    std::string id;
    if (is_up) {
      id = fresh_id();
      all.push_back({{0, TraceKind::kAllocate, id}, order++});
    } else {
      t = down(rng);
    }
    while (t < p.duration) {
      if (is_up) {
        t += up(rng);
        if (t >= p.duration) break;
        all.push_back({{t, TraceKind::kPreempt, id}, order++});
        if (coin(rng) < p.replacement_prob) {
          id = fresh_id();
          all.push_back({{t, TraceKind::kAllocate, id}, order++});
        } else {
          is_up = false;
          t += down(rng);
        }
      } else {
        id = fresh_id();
        all.push_back({{t, TraceKind::kAllocate, id}, order++});
        is_up = true;
      }
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Stamped& a, const Stamped& b) {
    return a.ev.at < b.ev.at || (a.ev.at == b.ev.at && a.order < b.order);
  });
  std::vector<TraceEvent> events;
  events.reserve(all.size());
  for (auto& s : all) events.push_back(std::move(s.ev));
  return events;
}

double expected_avg_instances(const SynthesisParams& p) {
  const double up = p.mean_up / std::max(1e-12, 1.0 - p.replacement_prob);
  if (p.replacement_prob >= 1.0) return p.max_instances;
  return p.max_instances * up / (up + p.mean_down);
}

double expected_preemption_rate(const SynthesisParams& p) {
  return p.max_instances / (p.mean_up + p.mean_down * (1.0 - p.replacement_prob));
}

}  // namespace spotrl
