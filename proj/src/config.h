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

#include <iosfwd>
#include <string>
#include <vector>

#include "cluster_sim.h"

namespace spotrl {

// INI experiment config:
//
//   [experiment]
//   seed = 7
//   mode = hybrid
//
// Every key maps to one SimConfig field; unknown sections or keys, and values
// that do not parse, are errors. Missing keys keep their defaults.
SimConfig parse_config(std::istream& in, SimConfig base = {});
SimConfig parse_config_string(const std::string& text, SimConfig base = {});
SimConfig load_config(const std::string& path, SimConfig base = {});

// Every key with its effective value, in INI form. Unset optional keys are
// omitted. parse_config(write_config(c)) == c.
std::string write_config(const SimConfig& config);

// "section.key" for every accepted key.
std::vector<std::string> config_keys();

}  // namespace spotrl
