// Copyright 2026 The mixsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mixsim/engine.hpp"
#include "mixsim/mixing.hpp"

namespace mixsim {

struct ProtocolEntry {
  // Section suffix, e.g. "gossip" for [protocol.gossip].
  std::string label;
  ProtocolSpec spec;
};

// Cartesian sweep axes. An empty axis keeps the base value; an axis only
// applies to protocols that have the parameter.
struct SweepAxes {
  std::vector<std::size_t> n;
  std::vector<std::size_t> local_steps;
  std::vector<double> gamma;
  std::vector<double> eta;
  std::vector<std::size_t> T;
};

struct MixingSettings {
  MixingOptions options;
  double tolerance = 1e-10;
};

struct CheckSettings {
  std::size_t lemma5_instances = 1000;
  std::size_t lemma5_max_length = 64;
  std::uint64_t lemma5_seed = 1;
  // Maximum relative deviation of the per-tmix leading coefficient.
  double fit_tolerance = 0.25;
  double spearman_min = 0.8;
};

struct ExperimentConfig {
  std::string name;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  // Everything but the protocol, which comes from `protocols`.
  RunConfig base;
  std::vector<ProtocolEntry> protocols;
  SweepAxes sweep;
  MixingSettings mixing;
  CheckSettings check;
  // Hash of the canonical form of the parsed file.
  std::string hash;
};

// Parses the sectioned key-value format documented in docs/config_format.md.
// Throws Error(kConfig) with the offending line on any problem, including
// unknown sections and keys.
ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

struct RunPoint {
  // Unique, filesystem-safe key such as "local-n2-m8-T4000".
  std::string key;
  std::string protocol_label;
  // Sweep value that scales the mixing time (local steps), 1 otherwise.
  std::size_t multiplier = 1;
  RunConfig config;
};

// Expands protocols x sweep axes into run points, seeds excluded.
std::vector<RunPoint> expand_grid(const ExperimentConfig& config);

// Protocol x n grid for mixing characterization.
std::vector<ProtocolEntry> expand_mixing_grid(const ExperimentConfig& config);

}  // namespace mixsim
