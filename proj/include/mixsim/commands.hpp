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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace mixsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct CommandOptions {
  std::string config_path;
  // Overrides [experiment] out.
  std::optional<std::string> out_dir;
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;
};

// Characterizes every protocol x n point: mixing.csv, mixing.json.
int cmd_mixing(const CommandOptions& options, std::ostream& out, std::ostream& err);
// Runs every sweep point for every seed: traces/<key>/seed_<s>.csv, summary.json.
int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err);
// Evaluates bound checks, rate fits and the sequence-inequality suite: bounds.json.
int cmd_check(const CommandOptions& options, std::ostream& out, std::ostream& err);
// Rate fit only: fit.json, fit.csv.
int cmd_fit(const CommandOptions& options, std::ostream& out, std::ostream& err);

// Calls fn(i) for i in [0, count) on up to `jobs` threads. Rethrows the
// first exception after all workers stop.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace mixsim
