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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixsim/objectives.hpp"
#include "mixsim/optimizers.hpp"
#include "mixsim/protocols.hpp"
#include "mixsim/state_space.hpp"

namespace mixsim {

enum class X0Policy { kZeros, kRandom };

std::string to_string(X0Policy policy);
X0Policy parse_x0_policy(const std::string& name);

struct StepScheduleSpec {
  ScheduleKind kind = ScheduleKind::kConstant;
  double alpha = 0.01;
  std::vector<double> table;
  // Mixing time for the tuned step-size schedule; defaults to the protocol's
  // theoretical value.
  std::optional<std::size_t> tmix;
};

struct RunConfig {
  ProtocolSpec protocol;
  ObjectiveParams objective;
  NoiseParams noise;
  OptimizerSpec optimizer;
  StepScheduleSpec schedule;
  std::size_t T = 1000;
  std::uint64_t seed = 0;
  X0Policy x0 = X0Policy::kZeros;
  double x0_scale = 1.0;
  // Record every `cadence` steps.
  std::size_t cadence = 1;
  // Overrides the replicated x0, e.g. to start workers apart.
  std::optional<StateVector> initial_state;

  void validate() const;
};

// Canonical text form of a config without its seed; runs differing only in
// seed share it.
std::string canonical_string(const RunConfig& config);
// FNV-1a 64 of canonical_string, as 16 hex digits.
std::string config_hash(const RunConfig& config);

struct TraceRow {
  std::size_t t = 0;
  double alpha = 0.0;
  double f = 0.0;               // f(x_t)
  double grad_sq = 0.0;         // ||grad f(x_t)||^2
  double stat_dist = 0.0;       // (1/n) sum_i ||x_i - mean||^2
  double view_gap_sq = 0.0;     // ||x_t - u_t||^2
  double delta_gap_sq = 0.0;    // ||delta_t^(x) - delta_t^(u)||^2
  std::size_t worker = 0;
  // Not part of the CSV. Reconstructed for SGD traces read back from disk.
  double delta_x_sq = 0.0;      // ||delta_t^(x)||^2
  double grad_gap_sq = 0.0;     // ||grad f(x_t) - grad f(u_t)||^2
};

struct TraceSummary {
  std::size_t T = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string protocol;
  std::string optimizer;
  std::size_t n = 0;
  std::size_t cadence = 1;
  double f0 = 0.0;              // f(x_0)
  double f_final = 0.0;         // f(x_T)
  double grad_sq_final = 0.0;   // ||grad f(x_T)||^2
  double mean_grad_sq = 0.0;    // over recorded rows
  double min_grad_sq = 0.0;
  double alpha_T = 0.0;         // alpha at t = T
  double max_decomposition_residual = 0.0;
  double max_consensus_residual = 0.0;
  bool diverged = false;
  std::string diagnostic;
  // Whether delta_x_sq and grad_gap_sq are populated.
  bool extras_available = true;
};

struct Trace {
  std::vector<TraceRow> rows;
  TraceSummary summary;
};

// x_0 of the run: zeros, or N(0, x0_scale^2 I) drawn from the seed.
std::vector<double> initial_point(const RunConfig& config);

// Block 0 of Minf X.
std::vector<double> consensus_state(const StateVector& x, const ConsensusOperator& minf);

// Mean squared deviation of worker blocks from their mean. `first_worker`
// skips a leading server block.
double stationary_distance(const StateVector& x, std::size_t first_worker = 0);

// Simulates the weakly consistent dynamics X_{t+1} = M_t (X_t + alpha_t D_t).
Trace run(const RunConfig& config);

// Single-iterate reference: x_{t+1} = x_t - alpha_t delta_t with the same
// noise stream, as if every worker always saw the consensus state.
Trace run_sequential(const RunConfig& config);

// Resolved step-size schedule for a config.
StepSchedule resolve_schedule(const RunConfig& config, const Objective& objective,
                              const GradientOracle& oracle);

}  // namespace mixsim
