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

#include "mixsim/protocols.hpp"
#include "mixsim/state_space.hpp"

namespace mixsim {

// The halving condition passes when ratio <= kHalf * (1 + kHalvingSlack).
inline constexpr double kHalf = 0.5;
inline constexpr double kHalvingSlack = 1e-9;

struct MixingOptions {
  std::size_t probes = 64;
  std::size_t starts = 32;
  std::size_t max_window = 20000;
  // Fraction of (start, probe) pairs that must halve for randomized kinds.
  // Deterministic kinds always use 1.
  double quantile = 0.95;
  std::uint64_t seed = 1;
  // Exact check of the worst direction for deterministic kinds.
  bool dense_check = true;
  // Deterministic kinds use every start residue of the schedule period when
  // the period is at most this long, `starts` sampled residues otherwise.
  std::size_t max_residue_starts = 256;
  // Extra sampled starts for randomized kinds, used only for the worst-case
  // window. The worst case over event sequences is a tail statistic and
  // needs far more schedule samples than the quantile.
  std::size_t worst_case_starts = 1024;
  // Sampled windows for the scale and per-window contraction checks.
  std::size_t windows = 32;
};

struct TmixEstimate {
  std::size_t tmix_hat = 0;
  // First window at which every sampled pair halved. Equals tmix_hat for
  // deterministic kinds; absent if not reached within max_window.
  std::optional<std::size_t> tmix_worst;
  double quantile = 1.0;
  std::size_t probes = 0;
  std::size_t starts = 0;
  bool dense_checked = false;
  // Quantile ratio at tmix_hat.
  double ratio_at_tmix = 0.0;
};

// Consensus map used for metrics on a schedule's layout. Unlike
// EventSchedule::consensus() this exists for NoComm too (block averaging).
ConsensusOperator layout_consensus(const EventSchedule& schedule);

// Smallest window w such that ||P X - Minf X|| <= ||X - Minf X|| / 2 holds
// at the quantile over sampled starts and probes, P the product of w slots.
// Throws MixingNotObserved when no window up to max_window qualifies.
TmixEstimate estimate_tmix(const EventSchedule& schedule,
                           const ConsensusOperator& minf,
                           const MixingOptions& options = {});

struct Assumption1Result {
  bool ok = false;
  double max_deviation = 0.0;
  std::size_t operators_checked = 0;
};

// Checks Minf M X = M Minf X = Minf X and Minf Minf X = Minf X relative to
// ||X|| for every distinct operator emitted in slots [0, horizon).
Assumption1Result verify_assumption1(const EventSchedule& schedule,
                                     const ConsensusOperator& minf,
                                     std::size_t horizon, double tol,
                                     std::size_t probes = 100,
                                     std::uint64_t seed = 1);
Assumption1Result verify_assumption1(std::span<const LinearOperator> ops,
                                     const ConsensusOperator& minf, double tol,
                                     std::size_t probes = 100,
                                     std::uint64_t seed = 1);

// Read/write projections agree with the consensus representative: the read
// block of Minf X is block 0 of Minf X, and a gain-scaled write moves the
// consensus state by exactly the update.
struct ProjectionCheck {
  bool ok = false;
  double max_deviation = 0.0;
};
ProjectionCheck verify_projections(const EventSchedule& schedule,
                                   const ConsensusOperator& minf,
                                   std::size_t horizon, double tol = 1e-10,
                                   std::size_t probes = 8,
                                   std::uint64_t seed = 1);

struct ScaleBound {
  double xi_hat = 0.0;
  double declared = 0.0;
  bool ok = false;
  // Windows whose norm was computed exactly from the dense product.
  std::size_t exact_windows = 0;
};

// Largest observed ||prod M_k X|| / ||X|| over sampled windows of length at
// most `horizon`, including consensus directions and ||Minf||.
ScaleBound verify_scale_bound(const EventSchedule& schedule, std::size_t horizon,
                              std::size_t probes, std::size_t windows = 32,
                              std::uint64_t seed = 1);

struct Lemma1Violation {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t probe = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Evaluates ||prod_{k=s}^{t-1} M_k X - Minf X|| against
// 2^-floor((t-s)/tmix) (1 + xi) xi ||X|| on sampled windows with lengths in
// [0, 4 tmix]. Returns every violation.
std::vector<Lemma1Violation> verify_lemma1(const EventSchedule& schedule,
                                           const ConsensusOperator& minf,
                                           std::size_t tmix, double xi,
                                           std::size_t probes,
                                           std::size_t windows,
                                           std::uint64_t seed = 1);

// Gossip applications needed to halve the consensus complement. Throws for a
// disconnected topology.
std::size_t spectral_tmix(const Topology& topology);

struct MixingReport {
  std::string protocol;
  std::size_t n = 0;
  std::size_t tmix_hat = 0;
  std::optional<std::size_t> tmix_worst;
  std::optional<std::size_t> tmix_theory;
  double xi_hat = 0.0;
  double xi_declared = 0.0;
  double quantile = 1.0;
  std::size_t probes = 0;
  std::size_t starts = 0;
  bool dense_checked = false;
  bool assumption1_ok = false;
  double assumption1_deviation = 0.0;
  bool assumption3_ok = false;
  bool projections_ok = false;
  // Window size handed to the per-window contraction check.
  std::size_t lemma1_tmix = 0;
  std::vector<Lemma1Violation> violations;

  bool passing() const noexcept {
    return assumption1_ok && assumption3_ok && projections_ok && violations.empty();
  }
};

// Runs every mixing check on one protocol. Throws MixingNotObserved for
// protocols that never reach consensus.
MixingReport characterize(const EventSchedule& schedule,
                          const MixingOptions& options = {});

}  // namespace mixsim
