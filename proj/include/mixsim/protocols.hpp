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
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mixsim/state_space.hpp"

namespace mixsim {

enum class ProtocolKind {
  kPerfect,
  kAllReduce,
  kLocalStep,
  kSyncGossip,
  kAsyncGossip,
  kAsyncPS,
  kSlackAverage,
  kSparsified,
  kNoComm,
};

enum class TopologyKind { kRing, kComplete };

std::string to_string(ProtocolKind kind);
ProtocolKind parse_protocol_kind(const std::string& name);
std::string to_string(TopologyKind kind);
TopologyKind parse_topology_kind(const std::string& name);

// Undirected graph on n workers with its symmetric doubly stochastic gossip
// matrix.
struct Topology {
  TopologyKind kind = TopologyKind::kRing;
  std::size_t n = 0;
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd gossip;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  // Second-largest eigenvalue modulus of `gossip`.
  double slem = 0.0;
  double spectral_gap() const noexcept { return 1.0 - slem; }

  // W = I/2 + (S + S^T)/4 with S the cyclic shift.
  static Topology ring(std::size_t n);
  // W = 11^T / n.
  static Topology complete(std::size_t n);
  static Topology make(TopologyKind kind, std::size_t n);
};

// Second-largest eigenvalue modulus of a symmetric stochastic matrix.
double second_largest_modulus(const Eigen::MatrixXd& w);

struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::kAllReduce;
  std::size_t n = 2;
  std::size_t d = 1;
  std::uint64_t seed = 0;

  std::size_t local_steps = 1;                   // LocalStep m
  TopologyKind topology = TopologyKind::kRing;   // gossip kinds
  std::size_t comm_period = 1;                   // SyncGossip
  std::size_t pull_delay = 0;                    // AsyncPS staleness in slots
  double gamma = 1.0;                            // SlackAverage
  double eta = 1.0;                              // Sparsified fraction
  std::shared_ptr<const ProtocolSpec> inner;     // Sparsified only

  // Throws Error(kInvalidArgument / kUnsupported) on invalid combinations.
  void validate() const;

  bool has_server() const noexcept { return kind == ProtocolKind::kAsyncPS; }
  std::size_t blocks() const noexcept { return has_server() ? n + 1 : n; }
  bool randomized() const noexcept;
  double declared_xi() const;
  // Number of coordinate partitions; 1 unless sparsified.
  std::size_t partitions() const;
  // Short human-readable identifier, e.g. "localstep(m=2)".
  std::string label() const;

  static ProtocolSpec sparsified(double eta, ProtocolSpec inner);
};

// Slots between consecutive communication events of a non-sparsified kind;
// 0 for kinds that never communicate.
std::size_t communication_cadence(const ProtocolSpec& spec);

// Applications of a map contracting the consensus complement by `rho` needed
// to halve it; 1 when rho = 0.
std::size_t halving_applications(double rho);

std::optional<std::size_t> theoretical_tmix(const ProtocolSpec& spec);

// Communication events and projections generated by a protocol. Slot t holds
// the operators applied after computation t and before computation t + 1.
// Random kinds derive every slot from (seed, t), so any slot can be generated
// on demand and replays are exact.
class EventSchedule {
 public:
  explicit EventSchedule(ProtocolSpec spec);

  const ProtocolSpec& spec() const noexcept { return spec_; }
  std::size_t workers() const noexcept { return spec_.n; }
  std::size_t blocks() const noexcept { return spec_.blocks(); }
  std::size_t dim() const noexcept { return spec_.d; }
  bool randomized() const noexcept { return spec_.randomized(); }
  // Length of the repeating operator pattern for deterministic kinds.
  std::optional<std::size_t> period() const;

  // Operators of slot t, in application order. Empty means identity.
  void slot(std::size_t t, std::vector<LinearOperator>& out) const;
  std::vector<LinearOperator> slot(std::size_t t) const;
  LinearOperator slot_operator(std::size_t t) const;
  // Composite of slots s, ..., s + length - 1.
  LinearOperator window(std::size_t s, std::size_t length) const;

  // Worker in [0, n) computing at time t.
  std::size_t acting_worker(std::size_t t) const;
  BlockProjection read_proj(std::size_t t) const;
  BlockProjection write_proj(std::size_t t) const;
  // Factor applied to updates written through write_proj so that the
  // consensus state moves by exactly the update. n for replicated layouts,
  // 1 when writes go to the server.
  double write_gain() const noexcept;

  // Throws Error(kNoConsensus) for NoComm.
  ConsensusOperator consensus() const;
  // Every distinct operator the schedule can emit.
  std::vector<LinearOperator> operator_family() const;

 private:
  ProtocolSpec spec_;
  ProtocolKind base_kind_;
  std::size_t parts_ = 1;
  std::size_t cadence_ = 1;
  std::optional<Topology> topology_;
  // Indexed [part] for averaging/gossip/slack kinds, [edge * parts + part]
  // for async gossip, [worker] for the parameter server.
  std::vector<LinearOperator> cache_;
};

ConsensusOperator consensus_operator(const ProtocolSpec& spec);

}  // namespace mixsim
