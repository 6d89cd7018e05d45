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

#include "mixsim/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mixsim/random.hpp"

namespace mixsim {

namespace {

constexpr std::uint64_t kWorkerSalt = hash_label("acting-worker");
constexpr std::uint64_t kEdgeSalt = hash_label("gossip-edge");

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

bool sparsifiable(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kPerfect:
    case ProtocolKind::kAllReduce:
    case ProtocolKind::kLocalStep:
    case ProtocolKind::kSyncGossip:
    case ProtocolKind::kAsyncGossip:
    case ProtocolKind::kSlackAverage:
      return true;
    default:
      return false;
  }
}

// Inner protocol of a sparsified spec with the outer shape and seed.
ProtocolSpec effective_inner(const ProtocolSpec& spec) {
  ProtocolSpec inner = *spec.inner;
  inner.n = spec.n;
  inner.d = spec.d;
  inner.seed = spec.seed;
  return inner;
}

}  // namespace

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kPerfect: return "perfect";
    case ProtocolKind::kAllReduce: return "allreduce";
    case ProtocolKind::kLocalStep: return "localstep";
    case ProtocolKind::kSyncGossip: return "syncgossip";
    case ProtocolKind::kAsyncGossip: return "asyncgossip";
    case ProtocolKind::kAsyncPS: return "asyncps";
    case ProtocolKind::kSlackAverage: return "slack";
    case ProtocolKind::kSparsified: return "sparsified";
    case ProtocolKind::kNoComm: return "nocomm";
  }
  return "unknown";
}

ProtocolKind parse_protocol_kind(const std::string& name) {
  static const std::pair<const char*, ProtocolKind> kNames[] = {
      {"perfect", ProtocolKind::kPerfect},
      {"allreduce", ProtocolKind::kAllReduce},
      {"localstep", ProtocolKind::kLocalStep},
      {"reducedfrequency", ProtocolKind::kLocalStep},
      {"syncgossip", ProtocolKind::kSyncGossip},
      {"asyncgossip", ProtocolKind::kAsyncGossip},
      {"asyncps", ProtocolKind::kAsyncPS},
      {"slack", ProtocolKind::kSlackAverage},
      {"slackaverage", ProtocolKind::kSlackAverage},
      {"sparsified", ProtocolKind::kSparsified},
      {"nocomm", ProtocolKind::kNoComm},
  };
  for (const auto& [label, kind] : kNames) {
    if (name == label) return kind;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown protocol kind '" + name + "'");
}

std::string to_string(TopologyKind kind) {
  return kind == TopologyKind::kRing ? "ring" : "complete";
}

TopologyKind parse_topology_kind(const std::string& name) {
  if (name == "ring") return TopologyKind::kRing;
  if (name == "complete") return TopologyKind::kComplete;
  throw Error(ErrorCode::kInvalidArgument, "unknown topology '" + name + "'");
}

// ---------------------------------------------------------------------------
// Topology

double second_largest_modulus(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = solver.eigenvalues();  // ascending
  if (ev.size() < 2) return 0.0;
  double slem = 0.0;
  for (Eigen::Index i = 0; i + 1 < ev.size(); ++i) {
    slem = std::max(slem, std::abs(ev(i)));
  }
  return slem < 1e-12 ? 0.0 : slem;
}

Topology Topology::ring(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "ring needs n >= 2");
  Topology topo;
  topo.kind = TopologyKind::kRing;
  topo.n = n;
  const auto N = static_cast<Eigen::Index>(n);
  topo.adjacency = Eigen::MatrixXd::Zero(N, N);
  topo.gossip = 0.5 * Eigen::MatrixXd::Identity(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::Index next = (i + 1) % N;
    topo.gossip(i, next) += 0.25;
    topo.gossip(next, i) += 0.25;
    topo.adjacency(i, next) = 1.0;
    topo.adjacency(next, i) = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t next = (i + 1) % n;
    const std::pair<std::size_t, std::size_t> edge{std::min(i, next), std::max(i, next)};
    if (std::find(topo.edges.begin(), topo.edges.end(), edge) == topo.edges.end()) {
      topo.edges.push_back(edge);
    }
  }
  topo.slem = second_largest_modulus(topo.gossip);
  return topo;
}

Topology Topology::complete(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "complete graph needs n >= 2");
  Topology topo;
  topo.kind = TopologyKind::kComplete;
  topo.n = n;
  const auto N = static_cast<Eigen::Index>(n);
  topo.adjacency = Eigen::MatrixXd::Ones(N, N) - Eigen::MatrixXd::Identity(N, N);
  topo.gossip = Eigen::MatrixXd::Constant(N, N, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) topo.edges.emplace_back(i, j);
  }
  topo.slem = 0.0;
  return topo;
}

Topology Topology::make(TopologyKind kind, std::size_t n) {
  return kind == TopologyKind::kRing ? ring(n) : complete(n);
}

// ---------------------------------------------------------------------------
// ProtocolSpec

void ProtocolSpec::validate() const {
  auto invalid = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (n < 2) invalid("protocol needs n >= 2 workers");
  if (d < 1) invalid("protocol needs d >= 1");
  switch (kind) {
    case ProtocolKind::kLocalStep:
      if (local_steps < 1) invalid("local step count m must be >= 1");
      break;
    case ProtocolKind::kSyncGossip:
      if (comm_period < 1) invalid("comm_period must be >= 1");
      break;
    case ProtocolKind::kSlackAverage:
      if (!(gamma > 0.0 && gamma <= 1.0)) invalid("gamma must lie in (0, 1]");
      break;
    case ProtocolKind::kSparsified: {
      if (!(eta > 0.0 && eta <= 1.0)) invalid("eta must lie in (0, 1]");
      if (!inner) invalid("sparsified protocol needs an inner protocol");
      if (!sparsifiable(inner->kind)) {
        throw Error(ErrorCode::kUnsupported,
                    "unsupported combination: sparsified over " +
                        to_string(inner->kind));
      }
      effective_inner(*this).validate();
      break;
    }
    default:
      break;
  }
}

bool ProtocolSpec::randomized() const noexcept {
  if (kind == ProtocolKind::kSparsified) return inner && inner->randomized();
  return kind == ProtocolKind::kAsyncGossip || kind == ProtocolKind::kAsyncPS;
}

double ProtocolSpec::declared_xi() const {
  if (kind == ProtocolKind::kAsyncPS) return std::sqrt(static_cast<double>(n + 1));
  return 1.0;
}

std::size_t ProtocolSpec::partitions() const {
  if (kind != ProtocolKind::kSparsified) return 1;
  return static_cast<std::size_t>(std::ceil(1.0 / eta - 1e-9));
}

std::string ProtocolSpec::label() const {
  switch (kind) {
    case ProtocolKind::kLocalStep:
      return "localstep(m=" + std::to_string(local_steps) + ")";
    case ProtocolKind::kSyncGossip:
      return "syncgossip(" + to_string(topology) +
             ",cp=" + std::to_string(comm_period) + ")";
    case ProtocolKind::kAsyncGossip:
      return "asyncgossip(" + to_string(topology) + ")";
    case ProtocolKind::kAsyncPS:
      return "asyncps(tau=" + std::to_string(pull_delay) + ")";
    case ProtocolKind::kSlackAverage:
      return "slack(gamma=" + format_number(gamma) + ")";
    case ProtocolKind::kSparsified:
      return "sparsified(eta=" + format_number(eta) + "," +
             (inner ? inner->label() : std::string("?")) + ")";
    default:
      return to_string(kind);
  }
}

ProtocolSpec ProtocolSpec::sparsified(double eta, ProtocolSpec inner) {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::kSparsified;
  spec.n = inner.n;
  spec.d = inner.d;
  spec.seed = inner.seed;
  spec.eta = eta;
  spec.inner = std::make_shared<const ProtocolSpec>(std::move(inner));
  return spec;
}

std::size_t communication_cadence(const ProtocolSpec& spec) {
  switch (spec.kind) {
    case ProtocolKind::kPerfect:
    case ProtocolKind::kAsyncGossip:
    case ProtocolKind::kAsyncPS:
      return 1;
    case ProtocolKind::kAllReduce:
    case ProtocolKind::kSlackAverage:
      return spec.n;
    case ProtocolKind::kLocalStep:
      return spec.local_steps * spec.n;
    case ProtocolKind::kSyncGossip:
      return spec.comm_period * spec.n;
    case ProtocolKind::kSparsified:
      return communication_cadence(effective_inner(spec));
    case ProtocolKind::kNoComm:
      return 0;
  }
  return 0;
}

std::size_t halving_applications(double rho) {
  if (!(rho >= 0.0) || rho >= 1.0 - 1e-12) {
    throw Error(ErrorCode::kInvalidArgument,
                "contraction factor must lie in [0, 1) to halve");
  }
  if (rho < 1e-12) return 1;
  const double raw = std::log(2.0) / std::log(1.0 / rho);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

std::optional<std::size_t> theoretical_tmix(const ProtocolSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ProtocolKind::kPerfect:
      return 1;
    case ProtocolKind::kAllReduce:
      return spec.n;
    case ProtocolKind::kLocalStep:
      return spec.local_steps * spec.n;
    case ProtocolKind::kSlackAverage:
      return spec.n * halving_applications(1.0 - spec.gamma);
    case ProtocolKind::kSyncGossip: {
      const Topology topo = Topology::make(spec.topology, spec.n);
      return spec.comm_period * spec.n * halving_applications(topo.slem);
    }
    case ProtocolKind::kSparsified: {
      auto inner = theoretical_tmix(effective_inner(spec));
      if (!inner) return std::nullopt;
      return spec.partitions() * *inner;
    }
    default:
      return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// EventSchedule

EventSchedule::EventSchedule(ProtocolSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  ProtocolSpec base = spec_;
  if (spec_.kind == ProtocolKind::kSparsified) {
    base = effective_inner(spec_);
    parts_ = spec_.partitions();
  }
  base_kind_ = base.kind;
  cadence_ = communication_cadence(base);

  const std::size_t n = spec_.n;
  const std::size_t d = spec_.d;
  auto mask = [&](std::size_t part) { return CoordinateMask{parts_, part}; };
  switch (base_kind_) {
    case ProtocolKind::kPerfect:
    case ProtocolKind::kAllReduce:
    case ProtocolKind::kLocalStep:
      for (std::size_t p = 0; p < parts_; ++p) {
        cache_.push_back(LinearOperator::slack_average(n, d, 1.0, mask(p)));
      }
      break;
    case ProtocolKind::kSlackAverage:
      for (std::size_t p = 0; p < parts_; ++p) {
        cache_.push_back(LinearOperator::slack_average(n, d, base.gamma, mask(p)));
      }
      break;
    case ProtocolKind::kSyncGossip:
      topology_ = Topology::make(base.topology, n);
      for (std::size_t p = 0; p < parts_; ++p) {
        cache_.push_back(
            LinearOperator::block_mix(topology_->gossip, d, mask(p), "gossip"));
      }
      break;
    case ProtocolKind::kAsyncGossip:
      topology_ = Topology::make(base.topology, n);
      for (const auto& [i, j] : topology_->edges) {
        for (std::size_t p = 0; p < parts_; ++p) {
          cache_.push_back(LinearOperator::pair_average(n, d, i, j, mask(p)));
        }
      }
      break;
    case ProtocolKind::kAsyncPS:
      for (std::size_t w = 0; w < n; ++w) {
        cache_.push_back(LinearOperator::copy_block(n + 1, d, 0, w + 1));
      }
      break;
    default:
      break;
  }
}

std::optional<std::size_t> EventSchedule::period() const {
  if (randomized()) return std::nullopt;
  if (cadence_ == 0) return 1;
  return cadence_ * parts_;
}

void EventSchedule::slot(std::size_t t, std::vector<LinearOperator>& out) const {
  out.clear();
  switch (base_kind_) {
    case ProtocolKind::kNoComm:
      return;
    case ProtocolKind::kAsyncPS: {
      const std::size_t target = acting_worker(t + 1 + spec_.pull_delay);
      out.push_back(cache_[target]);
      return;
    }
    case ProtocolKind::kAsyncGossip: {
      const std::size_t edges = topology_->edges.size();
      const auto edge = static_cast<std::size_t>(
          counter_uniform(spec_.seed, t, kEdgeSalt, edges));
      out.push_back(cache_[edge * parts_ + t % parts_]);
      return;
    }
    default:
      break;
  }
  if ((t + 1) % cadence_ != 0) return;
  const std::size_t k = (t + 1) / cadence_ - 1;
  out.push_back(cache_[k % parts_]);
}

std::vector<LinearOperator> EventSchedule::slot(std::size_t t) const {
  std::vector<LinearOperator> out;
  slot(t, out);
  return out;
}

LinearOperator EventSchedule::slot_operator(std::size_t t) const {
  return LinearOperator::compose(slot(t), blocks(), dim());
}

LinearOperator EventSchedule::window(std::size_t s, std::size_t length) const {
  std::vector<LinearOperator> ops;
  std::vector<LinearOperator> scratch;
  for (std::size_t t = s; t < s + length; ++t) {
    slot(t, scratch);
    ops.insert(ops.end(), scratch.begin(), scratch.end());
  }
  return LinearOperator::compose(ops, blocks(), dim());
}

std::size_t EventSchedule::acting_worker(std::size_t t) const {
  if (!randomized()) return t % spec_.n;
  return static_cast<std::size_t>(counter_uniform(spec_.seed, t, kWorkerSalt, spec_.n));
}

BlockProjection EventSchedule::read_proj(std::size_t t) const {
  const std::size_t w = acting_worker(t);
  return {spec_.has_server() ? w + 1 : w, BlockProjection::Kind::kRead};
}

BlockProjection EventSchedule::write_proj(std::size_t t) const {
  if (spec_.has_server()) return {0, BlockProjection::Kind::kWrite};
  return {acting_worker(t), BlockProjection::Kind::kWrite};
}

double EventSchedule::write_gain() const noexcept {
  return spec_.has_server() ? 1.0 : static_cast<double>(spec_.n);
}

ConsensusOperator EventSchedule::consensus() const {
  return consensus_operator(spec_);
}

std::vector<LinearOperator> EventSchedule::operator_family() const {
  return cache_;
}

ConsensusOperator consensus_operator(const ProtocolSpec& spec) {
  spec.validate();
  if (spec.kind == ProtocolKind::kNoComm) {
    throw Error(ErrorCode::kNoConsensus, "no consensus operator exists");
  }
  if (spec.has_server()) {
    return ConsensusOperator::server_broadcast(spec.blocks(), spec.d);
  }
  return ConsensusOperator::block_average(spec.blocks(), spec.d);
}

}  // namespace mixsim
