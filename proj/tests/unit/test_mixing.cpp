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


#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mixsim/mixing.hpp"
#include "mixsim/protocols.hpp"

namespace mixsim {
namespace {

ProtocolSpec make(ProtocolKind kind, std::size_t n, std::size_t d = 2) {
  ProtocolSpec p;
  p.kind = kind;
  p.n = n;
  p.d = d;
  return p;
}

std::size_t tmix_of(const ProtocolSpec& spec) {
  EventSchedule s(spec);
  return estimate_tmix(s, s.consensus()).tmix_hat;
}

TEST(Mixing, AllReduceMixesInOneRound) {
  for (std::size_t n : {2u, 4u, 8u}) EXPECT_EQ(tmix_of(make(ProtocolKind::kAllReduce, n)), n);
}

TEST(Mixing, LocalStepMixesInOneLongRound) {
  for (std::size_t n : {2u, 4u, 8u}) {
    auto spec = make(ProtocolKind::kLocalStep, n);
    spec.local_steps = 2;
    EXPECT_EQ(tmix_of(spec), 2 * n);
  }
}

TEST(Mixing, RingGossipMatchesSpectralGap) {
  const std::size_t expected[] = {2, 4, 40};
  const std::size_t ns[] = {2, 4, 8};
  for (int i = 0; i < 3; ++i) {
    const auto spec = make(ProtocolKind::kSyncGossip, ns[i]);
    EXPECT_EQ(tmix_of(spec), expected[i]) << ns[i];
    EXPECT_EQ(tmix_of(spec), *theoretical_tmix(spec)) << ns[i];
  }
  EXPECT_EQ(spectral_tmix(Topology::ring(8)), 5u);
  EXPECT_EQ(spectral_tmix(Topology::complete(8)), 1u);
}

TEST(Mixing, FullSlackEqualsAllReduce) {
  auto spec = make(ProtocolKind::kSlackAverage, 4);
  spec.gamma = 1.0;
  EXPECT_EQ(tmix_of(spec), tmix_of(make(ProtocolKind::kAllReduce, 4)));
}

TEST(Mixing, HalfSlackHalvesPerRound) {
  auto spec = make(ProtocolKind::kSlackAverage, 4);
  spec.gamma = 0.5;
  EXPECT_EQ(tmix_of(spec), 4u);
}

TEST(Mixing, SparsificationMultipliesByPartitionCount) {
  for (std::size_t n : {2u, 4u}) {
    const auto spec = ProtocolSpec::sparsified(0.25, make(ProtocolKind::kAllReduce, n, 8));
    EXPECT_EQ(tmix_of(spec), 4 * n);
  }
}

TEST(Mixing, DeterministicEstimatesMatchTheory) {
  std::vector<ProtocolSpec> specs = {make(ProtocolKind::kPerfect, 3),
                                     make(ProtocolKind::kAllReduce, 5)};
  auto local = make(ProtocolKind::kLocalStep, 3);
  local.local_steps = 4;
  specs.push_back(local);
  auto gossip = make(ProtocolKind::kSyncGossip, 6);
  gossip.comm_period = 2;
  specs.push_back(gossip);
  auto slack = make(ProtocolKind::kSlackAverage, 3);
  slack.gamma = 0.2;
  specs.push_back(slack);
  for (const auto& spec : specs) EXPECT_EQ(tmix_of(spec), *theoretical_tmix(spec)) << spec.label();
}

TEST(Mixing, MixingTimeGrowsWithLocalSteps) {
  std::size_t previous = 0;
  for (std::size_t m : {1u, 2u, 4u, 8u}) {
    auto spec = make(ProtocolKind::kLocalStep, 4);
    spec.local_steps = m;
    const std::size_t t = tmix_of(spec);
    EXPECT_GT(t, previous);
    previous = t;
  }
}

TEST(Mixing, MixingTimeGrowsWithSparsity) {
  std::size_t previous = 0;
  for (double eta : {1.0, 0.5, 0.25, 0.125}) {
    const std::size_t t =
        tmix_of(ProtocolSpec::sparsified(eta, make(ProtocolKind::kAllReduce, 4, 8)));
    EXPECT_GT(t, previous);
    previous = t;
  }
}

TEST(Mixing, RandomizedKindsReportWorstCaseAtLeastQuantile) {
  for (auto kind : {ProtocolKind::kAsyncGossip, ProtocolKind::kAsyncPS}) {
    EventSchedule s(make(kind, 4));
    const auto est = estimate_tmix(s, s.consensus());
    EXPECT_GE(est.tmix_hat, 1u);
    ASSERT_TRUE(est.tmix_worst.has_value());
    EXPECT_GE(*est.tmix_worst, est.tmix_hat);
    EXPECT_LE(est.ratio_at_tmix, kHalf * (1 + kHalvingSlack));
  }
}

TEST(Mixing, NoCommNeverMixes) {
  EventSchedule s(make(ProtocolKind::kNoComm, 2));
  MixingOptions options;
  options.max_window = 64;
  EXPECT_THROW(estimate_tmix(s, layout_consensus(s), options), MixingNotObserved);
  EXPECT_THROW(characterize(s, options), MixingNotObserved);
}

TEST(Mixing, CharacterizePassesForEveryCommunicatingKind) {
  std::vector<ProtocolSpec> specs;
  for (auto kind : {ProtocolKind::kPerfect, ProtocolKind::kAllReduce, ProtocolKind::kLocalStep,
                    ProtocolKind::kSyncGossip, ProtocolKind::kAsyncGossip,
                    ProtocolKind::kAsyncPS, ProtocolKind::kSlackAverage}) {
    specs.push_back(make(kind, 4));
  }
  specs.back().gamma = 0.5;
  specs.push_back(ProtocolSpec::sparsified(0.5, make(ProtocolKind::kAllReduce, 4)));
  for (const auto& spec : specs) {
    const auto report = characterize(EventSchedule(spec));
    EXPECT_TRUE(report.passing()) << spec.label();
    EXPECT_TRUE(report.assumption1_ok) << spec.label();
    EXPECT_TRUE(report.assumption3_ok) << spec.label();
    EXPECT_TRUE(report.projections_ok) << spec.label();
    EXPECT_TRUE(report.violations.empty()) << spec.label();
    EXPECT_LE(report.xi_hat, report.xi_declared * (1 + 1e-6)) << spec.label();
  }
}

TEST(Mixing, ParameterServerScaleIsNearDeclaredBound) {
  const auto report = characterize(EventSchedule(make(ProtocolKind::kAsyncPS, 3)));
  EXPECT_NEAR(report.xi_declared, 2.0, 1e-12);
  EXPECT_GT(report.xi_hat, 1.0);
  EXPECT_LE(report.xi_hat, 2.0 * (1 + 1e-6));
}

TEST(Mixing, CommutationCheckRejectsNonCommutingOperator) {
  // Row stochastic but not column stochastic: moves the block mean.
  Eigen::MatrixXd skew(2, 2);
  skew << 1.0, 0.0, 0.5, 0.5;
  const std::vector<LinearOperator> ops = {LinearOperator::block_mix(skew, 2)};
  const auto minf = ConsensusOperator::block_average(2, 2);
  const auto result = verify_assumption1(ops, minf, 1e-9);
  EXPECT_FALSE(result.ok);
  EXPECT_GT(result.max_deviation, 1e-3);
}

TEST(Mixing, CommutationCheckAcceptsDoublyStochasticOperators) {
  EventSchedule s(make(ProtocolKind::kAsyncGossip, 5));
  const auto result = verify_assumption1(s, s.consensus(), 200, 1e-9);
  EXPECT_TRUE(result.ok);
  EXPECT_GE(result.operators_checked, 1u);
}

TEST(Mixing, DecayCheckFlagsUnderstatedMixingTime) {
  EventSchedule s(make(ProtocolKind::kSyncGossip, 8));
  // The ring needs 40 slots to halve; claiming 8 must produce violations.
  const auto violations = verify_lemma1(s, s.consensus(), 8, 1.0, 8, 32);
  EXPECT_FALSE(violations.empty());
  EXPECT_TRUE(verify_lemma1(s, s.consensus(), 40, 1.0, 8, 32).empty());
}

TEST(Mixing, EstimateIsDeterministicPerSeed) {
  EventSchedule s(make(ProtocolKind::kAsyncGossip, 4));
  const auto a = estimate_tmix(s, s.consensus());
  const auto b = estimate_tmix(s, s.consensus());
  EXPECT_EQ(a.tmix_hat, b.tmix_hat);
  EXPECT_EQ(a.tmix_worst, b.tmix_worst);
}

}  // namespace
}  // namespace mixsim
