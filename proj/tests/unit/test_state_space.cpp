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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mixsim/protocols.hpp"
#include "mixsim/random.hpp"
#include "mixsim/state_space.hpp"

namespace mixsim {
namespace {

Eigen::MatrixXd averaging(std::size_t n) {
  return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n),
                                   1.0 / static_cast<double>(n));
}

double max_abs_diff(const StateVector& a, const StateVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(StateVector, RejectsEmptyShapes) {
  EXPECT_THROW(StateVector(0, 2), Error);
  EXPECT_THROW(StateVector(2, 0), Error);
  EXPECT_THROW(StateVector(2, 2, {1.0, 2.0, 3.0}), Error);
}

TEST(StateVector, RejectsNonFiniteValues) {
  EXPECT_THROW(StateVector(1, 2, {1.0, std::nan("")}), Error);
}

TEST(LinearOperator, IdentityLeavesStateUnchanged) {
  std::mt19937_64 rng(3);
  const StateVector x = StateVector::gaussian(3, 2, rng);
  EXPECT_EQ(op_apply(LinearOperator::identity(3, 2), x), x);
}

TEST(LinearOperator, AveragingTwoBlocksGivesTheirMean) {
  const auto avg = LinearOperator::block_mix(averaging(2), 1);
  const StateVector y = op_apply(avg, StateVector(2, 1, {1.0, 3.0}));
  EXPECT_DOUBLE_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
}

TEST(LinearOperator, DenseOperatorMatchesMatrixVectorProduct) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(6, 6);
  for (Eigen::Index i = 0; i < 36; ++i) m.data()[i] = normal(rng);
  const auto op = LinearOperator::dense(m, 3, 2);
  const StateVector x = StateVector::gaussian(3, 2, rng);
  const Eigen::VectorXd expected = m * x.eigen();
  const StateVector y = op.apply(x);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(y[i], expected(static_cast<Eigen::Index>(i)), 1e-12 * (1.0 + std::abs(expected(i))));
  }
}

TEST(WindowProduct, EmptyWindowIsIdentity) {
  std::vector<LinearOperator> ops{LinearOperator::block_mix(averaging(2), 1)};
  const auto p = op_window_product(ops, 0, 0);
  EXPECT_TRUE(p.to_dense().isApprox(Eigen::MatrixXd::Identity(2, 2)));
}

TEST(WindowProduct, RepeatedAveragingEqualsSingleAveraging) {
  const auto avg = LinearOperator::block_mix(averaging(3), 2);
  std::vector<LinearOperator> ops{avg, avg};
  EXPECT_TRUE(op_window_product(ops, 0, 2).to_dense().isApprox(avg.to_dense(), 1e-12));
}

TEST(WindowProduct, TwoGossipEdgesMatchDenseProduct) {
  const auto e01 = LinearOperator::pair_average(3, 2, 0, 1);
  const auto e12 = LinearOperator::pair_average(3, 2, 1, 2);
  std::vector<LinearOperator> ops{e01, e12};
  // Applied in order: e01 first, then e12.
  const Eigen::MatrixXd expected = e12.to_dense() * e01.to_dense();
  EXPECT_TRUE(op_window_product(ops, 0, 2).to_dense().isApprox(expected, 1e-12));
}

TEST(WindowProduct, RejectsReversedBounds) {
  std::vector<LinearOperator> ops{LinearOperator::identity(2, 1)};
  EXPECT_THROW(op_window_product(ops, 1, 0), Error);
}

TEST(OperatorNorm, IdentityHasNormOne) {
  EXPECT_NEAR(op_norm(LinearOperator::identity(4, 3), 200, 1e-10).value, 1.0, 1e-6);
}

TEST(OperatorNorm, SymmetricAveragingHasNormOne) {
  const auto avg = LinearOperator::block_mix(averaging(4), 3);
  const Eigen::VectorXd eig =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(avg.to_dense()).eigenvalues();
  const double oracle = eig.cwiseAbs().maxCoeff();
  EXPECT_NEAR(op_norm(avg, 200, 1e-10).value, oracle, 1e-6);
  EXPECT_NEAR(oracle, 1.0, 1e-12);
}

TEST(OperatorNorm, ServerCopyHasNormSqrtTwo) {
  // (s, w) -> (s, s) is [[I, 0], [I, 0]] with singular values sqrt(2) and 0.
  const auto copy = LinearOperator::copy_block(2, 3, 0, 1);
  const StateVector y = copy.apply(StateVector(2, 3, {1, 2, 3, 7, 8, 9}));
  EXPECT_EQ(y, StateVector(2, 3, {1, 2, 3, 1, 2, 3}));
  EXPECT_NEAR(op_norm(copy, 200, 1e-12).value, std::sqrt(2.0), 1e-6);
}

TEST(OperatorNorm, MatrixFreePowerIterationAgreesWithDense) {
  // Beyond the dense limit the estimate comes from power iteration.
  const auto avg = LinearOperator::block_mix(averaging(8), 600);
  ASSERT_FALSE(avg.dense_available());
  const NormEstimate est = op_norm(avg, 500, 1e-12);
  EXPECT_FALSE(est.exact);
  EXPECT_NEAR(est.value, 1.0, 1e-6);
}

TEST(BlockRead, ReturnsTheRequestedBlock) {
  const StateVector x(2, 2, {1, 2, 3, 4});
  const auto b = block_read(x, {1, BlockProjection::Kind::kRead});
  EXPECT_EQ(b, (std::vector<double>{3, 4}));
}

TEST(BlockRead, ConsensusBlocksAreTheWorkerMean) {
  std::mt19937_64 rng(5);
  const StateVector x = StateVector::gaussian(4, 3, rng);
  const StateVector mx = ConsensusOperator::block_average(4, 3).apply(x);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += x.block(i)[j] / 4.0;
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(block_read(mx, {i, BlockProjection::Kind::kRead})[j], mean, 1e-14);
    }
  }
}

TEST(BlockRead, ZeroStateGivesZeroBlock) {
  EXPECT_EQ(block_read(StateVector(3, 2), {0, BlockProjection::Kind::kRead}),
            (std::vector<double>{0, 0}));
}

TEST(BlockRead, RejectsOutOfRangeBlock) {
  EXPECT_THROW(block_read(StateVector(2, 2), {2, BlockProjection::Kind::kRead}), Error);
}

TEST(BlockAccumulate, ZeroScaleLeavesStateUnchanged) {
  const StateVector x(2, 2, {1, 2, 3, 4});
  const std::vector<double> delta{5, 6};
  EXPECT_EQ(block_accumulate(x, {0, BlockProjection::Kind::kWrite}, delta, 0.0), x);
}

TEST(BlockAccumulate, ScaledDeltaLandsInTargetBlockOnly) {
  const std::vector<double> delta{1, 1};
  const StateVector y =
      block_accumulate(StateVector(3, 2), {0, BlockProjection::Kind::kWrite}, delta, -0.5);
  EXPECT_EQ(y, StateVector(3, 2, {-0.5, -0.5, 0, 0, 0, 0}));
}

TEST(BlockAccumulate, WritesToDifferentBlocksCommute) {
  std::mt19937_64 rng(9);
  const StateVector x = StateVector::gaussian(3, 2, rng);
  const std::vector<double> a{1, -2}, b{0.5, 4};
  const BlockProjection p0{0, BlockProjection::Kind::kWrite};
  const BlockProjection p2{2, BlockProjection::Kind::kWrite};
  const auto ab = block_accumulate(block_accumulate(x, p0, a, 0.3), p2, b, -1.5);
  const auto ba = block_accumulate(block_accumulate(x, p2, b, -1.5), p0, a, 0.3);
  EXPECT_EQ(ab, ba);
}

TEST(BlockAccumulate, RejectsWrongDeltaLength) {
  const std::vector<double> delta{1, 2, 3};
  EXPECT_THROW(block_accumulate(StateVector(2, 2), {0, BlockProjection::Kind::kWrite}, delta, 1.0),
               Error);
}

TEST(BlockProjection, MatrixIsCoordinateProjection) {
  for (auto kind : {BlockProjection::Kind::kRead, BlockProjection::Kind::kWrite}) {
    for (std::size_t b = 0; b < 3; ++b) {
      const Eigen::MatrixXd m = BlockProjection{b, kind}.matrix(3, 4);
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        EXPECT_TRUE(m.data()[i] == 0.0 || m.data()[i] == 1.0);
      }
      EXPECT_LE(m.rowwise().sum().maxCoeff(), 1.0);
      EXPECT_LE(m.colwise().sum().maxCoeff(), 1.0);
    }
  }
}

TEST(BlockProjection, ReadThenEmbedIsIdempotentOnItsBlock) {
  const Eigen::MatrixXd read = BlockProjection{1, BlockProjection::Kind::kRead}.matrix(3, 2);
  const Eigen::MatrixXd write = BlockProjection{1, BlockProjection::Kind::kWrite}.matrix(3, 2);
  const Eigen::MatrixXd p = write * read;
  EXPECT_TRUE((p * p).isApprox(p));
}

// Operators emitted by a representative set of protocols at small size.
std::vector<LinearOperator> registered_operators() {
  std::vector<LinearOperator> ops;
  auto add = [&](ProtocolSpec spec) {
    EventSchedule schedule(spec);
    for (auto& op : schedule.operator_family()) ops.push_back(op);
  };
  ProtocolSpec p;
  p.n = 4;
  p.d = 3;
  for (auto kind : {ProtocolKind::kPerfect, ProtocolKind::kAllReduce, ProtocolKind::kLocalStep,
                    ProtocolKind::kSyncGossip, ProtocolKind::kAsyncGossip, ProtocolKind::kAsyncPS,
                    ProtocolKind::kSlackAverage}) {
    p.kind = kind;
    p.gamma = 0.3;
    add(p);
  }
  ProtocolSpec inner;
  inner.kind = ProtocolKind::kAllReduce;
  inner.n = 4;
  inner.d = 3;
  add(ProtocolSpec::sparsified(0.5, inner));
  ops.push_back(LinearOperator::slack_average(4, 3, 0.25));
  ops.push_back(LinearOperator::broadcast(5, 3, 0));
  return ops;
}

TEST(LinearOperator, EveryRegisteredOperatorIsLinear) {
  for (const auto& op : registered_operators()) {
    EXPECT_LE(linearity_defect(op, 100, 7), 1e-10) << op.name();
  }
}

TEST(LinearOperator, DenseFormAgreesWithMatrixFreeApplication) {
  std::mt19937_64 rng(13);
  for (const auto& op : registered_operators()) {
    ASSERT_TRUE(op.dense_available());
    const Eigen::MatrixXd m = op.to_dense();
    for (int probe = 0; probe < 5; ++probe) {
      const StateVector x = StateVector::gaussian(op.blocks(), op.dim(), rng);
      const Eigen::VectorXd expected = m * x.eigen();
      const StateVector y = op.apply(x);
      EXPECT_LE((y.eigen() - expected).norm(), 1e-12 * (1.0 + expected.norm())) << op.name();
      const Eigen::VectorXd expected_t = m.transpose() * x.eigen();
      EXPECT_LE((op.apply_transpose(x).eigen() - expected_t).norm(),
                1e-12 * (1.0 + expected_t.norm()))
          << op.name();
    }
  }
}

TEST(LinearOperator, InPlaceApplicationMatchesApply) {
  std::mt19937_64 rng(17);
  StateVector scratch;
  for (const auto& op : registered_operators()) {
    StateVector x = StateVector::gaussian(op.blocks(), op.dim(), rng);
    const StateVector y = op.apply(x);
    op.apply_in_place(x, scratch);
    EXPECT_LE(max_abs_diff(x, y), 1e-14) << op.name();
  }
}

TEST(LinearOperator, RejectsMismatchedState) {
  EXPECT_THROW(LinearOperator::identity(2, 2).apply(StateVector(3, 2)), Error);
}

TEST(ConsensusOperator, IdempotentOnRandomProbes) {
  std::mt19937_64 rng(19);
  for (const auto& minf : {ConsensusOperator::block_average(4, 3),
                           ConsensusOperator::server_broadcast(5, 3)}) {
    for (int probe = 0; probe < 100; ++probe) {
      const StateVector x = StateVector::gaussian(minf.op().blocks(), 3, rng);
      const StateVector once = minf.apply(x);
      EXPECT_LE(max_abs_diff(minf.apply(once), once), 1e-10 * (1.0 + x.norm()));
    }
  }
}

TEST(ConsensusOperator, AllBlocksOfConsensusAreEqual) {
  // The representative block choice is immaterial.
  std::mt19937_64 rng(23);
  for (const auto& minf : {ConsensusOperator::block_average(4, 3),
                           ConsensusOperator::server_broadcast(5, 3)}) {
    const StateVector mx = minf.apply(StateVector::gaussian(minf.op().blocks(), 3, rng));
    for (std::size_t b = 1; b < mx.blocks(); ++b) {
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(mx.block(b)[j], mx.block(0)[j], 1e-14);
    }
  }
}

TEST(DenseSpectralNorm, HandlesRankDeficientProducts) {
  // Product of two disjoint edge averages on a ring: rank deficient, norm 1.
  const auto e01 = LinearOperator::pair_average(4, 1, 0, 1);
  const auto e23 = LinearOperator::pair_average(4, 1, 2, 3);
  std::vector<LinearOperator> ops{e01, e23};
  const Eigen::MatrixXd p = op_window_product(ops, 0, 2).to_dense();
  EXPECT_NEAR(dense_spectral_norm(p), 1.0, 1e-12);
}

}  // namespace
}  // namespace mixsim
