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

#include "mixsim/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixsim {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kNoConsensus: return "no-consensus";
    case ErrorCode::kMixingNotObserved: return "mixing-not-observed";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// StateVector

StateVector::StateVector(std::size_t blocks, std::size_t dim)
    : StateVector(blocks, dim, std::vector<double>(blocks * dim, 0.0)) {}

StateVector::StateVector(std::size_t blocks, std::size_t dim,
                         std::vector<double> values)
    : blocks_(blocks), dim_(dim), values_(std::move(values)) {
  if (blocks == 0 || dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "state needs W >= 1 and d >= 1");
  }
  if (values_.size() != blocks * dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "state has " + std::to_string(values_.size()) +
                    " values, expected W*d = " + std::to_string(blocks * dim));
  }
  if (!all_finite()) {
    throw Error(ErrorCode::kNonFinite, "state values must be finite");
  }
}

StateVector StateVector::replicated(std::size_t blocks,
                                    std::span<const double> block) {
  std::vector<double> values;
  values.reserve(blocks * block.size());
  for (std::size_t i = 0; i < blocks; ++i) {
    values.insert(values.end(), block.begin(), block.end());
  }
  return StateVector(blocks, block.size(), std::move(values));
}

StateVector StateVector::gaussian(std::size_t blocks, std::size_t dim,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> values(blocks * dim);
  for (auto& v : values) v = normal(rng);
  return StateVector(blocks, dim, std::move(values));
}

std::span<const double> StateVector::block(std::size_t i) const {
  if (i >= blocks_) {
    throw Error(ErrorCode::kInvalidArgument,
                "block index " + std::to_string(i) + " out of range");
  }
  return std::span<const double>(values_).subspan(i * dim_, dim_);
}

std::span<double> StateVector::block(std::size_t i) {
  if (i >= blocks_) {
    throw Error(ErrorCode::kInvalidArgument,
                "block index " + std::to_string(i) + " out of range");
  }
  return std::span<double>(values_).subspan(i * dim_, dim_);
}

double StateVector::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double StateVector::norm() const { return std::sqrt(squared_norm()); }

bool StateVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

StateVector& StateVector::axpy(double a, const StateVector& x) {
  if (!same_shape(x)) {
    throw Error(ErrorCode::kDimensionMismatch, "axpy shape mismatch");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
  return *this;
}

StateVector& StateVector::scale(double a) {
  for (auto& v : values_) v *= a;
  return *this;
}

StateVector operator-(const StateVector& a, const StateVector& b) {
  StateVector out = a;
  out.axpy(-1.0, b);
  return out;
}

StateVector operator+(const StateVector& a, const StateVector& b) {
  StateVector out = a;
  out.axpy(1.0, b);
  return out;
}

// ---------------------------------------------------------------------------
// Block projections

Eigen::MatrixXd BlockProjection::matrix(std::size_t blocks,
                                        std::size_t dim) const {
  if (block_index >= blocks) {
    throw Error(ErrorCode::kInvalidArgument, "projection block out of range");
  }
  const auto n = static_cast<Eigen::Index>(blocks * dim);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd select = Eigen::MatrixXd::Zero(d, n);
  const auto offset = static_cast<Eigen::Index>(block_index * dim);
  for (Eigen::Index j = 0; j < d; ++j) select(j, offset + j) = 1.0;
  if (kind == Kind::kWrite) return select.transpose();
  return select;
}

std::vector<double> block_read(const StateVector& x, const BlockProjection& p) {
  auto b = x.block(p.block_index);
  return {b.begin(), b.end()};
}

void block_accumulate_in_place(StateVector& x, const BlockProjection& p,
                               std::span<const double> delta, double scale) {
  if (delta.size() != x.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "delta length must equal d");
  }
  if (!std::all_of(delta.begin(), delta.end(),
                   [](double v) { return std::isfinite(v); }) ||
      !std::isfinite(scale)) {
    throw Error(ErrorCode::kNonFinite, "non-finite update");
  }
  auto b = x.block(p.block_index);
  for (std::size_t j = 0; j < b.size(); ++j) b[j] += scale * delta[j];
}

StateVector block_accumulate(const StateVector& x, const BlockProjection& p,
                             std::span<const double> delta, double scale) {
  StateVector out = x;
  block_accumulate_in_place(out, p, delta, scale);
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

class IdentityKernel final : public OperatorKernel {
 public:
  void apply(const StateVector& in, StateVector& out) const override { out = in; }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    out = in;
  }
  std::string name() const override { return "identity"; }
};

class DenseKernel final : public OperatorKernel {
 public:
  DenseKernel(Eigen::MatrixXd m, std::string name)
      : m_(std::move(m)), name_(std::move(name)) {}
  void apply(const StateVector& in, StateVector& out) const override {
    out = in;
    out.eigen() = m_ * in.eigen();
  }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    out = in;
    out.eigen() = m_.transpose() * in.eigen();
  }
  std::string name() const override { return name_; }

 private:
  Eigen::MatrixXd m_;
  std::string name_;
};

class BlockMixKernel final : public OperatorKernel {
 public:
  BlockMixKernel(Eigen::MatrixXd mix, CoordinateMask mask, std::string name)
      : mix_(std::move(mix)), mask_(mask), name_(std::move(name)) {}

  void apply(const StateVector& in, StateVector& out) const override {
    run(mix_, in, out);
  }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    run(mix_.transpose(), in, out);
  }
  std::string name() const override { return name_; }

 private:
  template <typename M>
  void run(const M& mix, const StateVector& in, StateVector& out) const {
    out = in;
    const std::size_t w = in.blocks();
    const std::size_t d = in.dim();
    for (std::size_t j = 0; j < d; ++j) {
      if (!mask_.active(j)) continue;
      for (std::size_t i = 0; i < w; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) {
          const double a = mix(static_cast<Eigen::Index>(i),
                               static_cast<Eigen::Index>(k));
          if (a != 0.0) acc += a * in[k * d + j];
        }
        out[i * d + j] = acc;
      }
    }
  }

  Eigen::MatrixXd mix_;
  CoordinateMask mask_;
  std::string name_;
};

class SlackAverageKernel final : public OperatorKernel {
 public:
  SlackAverageKernel(double gamma, CoordinateMask mask)
      : gamma_(gamma), mask_(mask) {}

  void apply(const StateVector& in, StateVector& out) const override {
    out = in;
    const std::size_t w = in.blocks();
    const std::size_t d = in.dim();
    for (std::size_t j = 0; j < d; ++j) {
      if (!mask_.active(j)) continue;
      double mean = 0.0;
      for (std::size_t i = 0; i < w; ++i) mean += in[i * d + j];
      mean /= static_cast<double>(w);
      for (std::size_t i = 0; i < w; ++i) {
        out[i * d + j] = gamma_ == 1.0
                             ? mean
                             : (1.0 - gamma_) * in[i * d + j] + gamma_ * mean;
      }
    }
  }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    apply(in, out);
  }
  std::string name() const override {
    return gamma_ == 1.0 ? "average" : "slack-average";
  }

 private:
  double gamma_;
  CoordinateMask mask_;
};

class PairAverageKernel final : public OperatorKernel {
 public:
  PairAverageKernel(std::size_t i, std::size_t j, CoordinateMask mask)
      : i_(i), j_(j), mask_(mask) {}

  void apply(const StateVector& in, StateVector& out) const override {
    out = in;
    const std::size_t d = in.dim();
    for (std::size_t c = 0; c < d; ++c) {
      if (!mask_.active(c)) continue;
      const double avg = 0.5 * (in[i_ * d + c] + in[j_ * d + c]);
      out[i_ * d + c] = avg;
      out[j_ * d + c] = avg;
    }
  }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    apply(in, out);
  }
  std::string name() const override {
    return "pair-average(" + std::to_string(i_) + "," + std::to_string(j_) + ")";
  }

 private:
  std::size_t i_;
  std::size_t j_;
  CoordinateMask mask_;
};

class CopyKernel final : public OperatorKernel {
 public:
  CopyKernel(std::size_t src, std::size_t dst) : src_(src), dst_(dst) {}

  void apply(const StateVector& in, StateVector& out) const override {
    out = in;
    if (src_ == dst_) return;
    auto from = in.block(src_);
    auto to = out.block(dst_);
    std::copy(from.begin(), from.end(), to.begin());
  }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    out = in;
    if (src_ == dst_) return;
    auto from = in.block(dst_);
    auto src = out.block(src_);
    auto dst = out.block(dst_);
    for (std::size_t c = 0; c < src.size(); ++c) src[c] += from[c];
    std::fill(dst.begin(), dst.end(), 0.0);
  }
  std::string name() const override {
    return "copy(" + std::to_string(src_) + "->" + std::to_string(dst_) + ")";
  }

 private:
  std::size_t src_;
  std::size_t dst_;
};

class BroadcastKernel final : public OperatorKernel {
 public:
  explicit BroadcastKernel(std::size_t src) : src_(src) {}

  void apply(const StateVector& in, StateVector& out) const override {
    out = in;
    auto from = in.block(src_);
    for (std::size_t i = 0; i < in.blocks(); ++i) {
      auto to = out.block(i);
      std::copy(from.begin(), from.end(), to.begin());
    }
  }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    out = StateVector(in.blocks(), in.dim());
    auto acc = out.block(src_);
    for (std::size_t i = 0; i < in.blocks(); ++i) {
      auto b = in.block(i);
      for (std::size_t c = 0; c < b.size(); ++c) acc[c] += b[c];
    }
  }
  std::string name() const override {
    return "broadcast(" + std::to_string(src_) + ")";
  }

 private:
  std::size_t src_;
};

class CompositeKernel final : public OperatorKernel {
 public:
  explicit CompositeKernel(std::vector<LinearOperator> ops)
      : ops_(std::move(ops)) {}

  void apply(const StateVector& in, StateVector& out) const override {
    out = in;
    StateVector scratch;
    for (const auto& op : ops_) op.apply_in_place(out, scratch);
  }
  void apply_transpose(const StateVector& in, StateVector& out) const override {
    out = in;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      out = it->apply_transpose(out);
    }
  }
  std::string name() const override {
    return "product[" + std::to_string(ops_.size()) + "]";
  }

 private:
  std::vector<LinearOperator> ops_;
};

void check_mask(const CoordinateMask& mask) {
  if (mask.parts == 0 || mask.part >= mask.parts) {
    throw Error(ErrorCode::kInvalidArgument, "invalid coordinate mask");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// LinearOperator

LinearOperator::LinearOperator(std::size_t blocks, std::size_t dim,
                               std::shared_ptr<const OperatorKernel> kernel,
                               std::optional<double> norm_bound)
    : blocks_(blocks), dim_(dim), kernel_(std::move(kernel)),
      norm_bound_(norm_bound) {
  if (blocks == 0 || dim == 0 || !kernel_) {
    throw Error(ErrorCode::kInvalidArgument, "invalid operator shape");
  }
}

LinearOperator LinearOperator::identity(std::size_t blocks, std::size_t dim) {
  return {blocks, dim, std::make_shared<IdentityKernel>(), 1.0};
}

LinearOperator LinearOperator::dense(Eigen::MatrixXd matrix, std::size_t blocks,
                                     std::size_t dim, std::string name) {
  const auto n = static_cast<Eigen::Index>(blocks * dim);
  if (matrix.rows() != n || matrix.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "dense operator must be (W*d)^2");
  }
  return {blocks, dim, std::make_shared<DenseKernel>(std::move(matrix), std::move(name))};
}

LinearOperator LinearOperator::block_mix(Eigen::MatrixXd mix, std::size_t dim,
                                         CoordinateMask mask, std::string name) {
  check_mask(mask);
  if (mix.rows() != mix.cols() || mix.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "mixing matrix must be square");
  }
  const auto blocks = static_cast<std::size_t>(mix.rows());
  return {blocks, dim,
          std::make_shared<BlockMixKernel>(std::move(mix), mask, std::move(name))};
}

LinearOperator LinearOperator::slack_average(std::size_t blocks, std::size_t dim,
                                             double gamma, CoordinateMask mask) {
  check_mask(mask);
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must lie in (0, 1]");
  }
  return {blocks, dim, std::make_shared<SlackAverageKernel>(gamma, mask), 1.0};
}

LinearOperator LinearOperator::pair_average(std::size_t blocks, std::size_t dim,
                                            std::size_t i, std::size_t j,
                                            CoordinateMask mask) {
  check_mask(mask);
  if (i >= blocks || j >= blocks) {
    throw Error(ErrorCode::kInvalidArgument, "pair index out of range");
  }
  return {blocks, dim, std::make_shared<PairAverageKernel>(i, j, mask), 1.0};
}

LinearOperator LinearOperator::copy_block(std::size_t blocks, std::size_t dim,
                                          std::size_t src, std::size_t dst) {
  if (src >= blocks || dst >= blocks) {
    throw Error(ErrorCode::kInvalidArgument, "copy index out of range");
  }
  return {blocks, dim, std::make_shared<CopyKernel>(src, dst),
          src == dst ? 1.0 : std::sqrt(2.0)};
}

LinearOperator LinearOperator::broadcast(std::size_t blocks, std::size_t dim,
                                         std::size_t src) {
  if (src >= blocks) {
    throw Error(ErrorCode::kInvalidArgument, "broadcast source out of range");
  }
  return {blocks, dim, std::make_shared<BroadcastKernel>(src),
          std::sqrt(static_cast<double>(blocks))};
}

LinearOperator LinearOperator::compose(std::span<const LinearOperator> ops,
                                       std::size_t blocks, std::size_t dim) {
  if (ops.empty()) return identity(blocks, dim);
  for (const auto& op : ops) {
    if (op.blocks() != blocks || op.dim() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "composed operators differ in shape");
    }
  }
  if (ops.size() == 1) return ops.front();
  std::optional<double> bound = 1.0;
  for (const auto& op : ops) {
    if (!op.norm_bound() || !bound) {
      bound.reset();
    } else {
      *bound *= *op.norm_bound();
    }
  }
  return {blocks, dim,
          std::make_shared<CompositeKernel>(
              std::vector<LinearOperator>(ops.begin(), ops.end())),
          bound};
}

void LinearOperator::check_shape(const StateVector& x) const {
  if (x.blocks() != blocks_ || x.dim() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "operator on " + std::to_string(blocks_) + "x" +
                    std::to_string(dim_) + " applied to state " +
                    std::to_string(x.blocks()) + "x" + std::to_string(x.dim()));
  }
}

StateVector LinearOperator::apply(const StateVector& x) const {
  check_shape(x);
  StateVector out;
  kernel_->apply(x, out);
  return out;
}

StateVector LinearOperator::apply_transpose(const StateVector& x) const {
  check_shape(x);
  StateVector out;
  kernel_->apply_transpose(x, out);
  return out;
}

void LinearOperator::apply_in_place(StateVector& x, StateVector& scratch) const {
  check_shape(x);
  kernel_->apply(x, scratch);
  std::swap(x, scratch);
}

Eigen::MatrixXd LinearOperator::to_dense() const {
  if (!dense_available()) {
    throw Error(ErrorCode::kUnsupported,
                "dense materialization limited to W*d <= " +
                    std::to_string(kDenseLimit));
  }
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd m(n, n);
  StateVector basis(blocks_, dim_);
  StateVector image;
  for (Eigen::Index j = 0; j < n; ++j) {
    basis[static_cast<std::size_t>(j)] = 1.0;
    kernel_->apply(basis, image);
    m.col(j) = image.eigen();
    basis[static_cast<std::size_t>(j)] = 0.0;
  }
  return m;
}

StateVector op_apply(const LinearOperator& op, const StateVector& x) {
  return op.apply(x);
}

LinearOperator op_window_product(std::span<const LinearOperator> schedule,
                                 std::size_t s, std::size_t t) {
  if (s > t) {
    throw Error(ErrorCode::kInvalidArgument, "window start after end");
  }
  if (t > schedule.size()) {
    throw Error(ErrorCode::kInvalidArgument, "window exceeds schedule length");
  }
  if (schedule.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty schedule has no shape");
  }
  const auto& first = schedule.front();
  return LinearOperator::compose(schedule.subspan(s, t - s), first.blocks(),
                                 first.dim());
}

double dense_spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  // The top eigenvalue of m^T m is accurate to relative machine precision;
  // Eigen's divide-and-conquer SVD is not reliable on rank-deficient input.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.transpose() * m,
                                                        Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

NormEstimate op_norm(const LinearOperator& op, std::size_t iters, double tol) {
  if (iters == 0) {
    throw Error(ErrorCode::kInvalidArgument, "op_norm needs iters >= 1");
  }
  NormEstimate est;
  if (op.dense_available()) {
    est.value = dense_spectral_norm(op.to_dense());
    est.converged = true;
    est.exact = true;
    return est;
  }

  std::mt19937_64 rng(0x6d69787369ULL);
  StateVector v = StateVector::gaussian(op.blocks(), op.dim(), rng);
  v.scale(1.0 / v.norm());
  double lambda = 0.0;
  for (std::size_t k = 0; k < iters; ++k) {
    StateVector w = op.apply_transpose(op.apply(v));
    const double next = w.norm();
    est.iterations = k + 1;
    if (next == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    est.relative_change = std::abs(next - lambda) / next;
    lambda = next;
    v = std::move(w.scale(1.0 / next));
    if (est.relative_change <= tol) {
      est.converged = true;
      break;
    }
  }
  est.value = std::sqrt(lambda);
  return est;
}

double linearity_defect(const LinearOperator& op, std::size_t probes,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    const StateVector x = StateVector::gaussian(op.blocks(), op.dim(), rng);
    const StateVector y = StateVector::gaussian(op.blocks(), op.dim(), rng);
    const double a = normal(rng);
    const double b = normal(rng);
    StateVector combo = x;
    combo.scale(a).axpy(b, y);
    const StateVector lhs = op.apply(combo);
    const StateVector ox = op.apply(x);
    const StateVector oy = op.apply(y);
    StateVector rhs = ox;
    rhs.scale(a).axpy(b, oy);
    const double denom = std::abs(a) * ox.norm() + std::abs(b) * oy.norm() +
                         lhs.norm() + 1e-300;
    worst = std::max(worst, (lhs - rhs).norm() / denom);
  }
  return worst;
}

ConsensusOperator ConsensusOperator::block_average(std::size_t blocks,
                                                   std::size_t dim) {
  return ConsensusOperator(LinearOperator::slack_average(blocks, dim, 1.0));
}

ConsensusOperator ConsensusOperator::server_broadcast(std::size_t blocks,
                                                      std::size_t dim) {
  return ConsensusOperator(LinearOperator::broadcast(blocks, dim, 0));
}

}  // namespace mixsim
