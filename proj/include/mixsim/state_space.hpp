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
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixsim/error.hpp"

namespace mixsim {

// Operators on states with at most this many coordinates can be materialized
// as dense matrices for exact spectral checks.
inline constexpr std::size_t kDenseLimit = 4096;

// Global external-storage state: `blocks` contiguous blocks of `dim` values.
class StateVector {
 public:
  StateVector() = default;
  StateVector(std::size_t blocks, std::size_t dim);
  StateVector(std::size_t blocks, std::size_t dim, std::vector<double> values);

  // Every block set to `block`.
  static StateVector replicated(std::size_t blocks, std::span<const double> block);
  static StateVector gaussian(std::size_t blocks, std::size_t dim, std::mt19937_64& rng);

  std::size_t blocks() const noexcept { return blocks_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> block(std::size_t i) const;
  std::span<double> block(std::size_t i);

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double norm() const;
  double squared_norm() const;
  bool all_finite() const;
  bool same_shape(const StateVector& other) const noexcept {
    return blocks_ == other.blocks_ && dim_ == other.dim_;
  }

  // this += a * x
  StateVector& axpy(double a, const StateVector& x);
  StateVector& scale(double a);

  Eigen::Map<const Eigen::VectorXd> eigen() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }
  Eigen::Map<Eigen::VectorXd> eigen() {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  friend StateVector operator-(const StateVector& a, const StateVector& b);
  friend StateVector operator+(const StateVector& a, const StateVector& b);
  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  std::size_t blocks_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

// Coordinate projection selecting one storage block. As a matrix it is the
// d x (W*d) selector for reads and its transpose for writes.
struct BlockProjection {
  enum class Kind { kRead, kWrite };

  std::size_t block_index = 0;
  Kind kind = Kind::kRead;

  Eigen::MatrixXd matrix(std::size_t blocks, std::size_t dim) const;
};

std::vector<double> block_read(const StateVector& x, const BlockProjection& p);

// Returns x with `scale * delta` added to the target block only.
StateVector block_accumulate(const StateVector& x, const BlockProjection& p,
                             std::span<const double> delta, double scale);
void block_accumulate_in_place(StateVector& x, const BlockProjection& p,
                               std::span<const double> delta, double scale);

// Selects the coordinates j with j % parts == part. Operators built with a
// mask act as the identity on every other coordinate.
struct CoordinateMask {
  std::size_t parts = 1;
  std::size_t part = 0;

  bool active(std::size_t j) const noexcept { return j % parts == part; }
  bool full() const noexcept { return parts == 1; }
};

class OperatorKernel {
 public:
  virtual ~OperatorKernel() = default;
  // `out` has the shape of `in` and never aliases it.
  virtual void apply(const StateVector& in, StateVector& out) const = 0;
  virtual void apply_transpose(const StateVector& in, StateVector& out) const = 0;
  virtual std::string name() const = 0;
};

// Matrix-free linear map on states of a fixed shape. Cheap to copy; the kernel
// is shared and immutable.
class LinearOperator {
 public:
  LinearOperator(std::size_t blocks, std::size_t dim,
                 std::shared_ptr<const OperatorKernel> kernel,
                 std::optional<double> norm_bound = std::nullopt);

  static LinearOperator identity(std::size_t blocks, std::size_t dim);
  static LinearOperator dense(Eigen::MatrixXd matrix, std::size_t blocks,
                              std::size_t dim, std::string name = "dense");
  // mix (W x W) acting blockwise, i.e. mix ⊗ I_d on the masked coordinates.
  static LinearOperator block_mix(Eigen::MatrixXd mix, std::size_t dim,
                                  CoordinateMask mask = {},
                                  std::string name = "mix");
  // (1 - gamma) I + gamma (11^T / W) ⊗ I_d. gamma = 1 is exact averaging.
  static LinearOperator slack_average(std::size_t blocks, std::size_t dim,
                                      double gamma, CoordinateMask mask = {});
  static LinearOperator pair_average(std::size_t blocks, std::size_t dim,
                                     std::size_t i, std::size_t j,
                                     CoordinateMask mask = {});
  // Block dst <- block src.
  static LinearOperator copy_block(std::size_t blocks, std::size_t dim,
                                   std::size_t src, std::size_t dst);
  // Every block <- block src.
  static LinearOperator broadcast(std::size_t blocks, std::size_t dim,
                                  std::size_t src);
  // Applies ops[0] first, then ops[1], ...
  static LinearOperator compose(std::span<const LinearOperator> ops,
                                std::size_t blocks, std::size_t dim);

  std::size_t blocks() const noexcept { return blocks_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return blocks_ * dim_; }
  std::optional<double> norm_bound() const noexcept { return norm_bound_; }
  std::string name() const { return kernel_->name(); }
  // Operators sharing a kernel are the same map.
  const void* kernel_id() const noexcept { return kernel_.get(); }

  StateVector apply(const StateVector& x) const;
  StateVector apply_transpose(const StateVector& x) const;
  // x <- op(x); `scratch` is resized as needed.
  void apply_in_place(StateVector& x, StateVector& scratch) const;

  bool dense_available() const noexcept { return size() <= kDenseLimit; }
  Eigen::MatrixXd to_dense() const;

 private:
  void check_shape(const StateVector& x) const;

  std::size_t blocks_;
  std::size_t dim_;
  std::shared_ptr<const OperatorKernel> kernel_;
  std::optional<double> norm_bound_;
};

StateVector op_apply(const LinearOperator& op, const StateVector& x);

// Product of schedule[s], ..., schedule[t-1] applied in that order.
LinearOperator op_window_product(std::span<const LinearOperator> schedule,
                                 std::size_t s, std::size_t t);

struct NormEstimate {
  double value = 0.0;
  bool converged = false;
  bool exact = false;
  std::size_t iterations = 0;
  double relative_change = 0.0;
};

// Largest singular value of a dense matrix.
double dense_spectral_norm(const Eigen::MatrixXd& m);

// Spectral norm. Exact singular value when the operator is small enough to
// materialize, power iteration on op^T op otherwise.
NormEstimate op_norm(const LinearOperator& op, std::size_t iters, double tol);

// Largest relative violation of op(aX + bY) = a op(X) + b op(Y) over random
// probe pairs.
double linearity_defect(const LinearOperator& op, std::size_t probes,
                        std::uint64_t seed);

// The consensus map M_inf of a protocol together with the representative
// block Pi_* (always block 0).
class ConsensusOperator {
 public:
  explicit ConsensusOperator(LinearOperator op) : op_(std::move(op)) {}

  // (11^T / W) ⊗ I_d over every block.
  static ConsensusOperator block_average(std::size_t blocks, std::size_t dim);
  // Copies block 0 (the server) into every block.
  static ConsensusOperator server_broadcast(std::size_t blocks, std::size_t dim);

  const LinearOperator& op() const noexcept { return op_; }
  StateVector apply(const StateVector& x) const { return op_.apply(x); }
  std::size_t representative_block() const noexcept { return 0; }

 private:
  LinearOperator op_;
};

}  // namespace mixsim
