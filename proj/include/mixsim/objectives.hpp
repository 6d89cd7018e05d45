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

enum class ObjectiveKind { kQuadratic, kSigmoidSum, kRegularizedLogistic };

std::string to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(const std::string& name);

// Rows are samples a_k, `targets` holds b_k (SigmoidSum) or labels y_k in
// {-1, +1} (RegularizedLogistic).
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;

  std::size_t samples() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

  // Header a0,...,a{d-1},target then one row per sample, full precision.
  void save_csv(const std::string& path) const;
  static Dataset load_csv(const std::string& path);
};

struct ObjectiveParams {
  ObjectiveKind kind = ObjectiveKind::kQuadratic;
  std::size_t d = 16;
  std::uint64_t seed = 0;

  // Quadratic 0.5 (x - b)^T A (x - b).
  bool identity_hessian = true;
  double eig_min = 0.1;
  double eig_max = 1.0;
  // b ~ N(0, center_scale^2 I); 0 centers the quadratic at the origin.
  double center_scale = 0.0;

  // Dataset kinds.
  std::size_t samples = 64;
  double feature_scale = 2.0;
  // Loads the dataset from CSV instead of generating it.
  std::string dataset_path;
};

class Objective {
 public:
  virtual ~Objective() = default;

  virtual ObjectiveKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void grad(std::span<const double> x, std::span<double> out) const = 0;
  std::vector<double> grad(std::span<const double> x) const;

  // Lipschitz constant of the gradient.
  virtual double smoothness() const = 0;
  // Known minimum value, when available.
  virtual std::optional<double> f_star() const = 0;
  // A valid lower bound on f: f_star when known, 0 for the nonnegative kinds.
  virtual double lower_bound() const = 0;
  // Uniform bound on ||grad f_k(x)||_inf over samples and all x.
  virtual std::optional<double> ginf() const = 0;

  // Finite-sum structure for minibatch noise. sample_count() is 0 when the
  // objective is not a finite sum.
  virtual std::size_t sample_count() const { return 0; }
  virtual void sample_grad(std::size_t k, std::span<const double> x,
                           std::span<double> out) const;
  // Bound on sup_x ||grad f_k(x) - c(x)||^2 over samples, where c(x) is any
  // sample-independent part of the gradient.
  virtual double sample_variation_bound() const { return 0.0; }

  virtual const Dataset* dataset() const { return nullptr; }
};

std::shared_ptr<const Objective> make_objective(const ObjectiveParams& params);

// Second derivative supremum of z -> sigmoid(z)^2.
double sigmoid_square_curvature();
// First derivative supremum of z -> sigmoid(z)^2, i.e. 8/27.
double sigmoid_square_slope();

enum class NoiseKind { kGaussian, kMinibatch };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

struct NoiseParams {
  NoiseKind kind = NoiseKind::kGaussian;
  // Gaussian: total variance sigma^2 split evenly over coordinates.
  double sigma = 0.0;
  std::size_t batch = 1;
};

class GradientOracle {
 public:
  GradientOracle(std::shared_ptr<const Objective> objective, NoiseParams noise);

  const Objective& objective() const noexcept { return *objective_; }
  std::shared_ptr<const Objective> objective_ptr() const noexcept { return objective_; }
  const NoiseParams& noise() const noexcept { return noise_; }

  void stoch_grad(std::span<const double> x, std::mt19937_64& rng,
                  std::span<double> out) const;
  std::vector<double> stoch_grad(std::span<const double> x,
                                 std::mt19937_64& rng) const;

  // E||g - grad f||^2: exact for Gaussian noise, an upper bound for
  // minibatches.
  double sigma2() const;
  // Bound on ||g||_inf for every draw; absent for Gaussian noise with
  // sigma > 0.
  std::optional<double> ginf() const;

 private:
  std::shared_ptr<const Objective> objective_;
  NoiseParams noise_;
};

// Largest relative disagreement between grad and central differences with
// step h over random points N(0, radius^2 I).
double gradient_check(const Objective& objective, std::size_t points,
                      std::uint64_t seed, double h = 1e-5, double radius = 1.0);

// Largest ||grad f(x) - grad f(y)|| / (L ||x - y||) over random pairs.
double smoothness_ratio(const Objective& objective, std::size_t pairs,
                        std::uint64_t seed, double radius = 3.0);

}  // namespace mixsim
