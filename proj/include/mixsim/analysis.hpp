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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixsim/engine.hpp"
#include "mixsim/optimizers.hpp"

namespace mixsim {

// Relative tolerance of the `holds` predicate.
inline constexpr double kBoundTolerance = 1e-9;

struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;
  // False when the inequality's hypotheses are not met (e.g. T below the
  // tuned-schedule threshold); such reports never count as failures.
  bool applicable = true;
  std::vector<std::string> warnings;
  // Echoed constants in insertion order.
  std::vector<std::pair<std::string, double>> inputs;
  std::string schedule;
  std::vector<std::uint64_t> seeds;
  // Standard error of the seed-averaged lhs.
  double lhs_stderr = 0.0;

  bool failed() const noexcept { return applicable && !holds; }
};

// Sets slack and holds from lhs and rhs.
void finalize(BoundReport& report);

// Per-seed sums needed by the bound checks. All traces must share a config
// hash and T, be recorded at cadence 1 and not have diverged.
struct SeedSums {
  std::vector<std::uint64_t> seeds;
  std::vector<double> alpha;       // alpha_t for t < T
  double alpha_T = 0.0;
  std::vector<double> weighted_grad;        // sum_t alpha_t ||grad f(x_t)||^2
  std::vector<double> weighted_delta_gap;   // sum_t alpha_t ||dx - du||^2
  std::vector<double> weighted_grad_gap;    // sum_t alpha_t ||grad f(x) - grad f(u)||^2
  std::vector<double> cubed_delta_x;        // sum_t alpha_t^3 ||dx||^2
  std::vector<double> grad_mean;            // (1/T) sum_t ||grad f(x_t)||^2
  std::vector<double> f0;
  std::vector<double> f_final;
  std::string optimizer;
  bool extras_available = true;
};

SeedSums aggregate(std::span<const Trace> traces);

// "constant(<alpha>)" for a flat schedule, "table(<T>)" otherwise.
std::string schedule_id(std::span<const double> alpha);

double mean(std::span<const double> values);
double standard_error(std::span<const double> values);

// sum_t alpha_t E||dx - du||^2 <= 16 K tmix^2 Lcal^2 sum_t alpha_t^3 E||dx||^2
//                                 + 4 K tmix sigma^2 Lcal^2 sum_{t<=T} alpha_t^3
// with K = (1 + xi)^2 xi^2.
BoundReport check_lemma2(std::span<const Trace> traces, double tmix, double xi,
                         double Lcal, double sigma2);

// sum_t alpha_t E||grad f(x_t)||^2 <= 2 (f(x_0) - E f(x_T)) + sigma^2 L sum_t alpha_t^2
//                                     + sum_t alpha_t E||grad f(x_t) - grad f(u_t)||^2
BoundReport check_lemma3(std::span<const Trace> traces, double L, double sigma2);

// sum_t alpha_t (1 - 16 K tmix^2 L^2 alpha_t^2) E||grad f(x_t)||^2
//   <= 2 (f(x_0) - E f(x_T)) + sigma^2 L sum_t alpha_t^2
//      + 4 K tmix sigma^2 L^2 sum_{t<=T} alpha_t^3
BoundReport check_theorem1(std::span<const Trace> traces, double L, double tmix, double xi,
                           double sigma2);

// 16 (1 + xi)^2 xi^2 tmix^2 L^2 alpha^2; the SGD convergence bound weights its LHS by
// 1 minus this.
double theorem1_coefficient(double L, double tmix, double xi, double alpha);

struct Theorem2Constants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
};

// f0_gap is f(x_0 / (1 - beta1)) - f*, or an upper bound on it.
Theorem2Constants theorem2_constants(const SamConfig& cfg, double L, double ginf,
                                     double f0_gap, double xi, std::size_t d);

// sum_t alpha_t E||grad f(x_t)||^2 <= C1 + C2 sum alpha^2 + C3 sigma^2 sum alpha^2
//                                     + C4 tmix sigma^2 sum_{t<=T} alpha^3
BoundReport check_theorem2(std::span<const Trace> traces, const Theorem2Constants& constants,
                           double tmix, double sigma2);

// (1/T) sum_t E||grad f(x_t)||^2
//   <= 4 sigma sqrt(2 gap L / T) + 2 sqrt(2 gap) tmix / T + 16 K tmix gap L / T,
// for alpha = sqrt(2 gap) / (sigma sqrt(L T) + tmix);
// applicable when the run used that constant step size and T reaches
// corollary1_threshold.
BoundReport check_corollary1(std::span<const Trace> traces, double L, double tmix,
                             double xi, double sigma2, double gap);

struct RatePoint {
  double T = 0.0;
  double tmix = 0.0;
  double value = 0.0;
};

struct RateFit {
  // value ~ a / sqrt(T) + b tmix / T
  double a = 0.0;
  double b = 0.0;
  // Root mean squared residual over the grid.
  double residual = 0.0;
  bool clipped = false;
  std::vector<RatePoint> points;
  // a refit per distinct tmix with b held fixed.
  std::vector<std::pair<double, double>> a_by_tmix;
  // max_j |a_j - a| / a; infinite when a == 0.
  double a_deviation = 0.0;
};

// Nonnegative least squares on the grid. Throws "degenerate grid" with
// fewer than 4 points or fewer than 2 distinct values of T or tmix.
RateFit fit_rate(std::span<const RatePoint> points);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct Lemma5Result {
  bool holds_linear = false;
  bool holds_squared = false;
  double lhs_linear = 0.0;
  double rhs_linear = 0.0;
  double lhs_squared = 0.0;
  double rhs_squared = 0.0;
};

// Both sides of
//   sum_t a_t sum_{s<=t} rho^floor((t-s)/T) b_s   <= T/(1-rho) sum_s a_s b_s
//   sum_t a_t (sum_{s<=t} rho^floor((t-s)/T) b_s)^2 <= T^2/(1-rho)^2 sum_s a_s b_s^2
// with 0^0 = 1.
Lemma5Result check_lemma5(std::span<const double> a, std::span<const double> b, double rho,
                          std::size_t period);

}  // namespace mixsim
