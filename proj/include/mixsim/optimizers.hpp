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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixsim/error.hpp"

namespace mixsim {

// x_{t+1} = x_t - alpha_t m_t / v_t^p with
//   m_t = beta1 m_{t-1} + (1 - beta1) g_t
//   v_t = max(beta2 v_{t-1} + (1 - beta2) g_t^2, v_{t-1})
// and m_0 = 0, v_0 = c.
struct SamConfig {
  double p = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double c = 1.0;

  void validate() const;

  static SamConfig momentum(double beta1);
  static SamConfig rmsprop(double beta2 = 0.999, double c = 1.0);
  static SamConfig amsgrad(double beta1 = 0.9, double beta2 = 0.999, double c = 1.0);
};

struct SamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;

  SamState() = default;
  SamState(std::size_t d, double c) : m(d, 0.0), v(d, c) {}
};

std::vector<double> sgd_delta(std::span<const double> g);

// Advances the state by one gradient and writes m / v^p into `out`.
void sam_delta(SamState& state, const SamConfig& cfg, std::span<const double> g,
               std::span<double> out);
std::vector<double> sam_delta(SamState& state, const SamConfig& cfg,
                              std::span<const double> g);

// ((c + 2 p Ginf) L^2 / c^(2p+1)) max(2, 4 p Ginf / c). Throws when Ginf is
// absent and p > 0.
double sam_lipschitz(const SamConfig& cfg, double L, std::optional<double> ginf);

// Update of the recursion after feeding grads[0], ..., grads[t] from a fresh
// state; the map whose Lipschitz constant sam_lipschitz bounds.
std::vector<double> expected_update(const SamConfig& cfg,
                                    std::span<const std::vector<double>> grads);

enum class OptimizerKind { kSgd, kSam };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kSgd;
  SamConfig sam;

  static OptimizerSpec sgd() { return {}; }
  static OptimizerSpec adaptive(SamConfig cfg) { return {OptimizerKind::kSam, cfg}; }
  std::string label() const;
};

// Lipschitz constant of the update map over iterate histories: L for SGD,
// sam_lipschitz otherwise.
double update_lipschitz(const OptimizerSpec& spec, double L, std::optional<double> ginf);

// Stateful sequential update rule producing delta_t from g_t.
class Optimizer {
 public:
  Optimizer(OptimizerSpec spec, std::size_t d);

  void step(std::span<const double> g, std::span<double> out);
  const OptimizerSpec& spec() const noexcept { return spec_; }
  const SamState& state() const noexcept { return state_; }

 private:
  OptimizerSpec spec_;
  SamState state_;
};

enum class ScheduleKind { kConstant, kCorollary1, kTable };

class StepSchedule {
 public:
  static StepSchedule constant(double alpha);
  // sqrt(2 gap) / (sigma sqrt(L T) + tmix), constant over t.
  static StepSchedule corollary1(double f0_gap, double sigma, double L, std::size_t T,
                                 std::size_t tmix);
  // Values past the end repeat the last entry.
  static StepSchedule table(std::vector<double> alphas);

  ScheduleKind kind() const noexcept { return kind_; }
  double alpha(std::size_t t) const;
  bool non_increasing() const;

 private:
  ScheduleKind kind_ = ScheduleKind::kConstant;
  double value_ = 0.0;
  std::vector<double> table_;
};

// Iteration count above which the tuned step-size schedule is meaningful:
// 64 gap xi^2 (1 + xi)^2 tmix^2 L / sigma^2.
double corollary1_threshold(double f0_gap, double xi, double tmix, double L,
                            double sigma2);

}  // namespace mixsim
