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

#include "mixsim/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mixsim/error.hpp"

namespace mixsim {

namespace {

double power(double v, double p) {
  if (p == 0.0) return 1.0;
  if (p == 0.5) return std::sqrt(v);
  return std::pow(v, p);
}

}  // namespace

void SamConfig::validate() const {
  auto invalid = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (!(p >= 0.0 && p <= 0.5)) invalid("p must lie in [0, 1/2]");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) invalid("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) invalid("beta2 must lie in [0, 1)");
  if (!(c > 0.0) || !std::isfinite(c)) invalid("c must be positive");
  if (p > 0.0 && !(beta1 < std::pow(beta2, 2.0 * p))) {
    invalid("need beta1 < beta2^(2p)");
  }
}

SamConfig SamConfig::momentum(double beta1) { return {0.0, beta1, 0.999, 1.0}; }
SamConfig SamConfig::rmsprop(double beta2, double c) { return {0.5, 0.0, beta2, c}; }
SamConfig SamConfig::amsgrad(double beta1, double beta2, double c) {
  return {0.5, beta1, beta2, c};
}

std::vector<double> sgd_delta(std::span<const double> g) { return {g.begin(), g.end()}; }

void sam_delta(SamState& state, const SamConfig& cfg, std::span<const double> g,
               std::span<double> out) {
  if (g.size() != state.m.size() || out.size() != g.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient length differs from state");
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!std::isfinite(g[j])) throw Error(ErrorCode::kNonFinite, "non-finite gradient");
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g[j];
    state.v[j] = std::max(cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g[j] * g[j], state.v[j]);
    out[j] = state.m[j] / power(state.v[j], cfg.p);
  }
  ++state.t;
}

std::vector<double> sam_delta(SamState& state, const SamConfig& cfg,
                              std::span<const double> g) {
  std::vector<double> out(g.size());
  sam_delta(state, cfg, g, out);
  return out;
}

double sam_lipschitz(const SamConfig& cfg, double L, std::optional<double> ginf) {
  cfg.validate();
  if (cfg.p > 0.0 && !ginf) {
    throw Error(ErrorCode::kPrecondition, "G_inf required for the adaptive Lipschitz bound");
  }
  const double g = cfg.p > 0.0 ? *ginf : 0.0;
  const double c = cfg.c;
  return (c + 2.0 * cfg.p * g) * L * L / std::pow(c, 2.0 * cfg.p + 1.0) *
         std::max(2.0, 4.0 * cfg.p * g / c);
}

std::vector<double> expected_update(const SamConfig& cfg,
                                    std::span<const std::vector<double>> grads) {
  if (grads.empty()) throw Error(ErrorCode::kInvalidArgument, "empty gradient history");
  SamState state(grads.front().size(), cfg.c);
  std::vector<double> out(grads.front().size());
  for (const auto& g : grads) sam_delta(state, cfg, g, out);
  return out;
}

std::string OptimizerSpec::label() const {
  if (kind == OptimizerKind::kSgd) return "sgd";
  std::ostringstream out;
  out << "sam(p=" << sam.p << ",beta1=" << sam.beta1 << ",beta2=" << sam.beta2
      << ",c=" << sam.c << ")";
  return out.str();
}

double update_lipschitz(const OptimizerSpec& spec, double L, std::optional<double> ginf) {
  if (spec.kind == OptimizerKind::kSgd) return L;
  return sam_lipschitz(spec.sam, L, ginf);
}

Optimizer::Optimizer(OptimizerSpec spec, std::size_t d) : spec_(spec) {
  if (spec_.kind == OptimizerKind::kSam) {
    spec_.sam.validate();
    state_ = SamState(d, spec_.sam.c);
  }
}

void Optimizer::step(std::span<const double> g, std::span<double> out) {
  if (spec_.kind == OptimizerKind::kSgd) {
    std::copy(g.begin(), g.end(), out.begin());
    return;
  }
  sam_delta(state_, spec_.sam, g, out);
}

StepSchedule StepSchedule::constant(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "step size must be finite and >= 0");
  }
  StepSchedule s;
  s.kind_ = ScheduleKind::kConstant;
  s.value_ = alpha;
  return s;
}

StepSchedule StepSchedule::corollary1(double f0_gap, double sigma, double L,
                                      std::size_t T, std::size_t tmix) {
  if (!(f0_gap >= 0.0) || !(sigma >= 0.0) || !(L > 0.0) || T < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid step-size schedule inputs");
  }
  const double denom =
      sigma * std::sqrt(L * static_cast<double>(T)) + static_cast<double>(tmix);
  if (denom == 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "step-size schedule divides by zero (sigma = 0 and tmix = 0)");
  }
  StepSchedule s;
  s.kind_ = ScheduleKind::kCorollary1;
  s.value_ = std::sqrt(2.0 * f0_gap) / denom;
  return s;
}

StepSchedule StepSchedule::table(std::vector<double> alphas) {
  if (alphas.empty()) throw Error(ErrorCode::kInvalidArgument, "empty step-size table");
  for (double a : alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw Error(ErrorCode::kInvalidArgument, "step sizes must be finite and >= 0");
    }
  }
  StepSchedule s;
  s.kind_ = ScheduleKind::kTable;
  s.table_ = std::move(alphas);
  return s;
}

double StepSchedule::alpha(std::size_t t) const {
  if (kind_ != ScheduleKind::kTable) return value_;
  return table_[std::min(t, table_.size() - 1)];
}

bool StepSchedule::non_increasing() const {
  for (std::size_t i = 1; i < table_.size(); ++i) {
    if (table_[i] > table_[i - 1]) return false;
  }
  return true;
}

double corollary1_threshold(double f0_gap, double xi, double tmix, double L,
                            double sigma2) {
  if (sigma2 <= 0.0) return std::numeric_limits<double>::infinity();
  return 64.0 * f0_gap * xi * xi * (1.0 + xi) * (1.0 + xi) * tmix * tmix * L / sigma2;
}

}  // namespace mixsim
