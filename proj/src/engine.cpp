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

#include "mixsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mixsim/mixing.hpp"
#include "mixsim/random.hpp"

namespace mixsim {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

bool finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

ProtocolSpec seeded_protocol(const RunConfig& config) {
  ProtocolSpec spec = config.protocol;
  spec.seed = derive_seed(config.seed, "protocol");
  return spec;
}

void check_optimizer_preconditions(const RunConfig& config, const Objective& objective) {
  if (config.optimizer.kind == OptimizerKind::kSam && config.optimizer.sam.p > 0.0 &&
      !objective.ginf()) {
    throw Error(ErrorCode::kPrecondition,
                "adaptive optimizers need a bounded-gradient objective, not " +
                    to_string(objective.kind()));
  }
}

void finish_summary(Trace& trace) {
  auto& s = trace.summary;
  if (trace.rows.empty()) return;
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& row : trace.rows) {
    sum += row.grad_sq;
    lo = std::min(lo, row.grad_sq);
  }
  s.mean_grad_sq = sum / static_cast<double>(trace.rows.size());
  s.min_grad_sq = lo;
}

}  // namespace

std::string to_string(X0Policy policy) {
  return policy == X0Policy::kZeros ? "zeros" : "random";
}

X0Policy parse_x0_policy(const std::string& name) {
  if (name == "zeros") return X0Policy::kZeros;
  if (name == "random") return X0Policy::kRandom;
  throw Error(ErrorCode::kInvalidArgument, "unknown x0 policy '" + name + "'");
}

void RunConfig::validate() const {
  if (T < 1) throw Error(ErrorCode::kInvalidArgument, "T must be >= 1");
  if (cadence < 1) throw Error(ErrorCode::kInvalidArgument, "cadence must be >= 1");
  protocol.validate();
  if (protocol.d != objective.d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "protocol d = " + std::to_string(protocol.d) + " but objective d = " +
                    std::to_string(objective.d));
  }
  if (optimizer.kind == OptimizerKind::kSam) optimizer.sam.validate();
  if (!(x0_scale >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "x0_scale must be >= 0");
  if (initial_state) {
    if (initial_state->blocks() != protocol.blocks() || initial_state->dim() != protocol.d) {
      throw Error(ErrorCode::kDimensionMismatch, "initial state shape differs from protocol");
    }
  }
}

std::string canonical_string(const RunConfig& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  auto protocol = [&](const ProtocolSpec& p, const std::string& prefix) {
    out << prefix << "kind=" << to_string(p.kind) << '\n'
        << prefix << "n=" << p.n << '\n'
        << prefix << "d=" << p.d << '\n'
        << prefix << "local_steps=" << p.local_steps << '\n'
        << prefix << "topology=" << to_string(p.topology) << '\n'
        << prefix << "comm_period=" << p.comm_period << '\n'
        << prefix << "pull_delay=" << p.pull_delay << '\n'
        << prefix << "gamma=" << p.gamma << '\n'
        << prefix << "eta=" << p.eta << '\n';
  };
  protocol(c.protocol, "protocol.");
  if (c.protocol.inner) protocol(*c.protocol.inner, "protocol.inner.");
  const auto& o = c.objective;
  out << "objective.kind=" << to_string(o.kind) << '\n'
      << "objective.d=" << o.d << '\n'
      << "objective.seed=" << o.seed << '\n'
      << "objective.identity_hessian=" << o.identity_hessian << '\n'
      << "objective.eig_min=" << o.eig_min << '\n'
      << "objective.eig_max=" << o.eig_max << '\n'
      << "objective.center_scale=" << o.center_scale << '\n'
      << "objective.samples=" << o.samples << '\n'
      << "objective.feature_scale=" << o.feature_scale << '\n'
      << "objective.dataset=" << o.dataset_path << '\n'
      << "noise.kind=" << to_string(c.noise.kind) << '\n'
      << "noise.sigma=" << c.noise.sigma << '\n'
      << "noise.batch=" << c.noise.batch << '\n'
      << "optimizer=" << c.optimizer.label() << '\n'
      << "schedule.kind=" << static_cast<int>(c.schedule.kind) << '\n'
      << "schedule.alpha=" << c.schedule.alpha << '\n';
  out << "schedule.table=";
  for (double a : c.schedule.table) out << a << ';';
  out << '\n'
      << "schedule.tmix=" << (c.schedule.tmix ? std::to_string(*c.schedule.tmix) : "") << '\n'
      << "T=" << c.T << '\n'
      << "x0=" << to_string(c.x0) << '\n'
      << "x0_scale=" << c.x0_scale << '\n'
      << "cadence=" << c.cadence << '\n';
  if (c.initial_state) {
    out << "initial_state=";
    for (double v : c.initial_state->values()) out << v << ';';
    out << '\n';
  }
  return out.str();
}

std::string config_hash(const RunConfig& config) {
  const std::uint64_t h = hash_label(canonical_string(config));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> initial_point(const RunConfig& config) {
  std::vector<double> x0(config.objective.d, 0.0);
  if (config.x0 == X0Policy::kRandom) {
    std::mt19937_64 rng = make_rng(config.seed, "x0");
    std::normal_distribution<double> normal(0.0, config.x0_scale);
    for (auto& v : x0) v = normal(rng);
  }
  return x0;
}

std::vector<double> consensus_state(const StateVector& x, const ConsensusOperator& minf) {
  const StateVector mx = minf.apply(x);
  auto b = mx.block(minf.representative_block());
  return {b.begin(), b.end()};
}

double stationary_distance(const StateVector& x, std::size_t first_worker) {
  if (first_worker >= x.blocks()) {
    throw Error(ErrorCode::kInvalidArgument, "no worker blocks");
  }
  const std::size_t workers = x.blocks() - first_worker;
  const std::size_t d = x.dim();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = first_worker; i < x.blocks(); ++i) {
    auto b = x.block(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += b[j];
  }
  for (auto& m : mean) m /= static_cast<double>(workers);
  double total = 0.0;
  for (std::size_t i = first_worker; i < x.blocks(); ++i) total += squared_distance(x.block(i), mean);
  return total / static_cast<double>(workers);
}

StepSchedule resolve_schedule(const RunConfig& config, const Objective& objective,
                              const GradientOracle& oracle) {
  const auto& s = config.schedule;
  switch (s.kind) {
    case ScheduleKind::kConstant:
      return StepSchedule::constant(s.alpha);
    case ScheduleKind::kTable:
      return StepSchedule::table(s.table);
    case ScheduleKind::kCorollary1: {
      std::optional<std::size_t> tmix = s.tmix;
      if (!tmix) tmix = theoretical_tmix(config.protocol);
      if (!tmix) {
        throw Error(ErrorCode::kConfig,
                    "step-size schedule needs an explicit tmix for " +
                        config.protocol.label());
      }
      const auto x0 = initial_point(config);
      const double gap = std::max(0.0, objective.value(x0) - objective.lower_bound());
      return StepSchedule::corollary1(gap, std::sqrt(oracle.sigma2()),
                                      objective.smoothness(), config.T, *tmix);
    }
  }
  throw Error(ErrorCode::kConfig, "unknown schedule kind");
}

Trace run(const RunConfig& config) {
  config.validate();
  const auto objective = make_objective(config.objective);
  check_optimizer_preconditions(config, *objective);
  const GradientOracle oracle(objective, config.noise);
  const StepSchedule schedule = resolve_schedule(config, *objective, oracle);
  if (!schedule.non_increasing()) {
    throw Error(ErrorCode::kPrecondition, "step sizes must be non-increasing");
  }
  const EventSchedule events(seeded_protocol(config));
  const ConsensusOperator minf = layout_consensus(events);
  const std::size_t d = config.objective.d;
  const std::size_t first_worker = events.spec().has_server() ? 1 : 0;
  const double gain = events.write_gain();

  StateVector state = config.initial_state
                          ? *config.initial_state
                          : StateVector::replicated(events.blocks(), initial_point(config));
  std::mt19937_64 noise_rng = make_rng(config.seed, "noise");
  Optimizer optimizer(config.optimizer, d);
  // Shadow recursions fed with exact gradients at x_t and u_t.
  Optimizer shadow_x(config.optimizer, d);
  Optimizer shadow_u(config.optimizer, d);

  Trace trace;
  auto& summary = trace.summary;
  summary.T = config.T;
  summary.seed = config.seed;
  summary.config_hash = config_hash(config);
  summary.protocol = config.protocol.label();
  summary.optimizer = config.optimizer.label();
  summary.n = config.protocol.n;
  summary.cadence = config.cadence;
  trace.rows.reserve(config.T / config.cadence + 1);

  std::vector<double> grad_x(d), grad_u(d), g(d), delta(d), delta_x(d), delta_u(d);
  std::vector<LinearOperator> ops;
  StateVector scratch;
  std::vector<double> x = consensus_state(state, minf);
  summary.f0 = objective->value(x);
  std::vector<double> predicted;

  for (std::size_t t = 0; t < config.T; ++t) {
    const double alpha = schedule.alpha(t);
    const std::vector<double> u = block_read(state, events.read_proj(t));
    objective->grad(x, grad_x);
    objective->grad(u, grad_u);
    try {
      shadow_x.step(grad_x, delta_x);
      shadow_u.step(grad_u, delta_u);
      oracle.stoch_grad(u, noise_rng, g);
      optimizer.step(g, delta);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      summary.diverged = true;
      summary.diagnostic = "non-finite gradient at t = " + std::to_string(t);
      break;
    }

    if (t % config.cadence == 0) {
      TraceRow row;
      row.t = t;
      row.alpha = alpha;
      row.f = objective->value(x);
      row.grad_sq = squared_norm(grad_x);
      row.stat_dist = stationary_distance(state, first_worker);
      row.view_gap_sq = squared_distance(x, u);
      row.delta_gap_sq = squared_distance(delta_x, delta_u);
      row.worker = events.acting_worker(t);
      row.delta_x_sq = squared_norm(delta_x);
      row.grad_gap_sq = squared_distance(grad_x, grad_u);
      trace.rows.push_back(row);
    }

    // -alpha dt = (-alpha dx) + alpha (dx - du) + alpha (du - dt)
    double residual = 0.0;
    double scale = 1e-300;
    for (std::size_t j = 0; j < d; ++j) {
      const double lhs = -alpha * delta[j];
      const double rhs = -alpha * delta_x[j] + alpha * (delta_x[j] - delta_u[j]) +
                         alpha * (delta_u[j] - delta[j]);
      residual = std::max(residual, std::abs(lhs - rhs));
      scale = std::max(scale, alpha * std::max({std::abs(delta[j]), std::abs(delta_x[j]),
                                                std::abs(delta_u[j])}));
    }
    summary.max_decomposition_residual =
        std::max(summary.max_decomposition_residual, residual / scale);

    predicted = x;
    for (std::size_t j = 0; j < d; ++j) predicted[j] -= alpha * delta[j];

    try {
      block_accumulate_in_place(state, events.write_proj(t), delta, -alpha * gain);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      summary.diverged = true;
      summary.diagnostic = "non-finite update at t = " + std::to_string(t);
      break;
    }
    events.slot(t, ops);
    for (const auto& op : ops) op.apply_in_place(state, scratch);
    if (!state.all_finite()) {
      summary.diverged = true;
      summary.diagnostic = "non-finite state after t = " + std::to_string(t);
      break;
    }

    x = consensus_state(state, minf);
    const double drift = std::sqrt(squared_distance(x, predicted));
    const double size = std::sqrt(squared_norm(predicted)) +
                        alpha * std::sqrt(squared_norm(delta)) + 1e-300;
    summary.max_consensus_residual = std::max(summary.max_consensus_residual, drift / size);
  }

  if (!summary.diverged) {
    summary.f_final = objective->value(x);
    summary.grad_sq_final = squared_norm(objective->grad(x));
    if (!std::isfinite(summary.f_final) || !std::isfinite(summary.grad_sq_final)) {
      summary.diverged = true;
      summary.diagnostic = "non-finite final metrics";
    }
  }
  summary.alpha_T = schedule.alpha(config.T);
  finish_summary(trace);
  return trace;
}

Trace run_sequential(const RunConfig& config) {
  config.validate();
  const auto objective = make_objective(config.objective);
  check_optimizer_preconditions(config, *objective);
  const GradientOracle oracle(objective, config.noise);
  const StepSchedule schedule = resolve_schedule(config, *objective, oracle);
  const EventSchedule events(seeded_protocol(config));
  const std::size_t d = config.objective.d;

  std::vector<double> x = initial_point(config);
  std::mt19937_64 noise_rng = make_rng(config.seed, "noise");
  Optimizer optimizer(config.optimizer, d);
  Optimizer shadow(config.optimizer, d);

  Trace trace;
  auto& summary = trace.summary;
  summary.T = config.T;
  summary.seed = config.seed;
  summary.config_hash = config_hash(config);
  summary.protocol = "sequential";
  summary.optimizer = config.optimizer.label();
  summary.n = config.protocol.n;
  summary.cadence = config.cadence;
  summary.f0 = objective->value(x);

  std::vector<double> grad(d), g(d), delta(d), delta_x(d);
  for (std::size_t t = 0; t < config.T; ++t) {
    const double alpha = schedule.alpha(t);
    objective->grad(x, grad);
    try {
      shadow.step(grad, delta_x);
      oracle.stoch_grad(x, noise_rng, g);
      optimizer.step(g, delta);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      summary.diverged = true;
      summary.diagnostic = "non-finite gradient at t = " + std::to_string(t);
      break;
    }
    if (t % config.cadence == 0) {
      TraceRow row;
      row.t = t;
      row.alpha = alpha;
      row.f = objective->value(x);
      row.grad_sq = squared_norm(grad);
      row.worker = events.acting_worker(t);
      row.delta_x_sq = squared_norm(delta_x);
      trace.rows.push_back(row);
    }
    for (std::size_t j = 0; j < d; ++j) x[j] -= alpha * delta[j];
    if (!finite(x)) {
      summary.diverged = true;
      summary.diagnostic = "non-finite iterate after t = " + std::to_string(t);
      break;
    }
  }
  if (!summary.diverged) {
    summary.f_final = objective->value(x);
    summary.grad_sq_final = squared_norm(objective->grad(x));
  }
  summary.alpha_T = schedule.alpha(config.T);
  finish_summary(trace);
  return trace;
}

}  // namespace mixsim
