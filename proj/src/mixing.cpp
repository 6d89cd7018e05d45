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

#include "mixsim/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "mixsim/random.hpp"

namespace mixsim {

namespace {

constexpr double kHalvingThreshold = kHalf * (1.0 + kHalvingSlack);
// Random kinds sample window starts from [0, kStartRange).
constexpr std::size_t kStartRange = std::size_t{1} << 24;
// Largest W*d for which window products are multiplied out densely. Dense
// products cost O((W*d)^3) per event, so this sits well below kDenseLimit.
constexpr std::size_t kDenseProductLimit = 256;

// Dense forms of the operators a schedule emits, keyed by kernel.
class DenseCache {
 public:
  const Eigen::MatrixXd& get(const LinearOperator& op) {
    auto it = cache_.find(op.kernel_id());
    if (it == cache_.end()) it = cache_.emplace(op.kernel_id(), op.to_dense()).first;
    return it->second;
  }

 private:
  std::unordered_map<const void*, Eigen::MatrixXd> cache_;
};

double spectral_norm(const Eigen::MatrixXd& m) { return dense_spectral_norm(m); }

void apply_ops(const std::vector<LinearOperator>& ops, StateVector& x,
               StateVector& scratch) {
  for (const auto& op : ops) op.apply_in_place(x, scratch);
}

std::size_t dense_size(const EventSchedule& schedule) {
  return schedule.blocks() * schedule.dim();
}

// First window at which sigma_max(P_{s,w} - Minf) halves for every start.
// Exact over all directions because P Minf = Minf and Minf is an orthogonal
// projection for replicated layouts.
std::optional<std::size_t> dense_tmix(const EventSchedule& schedule,
                                      const ConsensusOperator& minf,
                                      const std::vector<std::size_t>& starts,
                                      std::size_t max_window, double& best) {
  const Eigen::MatrixXd m_inf = minf.op().to_dense();
  const auto size = static_cast<Eigen::Index>(dense_size(schedule));
  DenseCache cache;
  std::vector<LinearOperator> ops;
  std::size_t worst = 0;
  best = 0.0;
  for (std::size_t s : starts) {
    Eigen::MatrixXd product = Eigen::MatrixXd::Identity(size, size);
    double sigma = spectral_norm(product - m_inf);
    std::optional<std::size_t> found;
    double start_best = sigma;
    for (std::size_t w = 1; w <= max_window; ++w) {
      schedule.slot(s + w - 1, ops);
      if (!ops.empty()) {
        for (const auto& op : ops) product = cache.get(op) * product;
        sigma = spectral_norm(product - m_inf);
        start_best = std::min(start_best, sigma);
      }
      if (sigma <= kHalvingThreshold) {
        found = w;
        break;
      }
    }
    best = std::max(best, start_best);
    if (!found) return std::nullopt;
    worst = std::max(worst, *found);
  }
  return worst;
}

}  // namespace

ConsensusOperator layout_consensus(const EventSchedule& schedule) {
  if (schedule.spec().has_server()) {
    return ConsensusOperator::server_broadcast(schedule.blocks(), schedule.dim());
  }
  return ConsensusOperator::block_average(schedule.blocks(), schedule.dim());
}

TmixEstimate estimate_tmix(const EventSchedule& schedule,
                           const ConsensusOperator& minf,
                           const MixingOptions& options) {
  if (options.probes < 1 || options.max_window < 1 || options.starts < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "estimate_tmix needs probes, starts and max_window >= 1");
  }
  if (!(options.quantile > 0.0 && options.quantile <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quantile must lie in (0, 1]");
  }
  const bool deterministic = !schedule.randomized();
  TmixEstimate est;
  est.quantile = deterministic ? 1.0 : options.quantile;

  std::mt19937_64 rng = make_rng(options.seed, "tmix");
  std::vector<std::size_t> starts;
  if (deterministic) {
    const std::size_t period = schedule.period().value_or(1);
    if (period <= options.max_residue_starts) {
      for (std::size_t s = 0; s < period; ++s) starts.push_back(s);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, period - 1);
      for (std::size_t i = 0; i < options.starts; ++i) starts.push_back(pick(rng));
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, kStartRange - 1);
    for (std::size_t i = 0; i < options.starts + options.worst_case_starts; ++i) {
      starts.push_back(pick(rng));
    }
  }
  // Quantile pairs are the first `quantile_starts` starts; the worst case
  // runs over all of them.
  const std::size_t quantile_starts = deterministic ? starts.size() : options.starts;

  // Unit probes in the range of I - Minf.
  std::vector<StateVector> probes;
  for (std::size_t p = 0; p < options.probes; ++p) {
    StateVector x = StateVector::gaussian(schedule.blocks(), schedule.dim(), rng);
    StateVector y = x - minf.apply(x);
    const double norm = y.norm();
    if (norm < 1e-12) continue;
    probes.push_back(std::move(y.scale(1.0 / norm)));
  }
  if (probes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "consensus complement is trivial");
  }
  est.probes = probes.size();
  est.starts = quantile_starts;

  std::vector<std::vector<StateVector>> states(starts.size(), probes);
  const std::size_t total = starts.size() * probes.size();
  const std::size_t quantile_total = quantile_starts * probes.size();
  std::vector<double> ratios(total, 1.0);
  const std::size_t need =
      est.quantile >= 1.0
          ? quantile_total
          : std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(
                       est.quantile * static_cast<double>(quantile_total) - 1e-9)));

  std::optional<std::size_t> hat;
  std::optional<std::size_t> worst;
  double best = std::numeric_limits<double>::infinity();
  std::vector<LinearOperator> ops;
  StateVector scratch;
  std::vector<double> sorted(quantile_total);
  bool dirty = true;
  for (std::size_t w = 1; w <= options.max_window; ++w) {
    for (std::size_t si = 0; si < starts.size(); ++si) {
      schedule.slot(starts[si] + w - 1, ops);
      if (ops.empty()) continue;
      dirty = true;
      for (std::size_t p = 0; p < probes.size(); ++p) {
        apply_ops(ops, states[si][p], scratch);
        ratios[si * probes.size() + p] = states[si][p].norm();
      }
    }
    if (!dirty) continue;
    dirty = false;
    std::copy(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(quantile_total),
              sorted.begin());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(need - 1),
                     sorted.end());
    const double q_ratio = sorted[need - 1];
    best = std::min(best, q_ratio);
    const double max_ratio = *std::max_element(ratios.begin(), ratios.end());
    if (!hat && q_ratio <= kHalvingThreshold) {
      hat = w;
      est.ratio_at_tmix = q_ratio;
    }
    if (!worst && max_ratio <= kHalvingThreshold) worst = w;
    if (hat && worst) break;
  }
  if (!hat) throw MixingNotObserved(best, options.max_window);
  est.tmix_hat = *hat;
  est.tmix_worst = worst;

  if (deterministic && options.dense_check &&
      dense_size(schedule) <= kDenseProductLimit) {
    double dense_best = 0.0;
    auto exact = dense_tmix(schedule, minf, starts, options.max_window, dense_best);
    if (!exact) throw MixingNotObserved(dense_best, options.max_window);
    est.dense_checked = true;
    est.tmix_hat = std::max(est.tmix_hat, *exact);
    est.tmix_worst = est.tmix_hat;
  }
  return est;
}

Assumption1Result verify_assumption1(std::span<const LinearOperator> ops,
                                     const ConsensusOperator& minf, double tol,
                                     std::size_t probes, std::uint64_t seed) {
  Assumption1Result result;
  std::mt19937_64 rng = make_rng(seed, "assumption1");
  const auto& m = minf.op();
  for (std::size_t p = 0; p < probes; ++p) {
    const StateVector x = StateVector::gaussian(m.blocks(), m.dim(), rng);
    const double scale = x.norm();
    const StateVector mx = minf.apply(x);
    result.max_deviation =
        std::max(result.max_deviation, (minf.apply(mx) - mx).norm() / scale);
    for (const auto& op : ops) {
      const double a = (minf.apply(op.apply(x)) - mx).norm();
      const double b = (op.apply(mx) - mx).norm();
      result.max_deviation = std::max(result.max_deviation, std::max(a, b) / scale);
    }
  }
  result.operators_checked = ops.size();
  result.ok = result.max_deviation <= tol;
  return result;
}

Assumption1Result verify_assumption1(const EventSchedule& schedule,
                                     const ConsensusOperator& minf,
                                     std::size_t horizon, double tol,
                                     std::size_t probes, std::uint64_t seed) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
  std::vector<LinearOperator> distinct;
  std::vector<LinearOperator> ops;
  for (std::size_t t = 0; t < horizon; ++t) {
    schedule.slot(t, ops);
    for (const auto& op : ops) {
      const bool seen = std::any_of(distinct.begin(), distinct.end(), [&](const auto& o) {
        return o.kernel_id() == op.kernel_id();
      });
      if (!seen) distinct.push_back(op);
    }
  }
  return verify_assumption1(distinct, minf, tol, probes, seed);
}

ProjectionCheck verify_projections(const EventSchedule& schedule,
                                   const ConsensusOperator& minf,
                                   std::size_t horizon, double tol,
                                   std::size_t probes, std::uint64_t seed) {
  ProjectionCheck check;
  std::mt19937_64 rng = make_rng(seed, "projections");
  std::normal_distribution<double> normal;
  const BlockProjection representative{minf.representative_block(),
                                       BlockProjection::Kind::kRead};
  for (std::size_t p = 0; p < probes; ++p) {
    const StateVector x = StateVector::gaussian(schedule.blocks(), schedule.dim(), rng);
    const StateVector mx = minf.apply(x);
    const auto star = block_read(mx, representative);
    std::vector<double> delta(schedule.dim());
    for (auto& v : delta) v = normal(rng);
    const double scale = x.norm() + 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const auto view = block_read(mx, schedule.read_proj(t));
      double dev = 0.0;
      for (std::size_t j = 0; j < view.size(); ++j) dev += std::pow(view[j] - star[j], 2);
      StateVector written(schedule.blocks(), schedule.dim());
      block_accumulate_in_place(written, schedule.write_proj(t), delta,
                                schedule.write_gain());
      const auto moved = block_read(minf.apply(written), representative);
      for (std::size_t j = 0; j < moved.size(); ++j) dev += std::pow(moved[j] - delta[j], 2);
      check.max_deviation = std::max(check.max_deviation, std::sqrt(dev) / scale);
    }
  }
  check.ok = check.max_deviation <= tol;
  return check;
}

ScaleBound verify_scale_bound(const EventSchedule& schedule, std::size_t horizon,
                              std::size_t probes, std::size_t windows,
                              std::uint64_t seed) {
  ScaleBound bound;
  bound.declared = schedule.spec().declared_xi();
  std::mt19937_64 rng = make_rng(seed, "scale-bound");
  std::uniform_int_distribution<std::size_t> pick_start(0, kStartRange - 1);
  std::uniform_int_distribution<std::size_t> pick_length(0, horizon);
  const ConsensusOperator minf = layout_consensus(schedule);
  const bool exact = dense_size(schedule) <= kDenseProductLimit;

  if (exact) {
    bound.xi_hat = spectral_norm(minf.op().to_dense());
  } else {
    bound.xi_hat = op_norm(minf.op(), 200, 1e-8).value;
  }

  DenseCache cache;
  std::vector<LinearOperator> ops;
  std::vector<LinearOperator> window_ops;
  StateVector scratch;
  for (std::size_t k = 0; k < windows; ++k) {
    const std::size_t s = pick_start(rng);
    const std::size_t length = pick_length(rng);
    window_ops.clear();
    for (std::size_t t = s; t < s + length; ++t) {
      schedule.slot(t, ops);
      window_ops.insert(window_ops.end(), ops.begin(), ops.end());
    }
    if (exact) {
      const auto size = static_cast<Eigen::Index>(dense_size(schedule));
      Eigen::MatrixXd product = Eigen::MatrixXd::Identity(size, size);
      for (const auto& op : window_ops) product = cache.get(op) * product;
      bound.xi_hat = std::max(bound.xi_hat, spectral_norm(product));
      ++bound.exact_windows;
    }
    for (std::size_t p = 0; p < probes; ++p) {
      StateVector x = StateVector::gaussian(schedule.blocks(), schedule.dim(), rng);
      StateVector c = minf.apply(x);
      const double nx = x.norm();
      const double nc = c.norm();
      apply_ops(window_ops, x, scratch);
      apply_ops(window_ops, c, scratch);
      bound.xi_hat = std::max(bound.xi_hat, x.norm() / nx);
      if (nc > 0.0) bound.xi_hat = std::max(bound.xi_hat, c.norm() / nc);
    }
  }
  bound.ok = bound.xi_hat <= bound.declared + 1e-6;
  return bound;
}

std::vector<Lemma1Violation> verify_lemma1(const EventSchedule& schedule,
                                           const ConsensusOperator& minf,
                                           std::size_t tmix, double xi,
                                           std::size_t probes,
                                           std::size_t windows,
                                           std::uint64_t seed) {
  if (tmix < 1) throw Error(ErrorCode::kInvalidArgument, "tmix must be >= 1");
  std::vector<Lemma1Violation> violations;
  std::mt19937_64 rng = make_rng(seed, "lemma1");
  std::uniform_int_distribution<std::size_t> pick_start(0, kStartRange - 1);
  std::uniform_int_distribution<std::size_t> pick_length(0, 4 * tmix);
  std::vector<LinearOperator> ops;
  std::vector<LinearOperator> window_ops;
  StateVector scratch;
  for (std::size_t k = 0; k < windows; ++k) {
    const std::size_t s = pick_start(rng);
    const std::size_t length = pick_length(rng);
    window_ops.clear();
    for (std::size_t t = s; t < s + length; ++t) {
      schedule.slot(t, ops);
      window_ops.insert(window_ops.end(), ops.begin(), ops.end());
    }
    const double decay = std::ldexp(1.0, -static_cast<int>(length / tmix));
    for (std::size_t p = 0; p < probes; ++p) {
      StateVector x = StateVector::gaussian(schedule.blocks(), schedule.dim(), rng);
      const StateVector mx = minf.apply(x);
      const double rhs = decay * (1.0 + xi) * xi * x.norm();
      apply_ops(window_ops, x, scratch);
      const double lhs = (x - mx).norm();
      if (lhs > rhs * (1.0 + 1e-9)) violations.push_back({s, length, p, lhs, rhs});
    }
  }
  return violations;
}

std::size_t spectral_tmix(const Topology& topology) {
  if (topology.slem >= 1.0 - 1e-12) {
    throw Error(ErrorCode::kInvalidArgument,
                "topology is disconnected (slem = 1); gossip never mixes");
  }
  return halving_applications(topology.slem);
}

MixingReport characterize(const EventSchedule& schedule,
                          const MixingOptions& options) {
  MixingReport report;
  report.protocol = schedule.spec().label();
  report.n = schedule.workers();
  report.tmix_theory = theoretical_tmix(schedule.spec());
  report.xi_declared = schedule.spec().declared_xi();

  const ConsensusOperator minf = layout_consensus(schedule);
  const TmixEstimate est = estimate_tmix(schedule, minf, options);
  report.tmix_hat = est.tmix_hat;
  report.tmix_worst = est.tmix_worst;
  report.quantile = est.quantile;
  report.probes = est.probes;
  report.starts = est.starts;
  report.dense_checked = est.dense_checked;

  const std::size_t horizon =
      std::max(4 * est.tmix_hat, schedule.period().value_or(1));
  const ScaleBound scale =
      verify_scale_bound(schedule, horizon, options.probes, options.windows, options.seed);
  report.xi_hat = scale.xi_hat;
  report.assumption3_ok = scale.ok;

  const Assumption1Result a1 =
      verify_assumption1(schedule, minf, horizon, 1e-10, 100, options.seed);
  report.assumption1_ok = a1.ok;
  report.assumption1_deviation = a1.max_deviation;
  report.projections_ok =
      verify_projections(schedule, minf, std::min<std::size_t>(horizon, 256)).ok;

  report.lemma1_tmix = est.tmix_worst.value_or(est.tmix_hat);
  report.violations = verify_lemma1(schedule, minf, report.lemma1_tmix, scale.xi_hat,
                                    options.probes, options.windows, options.seed);
  return report;
}

}  // namespace mixsim
