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


#include "mixsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "mixsim/error.hpp"

namespace mixsim {
namespace {

double squared(double v) { return v * v; }

double xi_factor(double xi) { return squared(1.0 + xi) * squared(xi); }

double sum_pow(std::span<const double> alpha, int k) {
  double s = 0.0;
  for (double a : alpha) s += std::pow(a, k);
  return s;
}

// sum_{t<=T} alpha_t^3, i.e. including the step after the last recorded one.
double sum_cubed_through_T(const SeedSums& sums) {
  return sum_pow(sums.alpha, 3) + std::pow(sums.alpha_T, 3);
}

void require_non_increasing(const SeedSums& sums) {
  for (std::size_t t = 1; t < sums.alpha.size(); ++t) {
    if (sums.alpha[t] > sums.alpha[t - 1]) {
      throw Error(ErrorCode::kPrecondition, "step-size schedule must be non-increasing");
    }
  }
  if (!sums.alpha.empty() && sums.alpha_T > sums.alpha.back()) {
    throw Error(ErrorCode::kPrecondition, "step-size schedule must be non-increasing");
  }
}

void require_sgd(const SeedSums& sums, const char* check) {
  if (sums.optimizer != "sgd") {
    throw Error(ErrorCode::kPrecondition,
                std::string(check) + " applies to SGD traces, got " + sums.optimizer);
  }
}

void require_extras(const SeedSums& sums, const char* check) {
  if (!sums.extras_available) {
    throw Error(ErrorCode::kPrecondition,
                std::string(check) + " needs shadow-recursion columns, which are only "
                                     "recoverable from disk for SGD traces");
  }
}

BoundReport start_report(const char* name, const SeedSums& sums) {
  BoundReport r;
  r.name = name;
  r.seeds = sums.seeds;
  r.schedule = schedule_id(sums.alpha);
  return r;
}

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> r(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += squared(x[i] - mx);
    syy += squared(y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

void finalize(BoundReport& report) {
  report.slack = report.rhs - report.lhs;
  report.holds = std::isfinite(report.lhs) && std::isfinite(report.rhs) &&
                 report.lhs <= report.rhs * (1.0 + kBoundTolerance);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double standard_error(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += squared(v - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

std::string schedule_id(std::span<const double> alpha) {
  if (alpha.empty()) return "empty";
  const bool flat = std::all_of(alpha.begin(), alpha.end(),
                                [&](double a) { return a == alpha.front(); });
  char buf[64];
  if (flat) {
    std::snprintf(buf, sizeof buf, "constant(%.17g)", alpha.front());
  } else {
    std::snprintf(buf, sizeof buf, "table(%zu)", alpha.size());
  }
  return buf;
}

SeedSums aggregate(std::span<const Trace> traces) {
  if (traces.empty()) throw Error(ErrorCode::kInvalidArgument, "no traces to aggregate");
  const TraceSummary& first = traces.front().summary;
  SeedSums sums;
  sums.optimizer = first.optimizer;
  sums.alpha_T = first.alpha_T;
  std::set<std::uint64_t> seen;
  for (const Trace& trace : traces) {
    const TraceSummary& s = trace.summary;
    if (s.config_hash != first.config_hash) {
      throw Error(ErrorCode::kPrecondition, "traces differ in config hash: " +
                                                s.config_hash + " vs " + first.config_hash);
    }
    if (s.cadence != 1) {
      throw Error(ErrorCode::kPrecondition, "bound checks need traces recorded at cadence 1");
    }
    if (s.diverged) {
      throw Error(ErrorCode::kDiverged, "trace for seed " + std::to_string(s.seed) +
                                            " diverged: " + s.diagnostic);
    }
    if (trace.rows.size() != s.T || s.T != first.T) {
      throw Error(ErrorCode::kPrecondition, "trace for seed " + std::to_string(s.seed) +
                                                " does not cover all T steps");
    }
    if (!seen.insert(s.seed).second) {
      throw Error(ErrorCode::kPrecondition, "duplicate seed " + std::to_string(s.seed));
    }
    if (sums.alpha.empty()) {
      for (const auto& row : trace.rows) sums.alpha.push_back(row.alpha);
    } else {
      for (std::size_t t = 0; t < trace.rows.size(); ++t) {
        if (trace.rows[t].alpha != sums.alpha[t]) {
          throw Error(ErrorCode::kPrecondition, "traces disagree on the step-size schedule");
        }
      }
    }
    double wg = 0.0, wdg = 0.0, wgg = 0.0, cdx = 0.0, g = 0.0;
    for (std::size_t t = 0; t < trace.rows.size(); ++t) {
      const auto& row = trace.rows[t];
      if (row.t != t) {
        throw Error(ErrorCode::kPrecondition, "trace rows are not consecutive steps");
      }
      wg += row.alpha * row.grad_sq;
      wdg += row.alpha * row.delta_gap_sq;
      wgg += row.alpha * row.grad_gap_sq;
      cdx += std::pow(row.alpha, 3) * row.delta_x_sq;
      g += row.grad_sq;
    }
    sums.seeds.push_back(s.seed);
    sums.weighted_grad.push_back(wg);
    sums.weighted_delta_gap.push_back(wdg);
    sums.weighted_grad_gap.push_back(wgg);
    sums.cubed_delta_x.push_back(cdx);
    sums.grad_mean.push_back(g / static_cast<double>(s.T));
    sums.f0.push_back(s.f0);
    sums.f_final.push_back(s.f_final);
    sums.extras_available = sums.extras_available && s.extras_available;
  }
  return sums;
}

double theorem1_coefficient(double L, double tmix, double xi, double alpha) {
  return 16.0 * xi_factor(xi) * squared(tmix * L * alpha);
}

BoundReport check_lemma2(std::span<const Trace> traces, double tmix, double xi, double Lcal,
                         double sigma2) {
  const SeedSums sums = aggregate(traces);
  require_non_increasing(sums);
  require_extras(sums, "lemma2");
  const double k = xi_factor(xi);
  BoundReport r = start_report("lemma2", sums);
  r.lhs = mean(sums.weighted_delta_gap);
  r.lhs_stderr = standard_error(sums.weighted_delta_gap);
  r.rhs = 16.0 * k * squared(tmix * Lcal) * mean(sums.cubed_delta_x) +
          4.0 * k * tmix * sigma2 * squared(Lcal) * sum_cubed_through_T(sums);
  r.inputs = {{"tmix", tmix}, {"xi", xi}, {"Lcal", Lcal}, {"sigma2", sigma2},
              {"T", static_cast<double>(sums.alpha.size())}};
  finalize(r);
  return r;
}

BoundReport check_lemma3(std::span<const Trace> traces, double L, double sigma2) {
  const SeedSums sums = aggregate(traces);
  require_sgd(sums, "lemma3");
  require_extras(sums, "lemma3");
  BoundReport r = start_report("lemma3", sums);
  r.lhs = mean(sums.weighted_grad);
  r.lhs_stderr = standard_error(sums.weighted_grad);
  r.rhs = 2.0 * (mean(sums.f0) - mean(sums.f_final)) + sigma2 * L * sum_pow(sums.alpha, 2) +
          mean(sums.weighted_grad_gap);
  r.inputs = {{"L", L}, {"sigma2", sigma2}, {"T", static_cast<double>(sums.alpha.size())}};
  finalize(r);
  return r;
}

BoundReport check_theorem1(std::span<const Trace> traces, double L, double tmix, double xi,
                           double sigma2) {
  const SeedSums sums = aggregate(traces);
  require_sgd(sums, "theorem1");
  const double k = xi_factor(xi);
  BoundReport r = start_report("theorem1", sums);

  std::vector<double> weight(sums.alpha.size());
  for (std::size_t t = 0; t < weight.size(); ++t) {
    weight[t] = sums.alpha[t] * (1.0 - theorem1_coefficient(L, tmix, xi, sums.alpha[t]));
  }
  // The per-seed lhs needs the row-level gradients again.
  std::vector<double> lhs;
  lhs.reserve(traces.size());
  for (const Trace& trace : traces) {
    double s = 0.0;
    for (std::size_t t = 0; t < weight.size(); ++t) s += weight[t] * trace.rows[t].grad_sq;
    lhs.push_back(s);
  }
  r.lhs = mean(lhs);
  r.lhs_stderr = standard_error(lhs);
  r.rhs = 2.0 * (mean(sums.f0) - mean(sums.f_final)) + sigma2 * L * sum_pow(sums.alpha, 2) +
          4.0 * k * tmix * sigma2 * squared(L) * sum_cubed_through_T(sums);
  const double coef0 =
      sums.alpha.empty() ? 0.0 : theorem1_coefficient(L, tmix, xi, sums.alpha.front());
  r.inputs = {{"L", L}, {"tmix", tmix}, {"xi", xi}, {"sigma2", sigma2},
              {"T", static_cast<double>(sums.alpha.size())}, {"coefficient_alpha0", coef0}};
  if (coef0 >= 1.0) {
    r.warnings.push_back("step-size coefficient 16(1+xi)^2 xi^2 tmix^2 L^2 alpha_0^2 = " +
                         std::to_string(coef0) + " >= 1; the left-hand side is vacuous");
  }
  finalize(r);
  return r;
}

Theorem2Constants theorem2_constants(const SamConfig& cfg, double L, double ginf,
                                     double f0_gap, double xi, std::size_t d) {
  cfg.validate();
  if (!(ginf > 0.0) || !std::isfinite(ginf)) {
    throw Error(ErrorCode::kPrecondition, "adaptive bound constants need a finite gradient bound");
  }
  const double p = cfg.p;
  const double b1 = cfg.beta1;
  const double b2 = cfg.beta2;
  const double c = cfg.c;
  const double b2p = std::pow(b2, 2.0 * p);
  if (b1 >= b2p) {
    throw Error(ErrorCode::kPrecondition, "adaptive bound constants need beta1 < beta2^(2p)");
  }
  const double g2p = std::pow(ginf, 2.0 * p);
  Theorem2Constants k;
  k.c1 = 2.0 * g2p * f0_gap;
  k.c2 = 2.0 * (3.0 * L + 6.0 * L * b1 * b1 / (1.0 - b1)) * std::pow(ginf, 2.0 - 2.0 * p) *
         static_cast<double>(d) / (std::pow(1.0 - b2, 2.0 * p) * (1.0 - b1 / b2p));
  k.c3 = 4.0 * L * g2p / squared(1.0 - b1);
  const double head = 8.0 * xi_factor(xi) * squared(c + 2.0 * p * ginf) * std::pow(L, 4) *
                      g2p / std::pow(c, 4.0 * p + 2.0);
  const double mid = 2.0 * (1.0 + b1) * (2.0 - b1) * g2p / squared(1.0 - b1) +
                     (2.0 - b1) / (1.0 - b1);
  const double tail = std::max(4.0, 16.0 * p * p * ginf * ginf / (c * c));
  k.c4 = head * mid * tail;
  return k;
}

BoundReport check_theorem2(std::span<const Trace> traces, const Theorem2Constants& constants,
                           double tmix, double sigma2) {
  const SeedSums sums = aggregate(traces);
  BoundReport r = start_report("theorem2", sums);
  const double s2 = sum_pow(sums.alpha, 2);
  r.lhs = mean(sums.weighted_grad);
  r.lhs_stderr = standard_error(sums.weighted_grad);
  r.rhs = constants.c1 + constants.c2 * s2 + constants.c3 * sigma2 * s2 +
          constants.c4 * tmix * sigma2 * sum_cubed_through_T(sums);
  r.inputs = {{"C1", constants.c1}, {"C2", constants.c2}, {"C3", constants.c3},
              {"C4", constants.c4}, {"tmix", tmix}, {"sigma2", sigma2},
              {"T", static_cast<double>(sums.alpha.size())}};
  finalize(r);
  return r;
}

BoundReport check_corollary1(std::span<const Trace> traces, double L, double tmix, double xi,
                             double sigma2, double gap) {
  const SeedSums sums = aggregate(traces);
  require_sgd(sums, "corollary1");
  BoundReport r = start_report("corollary1", sums);
  const double T = static_cast<double>(sums.alpha.size());
  const double sigma = std::sqrt(sigma2);
  const double threshold = corollary1_threshold(gap, xi, tmix, L, sigma2);
  r.lhs = mean(sums.grad_mean);
  r.lhs_stderr = standard_error(sums.grad_mean);
  r.rhs = 4.0 * sigma * std::sqrt(2.0 * gap * L / T) + 2.0 * std::sqrt(2.0 * gap) * tmix / T +
          16.0 * xi_factor(xi) * tmix * gap * L / T;
  r.inputs = {{"L", L}, {"tmix", tmix}, {"xi", xi}, {"sigma2", sigma2}, {"gap", gap},
              {"T", T}, {"threshold", threshold}};
  // The bound is derived for the constant step sqrt(2 gap) / (sigma sqrt(L T) + tmix).
  const double step = std::sqrt(2.0 * gap) / (sigma * std::sqrt(L * T) + tmix);
  const bool matched = std::all_of(sums.alpha.begin(), sums.alpha.end(), [&](double a) {
    return std::abs(a - step) <= 1e-9 * step;
  });
  r.inputs.emplace_back("alpha_corollary", step);
  r.applicable = matched && T >= threshold;
  if (!matched) {
    r.warnings.push_back("schedule is not the tuned step size; bound not asserted");
  } else if (T < threshold) {
    r.warnings.push_back("T below the iteration threshold; bound not asserted");
  }
  finalize(r);
  return r;
}

RateFit fit_rate(std::span<const RatePoint> points) {
  std::set<double> ts, ms;
  for (const auto& p : points) {
    if (!(p.T > 0.0) || !std::isfinite(p.value) || !(p.tmix >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "rate points need T > 0, tmix >= 0, finite values");
    }
    ts.insert(p.T);
    ms.insert(p.tmix);
  }
  if (points.size() < 4 || ts.size() < 2 || ms.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "degenerate grid");
  }

  double s11 = 0.0, s12 = 0.0, s22 = 0.0, s1y = 0.0, s2y = 0.0;
  for (const auto& p : points) {
    const double x1 = 1.0 / std::sqrt(p.T);
    const double x2 = p.tmix / p.T;
    s11 += x1 * x1;
    s12 += x1 * x2;
    s22 += x2 * x2;
    s1y += x1 * p.value;
    s2y += x2 * p.value;
  }
  const double det = s11 * s22 - s12 * s12;
  if (!(std::abs(det) > 1e-14 * s11 * s22)) {
    throw Error(ErrorCode::kInvalidArgument, "degenerate grid");
  }

  RateFit fit;
  fit.points.assign(points.begin(), points.end());
  fit.a = (s22 * s1y - s12 * s2y) / det;
  fit.b = (s11 * s2y - s12 * s1y) / det;
  if (fit.a < 0.0 || fit.b < 0.0) {
    // Best of the two single-term fits on the boundary of the feasible set.
    const double a_only = std::max(0.0, s1y / s11);
    const double b_only = std::max(0.0, s2y / s22);
    auto sse = [&](double a, double b) {
      double e = 0.0;
      for (const auto& p : points) {
        e += squared(a / std::sqrt(p.T) + b * p.tmix / p.T - p.value);
      }
      return e;
    };
    if (sse(a_only, 0.0) <= sse(0.0, b_only)) {
      fit.a = a_only;
      fit.b = 0.0;
    } else {
      fit.a = 0.0;
      fit.b = b_only;
    }
    fit.clipped = true;
  }

  double sse = 0.0;
  for (const auto& p : points) {
    sse += squared(fit.a / std::sqrt(p.T) + fit.b * p.tmix / p.T - p.value);
  }
  fit.residual = std::sqrt(sse / static_cast<double>(points.size()));

  fit.a_deviation = 0.0;
  for (double m : ms) {
    double num = 0.0, den = 0.0;
    for (const auto& p : points) {
      if (p.tmix != m) continue;
      const double x1 = 1.0 / std::sqrt(p.T);
      num += x1 * (p.value - fit.b * p.tmix / p.T);
      den += x1 * x1;
    }
    const double aj = num / den;
    fit.a_by_tmix.emplace_back(m, aj);
    fit.a_deviation = fit.a > 0.0
                          ? std::max(fit.a_deviation, std::abs(aj - fit.a) / fit.a)
                          : std::numeric_limits<double>::infinity();
  }
  return fit;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "spearman needs two equal-length samples of size >= 2");
  }
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

Lemma5Result check_lemma5(std::span<const double> a, std::span<const double> b, double rho,
                          std::size_t period) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "sequence inequality: sequences differ in length");
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorCode::kPrecondition, "rho must be in [0, 1)");
  if (period < 1) throw Error(ErrorCode::kPrecondition, "period must be >= 1");
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (!(a[t] >= 0.0) || !(b[t] >= 0.0)) {
      throw Error(ErrorCode::kPrecondition, "sequence inequality: sequences must be nonnegative");
    }
    if (t > 0 && a[t] > a[t - 1]) {
      throw Error(ErrorCode::kPrecondition, "sequence inequality needs a non-increasing sequence a");
    }
  }
  // rho^k with 0^0 = 1, which std::pow already guarantees.
  Lemma5Result r;
  double ab = 0.0, ab2 = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    double inner = 0.0;
    for (std::size_t s = 0; s <= t; ++s) {
      inner += std::pow(rho, static_cast<double>((t - s) / period)) * b[s];
    }
    r.lhs_linear += a[t] * inner;
    r.lhs_squared += a[t] * inner * inner;
    ab += a[t] * b[t];
    ab2 += a[t] * b[t] * b[t];
  }
  const double P = static_cast<double>(period);
  r.rhs_linear = P / (1.0 - rho) * ab;
  r.rhs_squared = P * P / squared(1.0 - rho) * ab2;
  r.holds_linear = r.lhs_linear <= r.rhs_linear * (1.0 + kBoundTolerance);
  r.holds_squared = r.lhs_squared <= r.rhs_squared * (1.0 + kBoundTolerance);
  return r;
}

}  // namespace mixsim
