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


#include "mixsim/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <thread>

#include "mixsim/analysis.hpp"
#include "mixsim/config.hpp"
#include "mixsim/error.hpp"
#include "mixsim/mixing.hpp"
#include "mixsim/random.hpp"
#include "mixsim/trace_io.hpp"

namespace mixsim {
namespace fs = std::filesystem;

namespace {

std::string out_dir(const CommandOptions& options, const ExperimentConfig& cfg) {
  return options.out_dir ? *options.out_dir : cfg.out_dir;
}

std::string trace_path(const std::string& dir, const std::string& key, std::uint64_t seed) {
  return (fs::path(dir) / "traces" / key / ("seed_" + std::to_string(seed) + ".csv")).string();
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Mixing time handed to the bound checks: the worst-case window when the
// schedule is random, the exact one otherwise.
struct MixingFacts {
  std::optional<std::size_t> tmix;
  double xi = 1.0;
};

class MixingCache {
 public:
  explicit MixingCache(MixingOptions options) : options_(options) {}

  MixingFacts get(const ProtocolSpec& spec) {
    const std::string key = spec.label() + "/" + std::to_string(spec.n);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    MixingFacts facts;
    facts.xi = spec.declared_xi();
    EventSchedule schedule(spec);
    try {
      const TmixEstimate est = estimate_tmix(schedule, layout_consensus(schedule), options_);
      facts.tmix = est.tmix_worst.value_or(est.tmix_hat);
    } catch (const MixingNotObserved&) {
      facts.tmix.reset();
    }
    cache_.emplace(key, facts);
    return facts;
  }

 private:
  MixingOptions options_;
  std::map<std::string, MixingFacts> cache_;
};

struct LoadedRun {
  RunPoint point;
  std::vector<Trace> traces;
  bool failed = false;
  std::string diagnostic;
};

// Reads summary.json and the trace files of every grid point. Throws
// Error(kIo) when anything is missing or stale.
std::vector<LoadedRun> load_runs(const ExperimentConfig& cfg, const std::string& dir,
                                 std::uint64_t seed_offset) {
  const std::string summary_path = (fs::path(dir) / "summary.json").string();
  if (!fs::exists(summary_path)) {
    throw Error(ErrorCode::kIo, "missing traces: no " + summary_path + " (run 'mixsim run' first)");
  }
  Json summary;
  try {
    summary = Json::parse(read_file(summary_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, "malformed " + summary_path + ": " + e.what());
  }
  std::map<std::string, const Json*> by_key;
  for (const auto& r : summary.at("runs")) by_key[r.at("key").get<std::string>()] = &r;

  std::vector<LoadedRun> runs;
  for (const auto& point : expand_grid(cfg)) {
    auto it = by_key.find(point.key);
    if (it == by_key.end()) throw Error(ErrorCode::kIo, "missing traces for " + point.key);
    const Json& r = *it->second;
    if (r.at("run_hash").get<std::string>() != config_hash(point.config)) {
      throw Error(ErrorCode::kIo, "traces for " + point.key + " come from a different config");
    }
    LoadedRun loaded;
    loaded.point = point;
    std::map<std::uint64_t, const Json*> by_seed;
    for (const auto& t : r.at("traces")) by_seed[t.at("seed").get<std::uint64_t>()] = &t;
    for (std::uint64_t s : cfg.seeds) {
      const std::uint64_t seed = s + seed_offset;
      auto st = by_seed.find(seed);
      if (st == by_seed.end()) {
        throw Error(ErrorCode::kIo, "missing trace for " + point.key + " seed " + std::to_string(seed));
      }
      Trace trace;
      trace.summary = summary_from_json(*st->second);
      if (trace.summary.diverged) {
        loaded.failed = true;
        loaded.diagnostic = "seed " + std::to_string(seed) + ": " + trace.summary.diagnostic;
        continue;
      }
      const std::string path = trace_path(dir, point.key, seed);
      if (!fs::exists(path)) throw Error(ErrorCode::kIo, "missing trace file " + path);
      trace.rows = read_trace_csv(path);
      restore_extras(trace);
      loaded.traces.push_back(std::move(trace));
    }
    runs.push_back(std::move(loaded));
  }
  return runs;
}

struct KeyedReport {
  std::string key;
  BoundReport report;
};

BoundReport failure_report(const std::string& name, const std::string& why) {
  BoundReport r;
  r.name = name;
  r.lhs = std::numeric_limits<double>::quiet_NaN();
  r.rhs = std::numeric_limits<double>::quiet_NaN();
  r.warnings.push_back(why);
  r.holds = false;
  return r;
}

BoundReport skipped_report(const std::string& name, const std::string& why) {
  BoundReport r = failure_report(name, why);
  r.applicable = false;
  return r;
}

// Mean of f(x_0(seed) * scale) - lower_bound over seeds.
double mean_gap(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                const Objective& objective, double scale) {
  double sum = 0.0;
  for (std::uint64_t seed : seeds) {
    RunConfig c = base;
    c.seed = seed;
    auto x0 = initial_point(c);
    for (auto& v : x0) v *= scale;
    sum += objective.value(x0) - objective.lower_bound();
  }
  return sum / static_cast<double>(seeds.size());
}

std::vector<BoundReport> bound_checks(const LoadedRun& run, MixingCache& mixing) {
  std::vector<BoundReport> out;
  const RunConfig& config = run.point.config;
  const bool sgd = config.optimizer.kind == OptimizerKind::kSgd;
  const std::vector<std::string> names =
      sgd ? std::vector<std::string>{"lemma2", "lemma3", "theorem1", "corollary1"}
          : std::vector<std::string>{"theorem2"};
  auto all = [&](auto make) {
    for (const auto& n : names) out.push_back(make(n));
    return out;
  };
  if (run.failed) {
    return all([&](const std::string& n) { return failure_report(n, "run diverged: " + run.diagnostic); });
  }
  if (config.cadence != 1) {
    return all([&](const std::string& n) {
      return skipped_report(n, "bound checks need cadence 1");
    });
  }
  const MixingFacts facts = mixing.get(config.protocol);
  if (!facts.tmix) {
    return all([&](const std::string& n) {
      return skipped_report(n, "protocol never mixes; no mixing time");
    });
  }
  const double tmix = static_cast<double>(*facts.tmix);
  const auto objective = make_objective(config.objective);
  const GradientOracle oracle(objective, config.noise);
  const double L = objective->smoothness();
  const double sigma2 = oracle.sigma2();
  std::vector<std::uint64_t> seeds;
  for (const auto& t : run.traces) seeds.push_back(t.summary.seed);

  if (sgd) {
    out.push_back(check_lemma2(run.traces, tmix, facts.xi, L, sigma2));
    out.push_back(check_lemma3(run.traces, L, sigma2));
    out.push_back(check_theorem1(run.traces, L, tmix, facts.xi, sigma2));
    const double gap = mean_gap(config, seeds, *objective, 1.0);
    out.push_back(check_corollary1(run.traces, L, tmix, facts.xi, sigma2, gap));
    return out;
  }
  const SamConfig& sam = config.optimizer.sam;
  const auto ginf = oracle.ginf();
  if (!ginf) {
    throw Error(ErrorCode::kPrecondition,
                run.point.key + ": adaptive bound needs a bounded-gradient objective and noise");
  }
  const double gap = mean_gap(config, seeds, *objective, 1.0 / (1.0 - sam.beta1));
  const Theorem2Constants k =
      theorem2_constants(sam, L, *ginf, gap, facts.xi, config.objective.d);
  out.push_back(check_theorem2(run.traces, k, tmix, sigma2));
  return out;
}

struct FitOutcome {
  std::string protocol_label;
  std::optional<RateFit> fit;
  std::vector<std::pair<double, double>> spearman_by_T;
  bool passed = true;
  std::string note;
};

std::vector<FitOutcome> rate_fits(const std::vector<LoadedRun>& runs, MixingCache& mixing,
                                  const CheckSettings& settings) {
  std::map<std::string, std::vector<const LoadedRun*>> groups;
  std::vector<std::string> order;
  for (const auto& r : runs) {
    if (!groups.count(r.point.protocol_label)) order.push_back(r.point.protocol_label);
    groups[r.point.protocol_label].push_back(&r);
  }
  std::vector<FitOutcome> out;
  for (const auto& label : order) {
    const auto& group = groups[label];
    std::set<std::size_t> Ts;
    std::set<std::string> protocols;
    for (const LoadedRun* r : group) {
      Ts.insert(r->point.config.T);
      protocols.insert(r->point.config.protocol.label() + "/" +
                       std::to_string(r->point.config.protocol.n));
    }
    if (Ts.size() < 2 || protocols.size() < 2) continue;
    FitOutcome outcome;
    outcome.protocol_label = label;
    std::vector<RatePoint> points;
    std::map<std::size_t, std::vector<std::pair<double, double>>> by_T;
    for (const LoadedRun* r : group) {
      if (r->failed || r->traces.empty()) {
        outcome.passed = false;
        outcome.note = "run " + r->point.key + " failed";
        continue;
      }
      const auto facts = mixing.get(r->point.config.protocol);
      if (!facts.tmix) {
        outcome.note = "protocol never mixes";
        continue;
      }
      std::vector<double> values;
      for (const auto& t : r->traces) values.push_back(t.summary.mean_grad_sq);
      const double tmix = static_cast<double>(*facts.tmix);
      const double value = mean(values);
      points.push_back({static_cast<double>(r->point.config.T), tmix, value});
      by_T[r->point.config.T].emplace_back(tmix, value);
    }
    try {
      outcome.fit = fit_rate(points);
    } catch (const Error& e) {
      outcome.passed = false;
      outcome.note = e.what();
      out.push_back(std::move(outcome));
      continue;
    }
    for (const auto& [T, pairs] : by_T) {
      if (pairs.size() < 2) continue;
      std::vector<double> x, y;
      for (const auto& [m, v] : pairs) {
        x.push_back(m);
        y.push_back(v);
      }
      outcome.spearman_by_T.emplace_back(static_cast<double>(T), spearman(x, y));
    }
    const RateFit& f = *outcome.fit;
    bool ok = f.b > 0.0 && f.a_deviation <= settings.fit_tolerance;
    for (const auto& [T, rho] : outcome.spearman_by_T) ok = ok && rho >= settings.spearman_min;
    outcome.passed = outcome.passed && ok;
    out.push_back(std::move(outcome));
  }
  return out;
}

Json to_json(const FitOutcome& f) {
  Json j;
  j["protocol_section"] = f.protocol_label;
  j["passed"] = f.passed;
  j["fit"] = f.fit ? to_json(*f.fit) : Json(nullptr);
  Json sp = Json::array();
  for (const auto& [T, rho] : f.spearman_by_T) sp.push_back({{"T", T}, {"spearman", rho}});
  j["spearman"] = sp;
  j["note"] = f.note;
  return j;
}

struct SequenceSuite {
  std::size_t instances = 0;
  std::size_t violations_linear = 0;
  std::size_t violations_squared = 0;
  double max_ratio_linear = 0.0;
  double max_ratio_squared = 0.0;

  bool passed() const { return violations_linear == 0 && violations_squared == 0; }
};

SequenceSuite run_lemma5_suite(const CheckSettings& settings) {
  std::mt19937_64 rng = make_rng(settings.lemma5_seed, "lemma5");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SequenceSuite suite;
  for (std::size_t i = 0; i < settings.lemma5_instances; ++i) {
    const std::size_t len = 1 + static_cast<std::size_t>(unit(rng) * settings.lemma5_max_length);
    const std::size_t n = std::min(len, settings.lemma5_max_length);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = unit(rng) < 0.1 ? 0.0 : unit(rng);
    std::sort(a.begin(), a.end(), std::greater<>());
    for (auto& v : b) v = unit(rng) < 0.1 ? 0.0 : unit(rng) * 10.0;
    const double rho = unit(rng) < 0.1 ? 0.0 : unit(rng) * 0.99;
    const std::size_t period = 1 + static_cast<std::size_t>(unit(rng) * 8.0);
    const Lemma5Result r = check_lemma5(a, b, rho, period);
    ++suite.instances;
    if (!r.holds_linear) ++suite.violations_linear;
    if (!r.holds_squared) ++suite.violations_squared;
    if (r.rhs_linear > 0.0) suite.max_ratio_linear = std::max(suite.max_ratio_linear, r.lhs_linear / r.rhs_linear);
    if (r.rhs_squared > 0.0) suite.max_ratio_squared = std::max(suite.max_ratio_squared, r.lhs_squared / r.rhs_squared);
  }
  return suite;
}

void print_report_row(std::ostream& out, const std::string& key, const BoundReport& r) {
  const char* status = !r.applicable ? "n/a" : (r.holds ? "ok" : "FAIL");
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-36s %-11s %14.6g %14.6g %14.6g  %s\n", key.c_str(),
                r.name.c_str(), r.lhs, r.rhs, r.slack, status);
  out << buf;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (first) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first) std::rethrow_exception(first);
}

int cmd_mixing(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(options.config_path);
    const auto grid = expand_mixing_grid(cfg);
    if (grid.empty()) {
      err << "error: empty protocol grid\n";
      return kExitUsage;
    }
    struct Row {
      std::optional<MixingReport> report;
      std::string status;
      std::optional<std::size_t> theory;
    };
    std::vector<Row> rows(grid.size());
    parallel_for(grid.size(), options.jobs, [&](std::size_t i) {
      EventSchedule schedule(grid[i].spec);
      rows[i].theory = theoretical_tmix(grid[i].spec);
      try {
        rows[i].report = characterize(schedule, cfg.mixing.options);
        rows[i].status = rows[i].report->passing() ? "ok" : "failed";
      } catch (const MixingNotObserved&) {
        rows[i].status = "no-mixing";
      }
    });

    std::string csv;
    for (std::size_t i = 0; i < kMixingColumns.size(); ++i) {
      csv += (i ? "," : "");
      csv += kMixingColumns[i];
    }
    csv += '\n';
    Json j;
    j["config_hash"] = cfg.hash;
    j["protocols"] = Json::array();
    bool failed = false;
    char line[256];
    std::snprintf(line, sizeof line, "%-14s %-32s %4s %9s %11s %9s  %s\n", "section", "protocol",
                  "n", "tmix_hat", "tmix_theory", "xi_hat", "status");
    out << line;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& spec = grid[i].spec;
      const Row& row = rows[i];
      const std::string theory = row.theory ? std::to_string(*row.theory) : "";
      Json entry;
      entry["section"] = grid[i].label;
      if (row.report) {
        entry.update(to_json(*row.report));
        csv += spec.label() + ',' + std::to_string(spec.n) + ',' +
               std::to_string(row.report->tmix_hat) + ',' + theory + ',' +
               format_double(row.report->xi_hat) + ',' + format_double(row.report->quantile) +
               ',' + row.status + '\n';
        failed = failed || !row.report->passing();
      } else {
        entry["protocol"] = spec.label();
        entry["n"] = spec.n;
        entry["tmix_hat"] = nullptr;
        entry["tmix_theory"] = row.theory ? Json(*row.theory) : Json(nullptr);
        entry["status"] = row.status;
        csv += spec.label() + ',' + std::to_string(spec.n) + ",," + theory + ",,," + row.status + '\n';
      }
      j["protocols"].push_back(entry);
      std::snprintf(line, sizeof line, "%-14s %-32s %4zu %9s %11s %9s  %s\n",
                    grid[i].label.c_str(), spec.label().c_str(), spec.n,
                    row.report ? std::to_string(row.report->tmix_hat).c_str() : "-",
                    theory.empty() ? "-" : theory.c_str(),
                    row.report ? fmt("%.4f", row.report->xi_hat).c_str() : "-", row.status.c_str());
      out << line;
    }
    const std::string dir = out_dir(options, cfg);
    write_file_atomic((fs::path(dir) / "mixing.csv").string(), csv);
    write_file_atomic((fs::path(dir) / "mixing.json").string(), j.dump(2) + "\n");
    return failed ? kExitCheckFailed : kExitOk;
  });
}

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(options.config_path);
    const auto points = expand_grid(cfg);
    if (points.empty()) {
      err << "error: no protocols to run\n";
      return kExitUsage;
    }
    const std::string dir = out_dir(options, cfg);
    const std::size_t per_point = cfg.seeds.size();
    std::vector<TraceSummary> summaries(points.size() * per_point);
    parallel_for(summaries.size(), options.jobs, [&](std::size_t i) {
      const RunPoint& point = points[i / per_point];
      RunConfig config = point.config;
      config.seed = cfg.seeds[i % per_point] + options.seed_offset;
      Trace trace = run(config);
      write_file_atomic(trace_path(dir, point.key, config.seed), trace_csv(trace));
      summaries[i] = trace.summary;
    });

    Json j;
    j["name"] = cfg.name;
    j["config_hash"] = cfg.hash;
    j["seed_offset"] = options.seed_offset;
    j["runs"] = Json::array();
    std::size_t failures = 0;
    for (std::size_t p = 0; p < points.size(); ++p) {
      const RunPoint& point = points[p];
      Json r;
      r["key"] = point.key;
      r["protocol_section"] = point.protocol_label;
      r["protocol"] = point.config.protocol.label();
      r["optimizer"] = point.config.optimizer.label();
      r["n"] = point.config.protocol.n;
      r["T"] = point.config.T;
      r["multiplier"] = point.multiplier;
      r["run_hash"] = config_hash(point.config);
      r["traces"] = Json::array();
      std::size_t diverged = 0;
      for (std::size_t s = 0; s < per_point; ++s) {
        const TraceSummary& summary = summaries[p * per_point + s];
        Json t = to_json(summary);
        t["file"] = (fs::path("traces") / point.key / ("seed_" + std::to_string(summary.seed) + ".csv")).string();
        r["traces"].push_back(t);
        if (summary.diverged) ++diverged;
      }
      failures += diverged;
      r["status"] = diverged ? "failed" : "ok";
      j["runs"].push_back(r);
      char line[256];
      std::snprintf(line, sizeof line, "%-36s %-30s seeds=%zu %s\n", point.key.c_str(),
                    point.config.protocol.label().c_str(), per_point,
                    diverged ? "FAILED" : "ok");
      out << line;
    }
    write_file_atomic((fs::path(dir) / "summary.json").string(), j.dump(2) + "\n");
    return failures == summaries.size() ? kExitCheckFailed : kExitOk;
  });
}

int cmd_check(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(options.config_path);
    const std::string dir = out_dir(options, cfg);
    std::vector<LoadedRun> runs;
    if (!cfg.protocols.empty()) runs = load_runs(cfg, dir, options.seed_offset);

    MixingCache mixing(cfg.mixing.options);
    std::vector<KeyedReport> reports;
    for (const auto& run : runs) {
      for (auto& r : bound_checks(run, mixing)) reports.push_back({run.point.key, std::move(r)});
    }
    const auto fits = rate_fits(runs, mixing, cfg.check);
    const SequenceSuite lemma5 = run_lemma5_suite(cfg.check);

    bool failed = !lemma5.passed();
    char line[256];
    std::snprintf(line, sizeof line, "%-36s %-11s %14s %14s %14s  %s\n", "run", "bound", "lhs",
                  "rhs", "slack", "status");
    out << line;
    Json j;
    j["config_hash"] = cfg.hash;
    j["reports"] = Json::array();
    for (const auto& kr : reports) {
      print_report_row(out, kr.key, kr.report);
      Json e;
      e["run"] = kr.key;
      e.update(to_json(kr.report));
      j["reports"].push_back(e);
      failed = failed || kr.report.failed();
    }
    j["fits"] = Json::array();
    for (const auto& f : fits) {
      j["fits"].push_back(to_json(f));
      failed = failed || !f.passed;
      if (f.fit) {
        std::snprintf(line, sizeof line, "fit %-20s a=%.6g b=%.6g a_dev=%.3f residual=%.3g  %s\n",
                      f.protocol_label.c_str(), f.fit->a, f.fit->b, f.fit->a_deviation,
                      f.fit->residual, f.passed ? "ok" : "FAIL");
      } else {
        std::snprintf(line, sizeof line, "fit %-20s %s  FAIL\n", f.protocol_label.c_str(), f.note.c_str());
      }
      out << line;
    }
    j["lemma5"] = {{"instances", lemma5.instances},
                   {"violations_linear", lemma5.violations_linear},
                   {"violations_squared", lemma5.violations_squared},
                   {"max_ratio_linear", lemma5.max_ratio_linear},
                   {"max_ratio_squared", lemma5.max_ratio_squared},
                   {"passed", lemma5.passed()}};
    std::snprintf(line, sizeof line, "sequence inequality suite: %zu instances, %zu + %zu violations  %s\n",
                  lemma5.instances, lemma5.violations_linear, lemma5.violations_squared,
                  lemma5.passed() ? "ok" : "FAIL");
    out << line;
    j["passed"] = !failed;
    write_file_atomic((fs::path(dir) / "bounds.json").string(), j.dump(2) + "\n");
    return failed ? kExitCheckFailed : kExitOk;
  });
}

int cmd_fit(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(options.config_path);
    const std::string dir = out_dir(options, cfg);
    if (cfg.protocols.empty()) {
      err << "error: no protocols to fit\n";
      return kExitUsage;
    }
    const auto runs = load_runs(cfg, dir, options.seed_offset);
    MixingCache mixing(cfg.mixing.options);
    const auto fits = rate_fits(runs, mixing, cfg.check);
    if (fits.empty()) {
      err << "error: degenerate grid (need >= 2 values of T and of the mixing time)\n";
      return kExitUsage;
    }
    Json j;
    j["config_hash"] = cfg.hash;
    j["fits"] = Json::array();
    std::string csv = "protocol_section,T,tmix,value,predicted\n";
    bool failed = false;
    for (const auto& f : fits) {
      j["fits"].push_back(to_json(f));
      failed = failed || !f.passed;
      if (!f.fit) continue;
      for (const auto& p : f.fit->points) {
        const double pred = f.fit->a / std::sqrt(p.T) + f.fit->b * p.tmix / p.T;
        csv += f.protocol_label + ',' + format_double(p.T) + ',' + format_double(p.tmix) + ',' +
               format_double(p.value) + ',' + format_double(pred) + '\n';
      }
      char line[256];
      std::snprintf(line, sizeof line, "%-20s a=%.6g b=%.6g a_dev=%.3f residual=%.3g%s  %s\n",
                    f.protocol_label.c_str(), f.fit->a, f.fit->b, f.fit->a_deviation,
                    f.fit->residual, f.fit->clipped ? " (clipped)" : "",
                    f.passed ? "ok" : "FAIL");
      out << line;
      for (const auto& [T, rho] : f.spearman_by_T) {
        std::snprintf(line, sizeof line, "  T=%-8g spearman=%.3f\n", T, rho);
        out << line;
      }
    }
    write_file_atomic((fs::path(dir) / "fit.json").string(), j.dump(2) + "\n");
    write_file_atomic((fs::path(dir) / "fit.csv").string(), csv);
    return failed ? kExitCheckFailed : kExitOk;
  });
}

}  // namespace mixsim
