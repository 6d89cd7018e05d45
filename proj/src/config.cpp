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


#include "mixsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "mixsim/error.hpp"
#include "mixsim/random.hpp"

namespace mixsim {
namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

class Section {
 public:
  Section(std::string name, std::string origin, std::size_t line)
      : name_(std::move(name)), origin_(std::move(origin)), line_(line) {}

  void add(const std::string& key, std::string value, std::size_t line) {
    if (!entries_.emplace(key, Entry{std::move(value), line}).second) {
      fail(line, "duplicate key '" + key + "'");
    }
  }

  const std::string& name() const { return name_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::optional<Entry> take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string text(const std::string& key, std::string fallback) {
    auto e = take(key);
    return e ? e->value : fallback;
  }

  template <typename T>
  T number(const std::string& key, T fallback) {
    auto e = take(key);
    return e ? parse_number<T>(*e, key) : fallback;
  }

  template <typename T>
  std::optional<T> maybe_number(const std::string& key) {
    auto e = take(key);
    if (!e) return std::nullopt;
    return parse_number<T>(*e, key);
  }

  bool flag(const std::string& key, bool fallback) {
    auto e = take(key);
    if (!e) return fallback;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    fail(e->line, "key '" + key + "' expects true or false, got '" + e->value + "'");
  }

  // Comma-separated values; integer lists also accept inclusive ranges a..b.
  template <typename T>
  std::vector<T> list(const std::string& key) {
    auto e = take(key);
    if (!e) return {};
    std::vector<T> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      const auto dots = item.find("..");
      if (dots != std::string::npos) {
        if constexpr (std::is_integral_v<T>) {
          const T lo = parse_number<T>(Entry{item.substr(0, dots), e->line}, key);
          const T hi = parse_number<T>(Entry{item.substr(dots + 2), e->line}, key);
          if (hi < lo) fail(e->line, "empty range '" + item + "' for key '" + key + "'");
          for (T v = lo; v <= hi; ++v) out.push_back(v);
          continue;
        } else {
          fail(e->line, "key '" + key + "' does not accept ranges");
        }
      }
      out.push_back(parse_number<T>(Entry{item, e->line}, key));
    }
    if (out.empty()) fail(e->line, "key '" + key + "' has an empty list");
    return out;
  }

  void reject_unused() const {
    for (const auto& [key, entry] : entries_) {
      if (!used_.count(key)) fail(entry.line, "unknown key '" + key + "' in [" + name_ + "]");
    }
  }

  [[noreturn]] void fail(std::size_t line, const std::string& what) const {
    throw Error(ErrorCode::kConfig, origin_ + ":" + std::to_string(line) + ": " + what);
  }

 private:
  template <typename T>
  T parse_number(const Entry& e, const std::string& key) const {
    const std::string v = trim(e.value);
    T out{};
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) {
      fail(e.line, "key '" + key + "' expects a number, got '" + v + "'");
    }
    return out;
  }

  std::string name_;
  std::string origin_;
  std::size_t line_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

struct Document {
  std::vector<Section> sections;
  std::string canonical;
};

Document tokenize(std::string_view text, const std::string& origin) {
  Document doc;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(std::string_view(raw).substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw Error(ErrorCode::kConfig, origin + ":" + std::to_string(line) + ": malformed section header");
      }
      std::string name = trim(std::string_view(s).substr(1, s.size() - 2));
      const std::string base = name.substr(0, name.find('.'));
      static const std::set<std::string> known = {"experiment", "objective", "noise",
                                                  "optimizer",  "schedule",  "protocol",
                                                  "sweep",      "mixing",    "check"};
      if (!known.count(base) || (base == "protocol") != (name.find('.') != std::string::npos) ||
          (base == "protocol" && !valid_identifier(name.substr(9)))) {
        throw Error(ErrorCode::kConfig,
                    origin + ":" + std::to_string(line) + ": unknown section [" + name + "]");
      }
      if (!seen.insert(name).second) {
        throw Error(ErrorCode::kConfig,
                    origin + ":" + std::to_string(line) + ": duplicate section [" + name + "]");
      }
      doc.sections.emplace_back(name, origin, line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig,
                  origin + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    if (doc.sections.empty()) {
      throw Error(ErrorCode::kConfig,
                  origin + ":" + std::to_string(line) + ": key outside of any section");
    }
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (!valid_identifier(key)) {
      throw Error(ErrorCode::kConfig,
                  origin + ":" + std::to_string(line) + ": invalid key '" + key + "'");
    }
    doc.sections.back().add(key, trim(std::string_view(s).substr(eq + 1)), line);
  }

  std::vector<const Section*> sorted;
  for (const auto& sec : doc.sections) sorted.push_back(&sec);
  std::sort(sorted.begin(), sorted.end(),
            [](const Section* a, const Section* b) { return a->name() < b->name(); });
  std::ostringstream canon;
  for (const Section* sec : sorted) {
    canon << '[' << sec->name() << "]\n";
    for (const auto& [key, entry] : sec->entries()) canon << key << '=' << entry.value << '\n';
  }
  doc.canonical = canon.str();
  return doc;
}

template <typename Fn>
auto wrap_parse(const Section& sec, std::size_t line, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    sec.fail(line, e.what());
  }
}

std::size_t line_of(Section& sec, const std::string& key) {
  auto it = sec.entries().find(key);
  return it == sec.entries().end() ? 0 : it->second.line;
}

OptimizerSpec parse_optimizer(Section& sec) {
  const std::string kind = sec.text("kind", "sgd");
  SamConfig cfg;
  if (kind == "sgd") {
    // No parameters.
  } else if (kind == "momentum") {
    cfg = SamConfig::momentum(0.9);
  } else if (kind == "rmsprop") {
    cfg = SamConfig::rmsprop();
  } else if (kind == "amsgrad") {
    cfg = SamConfig::amsgrad();
  } else if (kind == "sam") {
    // Parameters come from the keys below.
  } else {
    sec.fail(line_of(sec, "kind"), "unknown optimizer kind '" + kind + "'");
  }
  if (kind == "sgd") return OptimizerSpec::sgd();
  cfg.p = sec.number("p", cfg.p);
  cfg.beta1 = sec.number("beta1", cfg.beta1);
  cfg.beta2 = sec.number("beta2", cfg.beta2);
  cfg.c = sec.number("c", cfg.c);
  wrap_parse(sec, line_of(sec, "kind"), [&] {
    cfg.validate();
    return 0;
  });
  return OptimizerSpec::adaptive(cfg);
}

ProtocolSpec parse_protocol(Section& sec, std::size_t d) {
  ProtocolSpec p;
  const std::size_t kind_line = line_of(sec, "kind");
  auto kind_entry = sec.take("kind");
  if (!kind_entry) sec.fail(0, "[" + sec.name() + "] needs a kind");
  p.kind = wrap_parse(sec, kind_line, [&] { return parse_protocol_kind(kind_entry->value); });
  p.n = sec.number<std::size_t>("n", 2);
  p.d = d;
  p.seed = sec.number<std::uint64_t>("seed", 0);
  p.local_steps = sec.number<std::size_t>("local_steps", 1);
  if (auto topo = sec.take("topology")) {
    p.topology = wrap_parse(sec, topo->line, [&] { return parse_topology_kind(topo->value); });
  }
  p.comm_period = sec.number<std::size_t>("comm_period", 1);
  p.pull_delay = sec.number<std::size_t>("pull_delay", 0);
  p.gamma = sec.number("gamma", 1.0);
  p.eta = sec.number("eta", 1.0);
  auto inner = sec.take("inner");
  if (p.kind == ProtocolKind::kSparsified) {
    if (!inner) sec.fail(kind_line, "sparsified protocol needs 'inner'");
    ProtocolSpec in = p;
    in.kind = wrap_parse(sec, inner->line, [&] { return parse_protocol_kind(inner->value); });
    p = ProtocolSpec::sparsified(p.eta, in);
  } else if (inner) {
    sec.fail(inner->line, "'inner' only applies to sparsified protocols");
  }
  wrap_parse(sec, kind_line, [&] {
    p.validate();
    return 0;
  });
  return p;
}

ProtocolSpec with_sweep(const ProtocolSpec& base, std::size_t n, std::size_t m, double gamma,
                        double eta) {
  if (base.kind == ProtocolKind::kSparsified) {
    ProtocolSpec in = *base.inner;
    in.n = n;
    in.local_steps = m;
    in.gamma = gamma;
    return ProtocolSpec::sparsified(eta, in);
  }
  ProtocolSpec p = base;
  p.n = n;
  p.local_steps = m;
  p.gamma = gamma;
  p.eta = eta;
  return p;
}

const ProtocolSpec& core(const ProtocolSpec& p) {
  return p.kind == ProtocolKind::kSparsified ? *p.inner : p;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& origin) {
  Document doc = tokenize(text, origin);
  ExperimentConfig cfg;
  cfg.hash = [&] {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(hash_label(doc.canonical)));
    return std::string(buf);
  }();

  auto find = [&](const std::string& name) -> Section* {
    for (auto& s : doc.sections) {
      if (s.name() == name) return &s;
    }
    return nullptr;
  };
  Section empty("", origin, 0);
  auto section = [&](const std::string& name) -> Section& {
    Section* s = find(name);
    if (s) return *s;
    empty = Section(name, origin, 0);
    return empty;
  };

  RunConfig& base = cfg.base;
  {
    Section& s = section("experiment");
    cfg.name = s.text("name", "experiment");
    cfg.out_dir = s.text("out", "out");
    cfg.seeds = s.list<std::uint64_t>("seeds");
    if (cfg.seeds.empty()) cfg.seeds = {0};
    base.T = s.number<std::size_t>("T", 1000);
    base.cadence = s.number<std::size_t>("cadence", 1);
    if (auto e = s.take("x0")) {
      base.x0 = wrap_parse(s, e->line, [&] { return parse_x0_policy(e->value); });
    }
    base.x0_scale = s.number("x0_scale", 1.0);
    if (base.T < 1) s.fail(line_of(s, "T"), "T must be >= 1");
    if (base.cadence < 1) s.fail(line_of(s, "cadence"), "cadence must be >= 1");
    s.reject_unused();
  }
  {
    Section& s = section("objective");
    auto& o = base.objective;
    if (auto e = s.take("kind")) {
      o.kind = wrap_parse(s, e->line, [&] { return parse_objective_kind(e->value); });
    }
    o.d = s.number<std::size_t>("d", o.d);
    o.seed = s.number<std::uint64_t>("seed", o.seed);
    o.identity_hessian = s.flag("identity_hessian", o.identity_hessian);
    o.eig_min = s.number("eig_min", o.eig_min);
    o.eig_max = s.number("eig_max", o.eig_max);
    o.center_scale = s.number("center_scale", o.center_scale);
    o.samples = s.number<std::size_t>("samples", o.samples);
    o.feature_scale = s.number("feature_scale", o.feature_scale);
    o.dataset_path = s.text("dataset", "");
    if (o.d < 1) s.fail(line_of(s, "d"), "d must be >= 1");
    s.reject_unused();
  }
  {
    Section& s = section("noise");
    if (auto e = s.take("kind")) {
      base.noise.kind = wrap_parse(s, e->line, [&] { return parse_noise_kind(e->value); });
    }
    base.noise.sigma = s.number("sigma", 0.0);
    base.noise.batch = s.number<std::size_t>("batch", 1);
    if (!(base.noise.sigma >= 0.0)) s.fail(line_of(s, "sigma"), "sigma must be >= 0");
    if (base.noise.batch < 1) s.fail(line_of(s, "batch"), "batch must be >= 1");
    s.reject_unused();
  }
  {
    Section& s = section("optimizer");
    base.optimizer = parse_optimizer(s);
    s.reject_unused();
  }
  {
    Section& s = section("schedule");
    const std::string kind = s.text("kind", "constant");
    if (kind == "constant") {
      base.schedule.kind = ScheduleKind::kConstant;
    } else if (kind == "corollary1") {
      base.schedule.kind = ScheduleKind::kCorollary1;
    } else if (kind == "table") {
      base.schedule.kind = ScheduleKind::kTable;
    } else {
      s.fail(line_of(s, "kind"), "unknown schedule kind '" + kind + "'");
    }
    base.schedule.alpha = s.number("alpha", base.schedule.alpha);
    base.schedule.table = s.list<double>("table");
    base.schedule.tmix = s.maybe_number<std::size_t>("tmix");
    if (base.schedule.kind == ScheduleKind::kTable && base.schedule.table.empty()) {
      s.fail(line_of(s, "kind"), "table schedule needs 'table'");
    }
    s.reject_unused();
  }
  for (auto& s : doc.sections) {
    if (s.name().rfind("protocol.", 0) != 0) continue;
    ProtocolEntry entry;
    entry.label = s.name().substr(9);
    entry.spec = parse_protocol(s, base.objective.d);
    s.reject_unused();
    cfg.protocols.push_back(std::move(entry));
  }
  {
    Section& s = section("sweep");
    cfg.sweep.n = s.list<std::size_t>("n");
    cfg.sweep.local_steps = s.list<std::size_t>("local_steps");
    cfg.sweep.gamma = s.list<double>("gamma");
    cfg.sweep.eta = s.list<double>("eta");
    cfg.sweep.T = s.list<std::size_t>("T");
    s.reject_unused();
  }
  {
    Section& s = section("mixing");
    auto& o = cfg.mixing.options;
    o.probes = s.number<std::size_t>("probes", o.probes);
    o.starts = s.number<std::size_t>("starts", o.starts);
    o.max_window = s.number<std::size_t>("max_window", o.max_window);
    o.quantile = s.number("quantile", o.quantile);
    o.seed = s.number<std::uint64_t>("seed", o.seed);
    o.dense_check = s.flag("dense_check", o.dense_check);
    o.max_residue_starts = s.number<std::size_t>("max_residue_starts", o.max_residue_starts);
    o.worst_case_starts = s.number<std::size_t>("worst_case_starts", o.worst_case_starts);
    o.windows = s.number<std::size_t>("windows", o.windows);
    cfg.mixing.tolerance = s.number("tolerance", cfg.mixing.tolerance);
    if (!(o.quantile > 0.0 && o.quantile <= 1.0)) {
      s.fail(line_of(s, "quantile"), "quantile must be in (0, 1]");
    }
    s.reject_unused();
  }
  {
    Section& s = section("check");
    auto& c = cfg.check;
    c.lemma5_instances = s.number<std::size_t>("lemma5_instances", c.lemma5_instances);
    c.lemma5_max_length = s.number<std::size_t>("lemma5_max_length", c.lemma5_max_length);
    c.lemma5_seed = s.number<std::uint64_t>("lemma5_seed", c.lemma5_seed);
    c.fit_tolerance = s.number("fit_tolerance", c.fit_tolerance);
    c.spearman_min = s.number("spearman_min", c.spearman_min);
    if (c.lemma5_max_length < 1) s.fail(line_of(s, "lemma5_max_length"), "must be >= 1");
    s.reject_unused();
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

std::vector<RunPoint> expand_grid(const ExperimentConfig& config) {
  std::vector<RunPoint> points;
  std::set<std::string> keys;
  const std::vector<std::size_t> Ts =
      config.sweep.T.empty() ? std::vector<std::size_t>{config.base.T} : config.sweep.T;
  for (const auto& entry : config.protocols) {
    const ProtocolSpec& c = core(entry.spec);
    const bool local = c.kind == ProtocolKind::kLocalStep;
    const bool slack = c.kind == ProtocolKind::kSlackAverage;
    const bool sparse = entry.spec.kind == ProtocolKind::kSparsified;
    auto axis = [](const auto& values, bool applies, auto fallback) {
      using V = std::decay_t<decltype(fallback)>;
      if (!applies || values.empty()) return std::vector<V>{fallback};
      return std::vector<V>(values.begin(), values.end());
    };
    for (std::size_t n : axis(config.sweep.n, true, entry.spec.n)) {
      for (std::size_t m : axis(config.sweep.local_steps, local, c.local_steps)) {
        for (double g : axis(config.sweep.gamma, slack, c.gamma)) {
          for (double e : axis(config.sweep.eta, sparse, entry.spec.eta)) {
            for (std::size_t T : Ts) {
              RunPoint p;
              p.protocol_label = entry.label;
              p.multiplier = local ? m : 1;
              p.config = config.base;
              p.config.protocol = with_sweep(entry.spec, n, m, g, e);
              p.config.T = T;
              try {
                p.config.validate();
              } catch (const Error& err) {
                throw Error(ErrorCode::kConfig,
                            "[protocol." + entry.label + "] sweep point invalid: " + err.what());
              }
              std::string key = entry.label + "-n" + std::to_string(n);
              if (local) key += "-m" + std::to_string(m);
              if (slack) key += "-g" + format_value(g);
              if (sparse) key += "-e" + format_value(e);
              key += "-T" + std::to_string(T);
              if (!keys.insert(key).second) {
                throw Error(ErrorCode::kConfig, "duplicate sweep point " + key);
              }
              p.key = std::move(key);
              points.push_back(std::move(p));
            }
          }
        }
      }
    }
  }
  return points;
}

std::vector<ProtocolEntry> expand_mixing_grid(const ExperimentConfig& config) {
  std::vector<ProtocolEntry> out;
  for (const auto& point : expand_grid(config)) {
    // Mixing does not depend on T; keep the first T of each point.
    const bool dup = std::any_of(out.begin(), out.end(), [&](const ProtocolEntry& e) {
      return e.label == point.protocol_label && e.spec.label() == point.config.protocol.label() &&
             e.spec.n == point.config.protocol.n;
    });
    if (!dup) out.push_back({point.protocol_label, point.config.protocol});
  }
  return out;
}

}  // namespace mixsim
