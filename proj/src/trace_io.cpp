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


#include "mixsim/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mixsim/error.hpp"

namespace mixsim {
namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_field(std::string_view s, const std::string& origin, std::size_t line) {
  T out{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::kIo, origin + ":" + std::to_string(line) + ": bad field '" +
                                    std::string(s) + "'");
  }
  return out;
}

Json optional_size(const std::optional<std::size_t>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename onto '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string trace_csv(const Trace& trace) {
  std::string out;
  for (std::size_t i = 0; i < kTraceColumns.size(); ++i) {
    if (i) out += ',';
    out += kTraceColumns[i];
  }
  out += '\n';
  for (const auto& r : trace.rows) {
    out += std::to_string(r.t);
    for (double v : {r.alpha, r.f, r.grad_sq, r.stat_dist, r.view_gap_sq, r.delta_gap_sq}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += std::to_string(r.worker);
    out += '\n';
  }
  return out;
}

std::vector<TraceRow> parse_trace_csv(std::string_view text, const std::string& origin) {
  std::vector<TraceRow> rows;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view s = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      fields.push_back(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != kTraceColumns.size()) {
      throw Error(ErrorCode::kIo, origin + ":" + std::to_string(line) + ": expected " +
                                      std::to_string(kTraceColumns.size()) + " columns");
    }
    if (line == 1) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] != kTraceColumns[i]) {
          throw Error(ErrorCode::kIo, origin + ": unexpected header");
        }
      }
      continue;
    }
    TraceRow r;
    r.t = parse_field<std::size_t>(fields[0], origin, line);
    r.alpha = parse_field<double>(fields[1], origin, line);
    r.f = parse_field<double>(fields[2], origin, line);
    r.grad_sq = parse_field<double>(fields[3], origin, line);
    r.stat_dist = parse_field<double>(fields[4], origin, line);
    r.view_gap_sq = parse_field<double>(fields[5], origin, line);
    r.delta_gap_sq = parse_field<double>(fields[6], origin, line);
    r.worker = parse_field<std::size_t>(fields[7], origin, line);
    if (!rows.empty() && r.t <= rows.back().t) {
      throw Error(ErrorCode::kIo, origin + ":" + std::to_string(line) + ": t not increasing");
    }
    rows.push_back(r);
  }
  if (line == 0) throw Error(ErrorCode::kIo, origin + ": empty trace file");
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  return parse_trace_csv(read_file(path), path);
}

void restore_extras(Trace& trace) {
  const bool sgd = trace.summary.optimizer == "sgd";
  trace.summary.extras_available = sgd;
  for (auto& r : trace.rows) {
    r.delta_x_sq = sgd ? r.grad_sq : 0.0;
    r.grad_gap_sq = sgd ? r.delta_gap_sq : 0.0;
  }
}

Json to_json(const TraceSummary& s) {
  Json j;
  j["seed"] = s.seed;
  j["T"] = s.T;
  j["config_hash"] = s.config_hash;
  j["protocol"] = s.protocol;
  j["optimizer"] = s.optimizer;
  j["n"] = s.n;
  j["cadence"] = s.cadence;
  j["f0"] = s.f0;
  j["f_final"] = s.f_final;
  j["grad_sq_final"] = s.grad_sq_final;
  j["mean_grad_sq"] = s.mean_grad_sq;
  j["min_grad_sq"] = s.min_grad_sq;
  j["alpha_T"] = s.alpha_T;
  j["max_decomposition_residual"] = s.max_decomposition_residual;
  j["max_consensus_residual"] = s.max_consensus_residual;
  j["diverged"] = s.diverged;
  j["diagnostic"] = s.diagnostic;
  return j;
}

TraceSummary summary_from_json(const Json& j) {
  try {
    TraceSummary s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.T = j.at("T").get<std::size_t>();
    s.config_hash = j.at("config_hash").get<std::string>();
    s.protocol = j.at("protocol").get<std::string>();
    s.optimizer = j.at("optimizer").get<std::string>();
    s.n = j.at("n").get<std::size_t>();
    s.cadence = j.at("cadence").get<std::size_t>();
    s.f0 = j.at("f0").get<double>();
    s.f_final = j.at("f_final").get<double>();
    s.grad_sq_final = j.at("grad_sq_final").get<double>();
    s.mean_grad_sq = j.at("mean_grad_sq").get<double>();
    s.min_grad_sq = j.at("min_grad_sq").get<double>();
    s.alpha_T = j.at("alpha_T").get<double>();
    s.max_decomposition_residual = j.at("max_decomposition_residual").get<double>();
    s.max_consensus_residual = j.at("max_consensus_residual").get<double>();
    s.diverged = j.at("diverged").get<bool>();
    s.diagnostic = j.at("diagnostic").get<std::string>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed trace summary: ") + e.what());
  }
}

Json to_json(const BoundReport& r) {
  Json j;
  j["name"] = r.name;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack;
  j["holds"] = r.holds;
  j["applicable"] = r.applicable;
  j["lhs_stderr"] = r.lhs_stderr;
  Json inputs = Json::object();
  for (const auto& [k, v] : r.inputs) inputs[k] = v;
  j["inputs"] = inputs;
  j["schedule"] = r.schedule;
  j["seeds"] = r.seeds;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const RateFit& f) {
  Json j;
  j["model"] = "a/sqrt(T) + b*tmix/T";
  j["a"] = f.a;
  j["b"] = f.b;
  j["residual"] = f.residual;
  j["clipped"] = f.clipped;
  j["a_deviation"] = f.a_deviation;
  Json by = Json::array();
  for (const auto& [m, a] : f.a_by_tmix) by.push_back({{"tmix", m}, {"a", a}});
  j["a_by_tmix"] = by;
  Json pts = Json::array();
  for (const auto& p : f.points) pts.push_back({{"T", p.T}, {"tmix", p.tmix}, {"value", p.value}});
  j["points"] = pts;
  return j;
}

Json to_json(const MixingReport& r) {
  Json j;
  j["protocol"] = r.protocol;
  j["n"] = r.n;
  j["tmix_hat"] = r.tmix_hat;
  j["tmix_worst"] = optional_size(r.tmix_worst);
  j["tmix_theory"] = optional_size(r.tmix_theory);
  j["xi_hat"] = r.xi_hat;
  j["xi_declared"] = r.xi_declared;
  j["quantile"] = r.quantile;
  j["probes"] = r.probes;
  j["starts"] = r.starts;
  j["dense_checked"] = r.dense_checked;
  j["assumption1_ok"] = r.assumption1_ok;
  j["assumption1_deviation"] = r.assumption1_deviation;
  j["assumption3_ok"] = r.assumption3_ok;
  j["projections_ok"] = r.projections_ok;
  j["lemma1_tmix"] = r.lemma1_tmix;
  j["lemma1_violations"] = r.violations.size();
  j["status"] = r.passing() ? "ok" : "failed";
  return j;
}

Json to_json(const Lemma5Result& r) {
  return Json{{"holds_linear", r.holds_linear},   {"holds_squared", r.holds_squared},
              {"lhs_linear", r.lhs_linear},       {"rhs_linear", r.rhs_linear},
              {"lhs_squared", r.lhs_squared},     {"rhs_squared", r.rhs_squared}};
}

}  // namespace mixsim
