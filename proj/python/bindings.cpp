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


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "mixsim/analysis.hpp"
#include "mixsim/config.hpp"
#include "mixsim/engine.hpp"
#include "mixsim/error.hpp"
#include "mixsim/mixing.hpp"
#include "mixsim/optimizers.hpp"
#include "mixsim/protocols.hpp"

namespace py = pybind11;
using namespace mixsim;

namespace {

ProtocolSpec make_protocol(const std::string& kind, std::size_t n, std::size_t d,
                           std::uint64_t seed, std::size_t local_steps,
                           const std::string& topology, std::size_t comm_period,
                           std::size_t pull_delay, double gamma, double eta,
                           const std::string& inner) {
  ProtocolSpec p;
  p.kind = parse_protocol_kind(kind);
  p.n = n;
  p.d = d;
  p.seed = seed;
  p.local_steps = local_steps;
  p.topology = parse_topology_kind(topology);
  p.comm_period = comm_period;
  p.pull_delay = pull_delay;
  p.gamma = gamma;
  if (p.kind == ProtocolKind::kSparsified) {
    ProtocolSpec in = p;
    in.kind = parse_protocol_kind(inner);
    p = ProtocolSpec::sparsified(eta, in);
  }
  p.validate();
  return p;
}

py::dict report_dict(const MixingReport& r) {
  py::dict out;
  out["protocol"] = r.protocol;
  out["n"] = r.n;
  out["tmix_hat"] = r.tmix_hat;
  out["tmix_worst"] = r.tmix_worst;
  out["tmix_theory"] = r.tmix_theory;
  out["xi_hat"] = r.xi_hat;
  out["xi_declared"] = r.xi_declared;
  out["assumption1_ok"] = r.assumption1_ok;
  out["projections_ok"] = r.projections_ok;
  out["lemma1_tmix"] = r.lemma1_tmix;
  out["violations"] = r.violations.size();
  out["passing"] = r.passing();
  return out;
}

py::dict trace_dict(const Trace& trace) {
  const std::size_t rows = trace.rows.size();
  py::array_t<std::size_t> t(rows), worker(rows);
  py::array_t<double> alpha(rows), f(rows), grad_sq(rows), stat_dist(rows), view_gap_sq(rows),
      delta_gap_sq(rows);
  auto pt = t.mutable_unchecked<1>();
  auto pw = worker.mutable_unchecked<1>();
  auto pa = alpha.mutable_unchecked<1>();
  auto pf = f.mutable_unchecked<1>();
  auto pg = grad_sq.mutable_unchecked<1>();
  auto ps = stat_dist.mutable_unchecked<1>();
  auto pv = view_gap_sq.mutable_unchecked<1>();
  auto pd = delta_gap_sq.mutable_unchecked<1>();
  for (std::size_t i = 0; i < rows; ++i) {
    const TraceRow& r = trace.rows[i];
    pt(i) = r.t;
    pw(i) = r.worker;
    pa(i) = r.alpha;
    pf(i) = r.f;
    pg(i) = r.grad_sq;
    ps(i) = r.stat_dist;
    pv(i) = r.view_gap_sq;
    pd(i) = r.delta_gap_sq;
  }
  const TraceSummary& s = trace.summary;
  py::dict summary;
  summary["T"] = s.T;
  summary["seed"] = s.seed;
  summary["config_hash"] = s.config_hash;
  summary["protocol"] = s.protocol;
  summary["optimizer"] = s.optimizer;
  summary["n"] = s.n;
  summary["f0"] = s.f0;
  summary["f_final"] = s.f_final;
  summary["grad_sq_final"] = s.grad_sq_final;
  summary["mean_grad_sq"] = s.mean_grad_sq;
  summary["diverged"] = s.diverged;
  summary["diagnostic"] = s.diagnostic;

  py::dict out;
  out["t"] = t;
  out["alpha"] = alpha;
  out["f"] = f;
  out["grad_sq"] = grad_sq;
  out["stat_dist"] = stat_dist;
  out["view_gap_sq"] = view_gap_sq;
  out["delta_gap_sq"] = delta_gap_sq;
  out["worker"] = worker;
  out["summary"] = summary;
  return out;
}

const RunPoint& find_point(const std::vector<RunPoint>& grid, const std::string& key) {
  for (const auto& p : grid) {
    if (p.key == key) return p;
  }
  throw py::key_error("no run point '" + key + "'");
}

}  // namespace

PYBIND11_MODULE(_mixsim, m) {
  m.doc() = "Simulator for weakly consistent parallel optimization";

  // Translators run newest first, so the subclass is registered last.
  const auto error = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<MixingNotObserved>(m, "MixingNotObserved", error.ptr());

  py::class_<ProtocolSpec>(m, "Protocol")
      .def(py::init(&make_protocol), py::arg("kind"), py::arg("n"), py::arg("d") = 1,
           py::arg("seed") = 0, py::arg("local_steps") = 1, py::arg("topology") = "ring",
           py::arg("comm_period") = 1, py::arg("pull_delay") = 0, py::arg("gamma") = 1.0,
           py::arg("eta") = 1.0, py::arg("inner") = "allreduce")
      .def_property_readonly("kind", [](const ProtocolSpec& p) { return to_string(p.kind); })
      .def_readonly("n", &ProtocolSpec::n)
      .def_readonly("d", &ProtocolSpec::d)
      .def_property_readonly("label", &ProtocolSpec::label)
      .def_property_readonly("declared_xi", &ProtocolSpec::declared_xi)
      .def_property_readonly("randomized", &ProtocolSpec::randomized)
      .def("__repr__", [](const ProtocolSpec& p) {
        return "<Protocol " + p.label() + " n=" + std::to_string(p.n) + ">";
      });

  m.def("theoretical_tmix", &theoretical_tmix, py::arg("protocol"));

  m.def(
      "estimate_tmix",
      [](const ProtocolSpec& p, std::size_t probes, std::size_t max_window, std::uint64_t seed) {
        MixingOptions options;
        options.probes = probes;
        options.max_window = max_window;
        options.seed = seed;
        const EventSchedule schedule(p);
        py::gil_scoped_release release;
        return estimate_tmix(schedule, layout_consensus(schedule), options).tmix_hat;
      },
      py::arg("protocol"), py::arg("probes") = 64, py::arg("max_window") = 20000,
      py::arg("seed") = 1);

  m.def(
      "characterize",
      [](const ProtocolSpec& p, std::size_t probes, std::size_t windows) {
        MixingOptions options;
        options.probes = probes;
        options.windows = windows;
        MixingReport report;
        {
          py::gil_scoped_release release;
          report = characterize(EventSchedule(p), options);
        }
        return report_dict(report);
      },
      py::arg("protocol"), py::arg("probes") = 64, py::arg("windows") = 32);

  py::class_<ExperimentConfig>(m, "Config")
      .def_static("load", &load_config, py::arg("path"))
      .def_static(
          "parse", [](const std::string& text) { return parse_config(text); }, py::arg("text"))
      .def_readonly("name", &ExperimentConfig::name)
      .def_readonly("seeds", &ExperimentConfig::seeds)
      .def_readonly("hash", &ExperimentConfig::hash)
      .def("keys", [](const ExperimentConfig& c) {
        std::vector<std::string> keys;
        for (const auto& p : expand_grid(c)) keys.push_back(p.key);
        return keys;
      });

  m.def(
      "run",
      [](const ExperimentConfig& c, const std::string& key, std::uint64_t seed, bool sequential) {
        const auto grid = expand_grid(c);
        RunConfig config = find_point(grid, key).config;
        config.seed = seed;
        Trace trace;
        {
          py::gil_scoped_release release;
          trace = sequential ? run_sequential(config) : run(config);
        }
        return trace_dict(trace);
      },
      py::arg("config"), py::arg("key"), py::arg("seed") = 0, py::arg("sequential") = false);

  m.def(
      "sam_lipschitz",
      [](double p, double beta1, double beta2, double c, double L, std::optional<double> ginf) {
        SamConfig cfg{p, beta1, beta2, c};
        cfg.validate();
        return sam_lipschitz(cfg, L, ginf);
      },
      py::arg("p"), py::arg("beta1"), py::arg("beta2"), py::arg("c"), py::arg("L"),
      py::arg("ginf") = py::none());

  m.def(
      "check_lemma5",
      [](const std::vector<double>& a, const std::vector<double>& b, double rho,
         std::size_t period) {
        const Lemma5Result r = check_lemma5(a, b, rho, period);
        py::dict out;
        out["holds_linear"] = r.holds_linear;
        out["holds_squared"] = r.holds_squared;
        out["lhs_linear"] = r.lhs_linear;
        out["rhs_linear"] = r.rhs_linear;
        out["lhs_squared"] = r.lhs_squared;
        out["rhs_squared"] = r.rhs_squared;
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("rho"), py::arg("period"));

  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
    return spearman(x, y);
  });
}
