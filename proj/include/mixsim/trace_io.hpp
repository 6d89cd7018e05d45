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

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsim/analysis.hpp"
#include "mixsim/engine.hpp"
#include "mixsim/mixing.hpp"

namespace mixsim {

using Json = nlohmann::ordered_json;

inline constexpr std::array<std::string_view, 8> kTraceColumns = {
    "t", "alpha", "f", "grad_sq", "stat_dist", "view_gap_sq", "delta_gap_sq", "worker"};

inline constexpr std::array<std::string_view, 7> kMixingColumns = {
    "protocol", "n", "tmix_hat", "tmix_theory", "xi_hat", "quantile", "status"};

// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

std::string trace_csv(const Trace& trace);
// Rows only; the summary lives in summary.json. Throws Error(kIo) on any
// malformed line.
std::vector<TraceRow> parse_trace_csv(std::string_view text, const std::string& origin);
std::vector<TraceRow> read_trace_csv(const std::string& path);

// Fills delta_x_sq and grad_gap_sq from the CSV columns when the optimizer is
// SGD (delta^(x) = grad f(x)); marks them unavailable otherwise.
void restore_extras(Trace& trace);

Json to_json(const TraceSummary& summary);
TraceSummary summary_from_json(const Json& j);
Json to_json(const BoundReport& report);
Json to_json(const RateFit& fit);
Json to_json(const MixingReport& report);
Json to_json(const Lemma5Result& result);

std::string format_double(double v);

}  // namespace mixsim
