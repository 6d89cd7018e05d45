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


#include <iostream>
#include <string>

#include <CLI/CLI11.hpp>

#include "mixsim/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mixsim: weakly consistent parallel optimization simulator"};
  app.require_subcommand(1);

  mixsim::CommandOptions options;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config_path, "Experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides [experiment] out)");
    sub->add_option("--jobs", options.jobs, "Concurrent runs")->check(CLI::Range(1, 1024));
    sub->add_option("--seed-offset", options.seed_offset, "Added to every configured seed");
  };
  auto* mixing = app.add_subcommand("mixing", "Estimate mixing times and verify assumptions");
  auto* run = app.add_subcommand("run", "Simulate every sweep point and seed");
  auto* check = app.add_subcommand("check", "Evaluate bound checks on recorded traces");
  auto* fit = app.add_subcommand("fit", "Fit the a/sqrt(T) + b tmix/T rate model");
  for (auto* sub : {mixing, run, check, fit}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mixsim::kExitUsage;
  }
  if (!out_dir.empty()) options.out_dir = out_dir;

  if (*mixing) return mixsim::cmd_mixing(options, std::cout, std::cerr);
  if (*run) return mixsim::cmd_run(options, std::cout, std::cerr);
  if (*check) return mixsim::cmd_check(options, std::cout, std::cerr);
  return mixsim::cmd_fit(options, std::cout, std::cerr);
}
