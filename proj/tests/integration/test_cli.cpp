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


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

const std::string kCli = MIXSIM_CLI;
const std::string kData = MIXSIM_TEST_DATA;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    work_ = fs::temp_directory_path() / (std::string("mixsim_cli_") + info->name());
    fs::remove_all(work_);
    fs::create_directories(work_);
  }
  void TearDown() override { fs::remove_all(work_); }

  // Runs the CLI with output captured to log.txt and returns its exit code.
  int cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > " + (work_ / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string log() const { return slurp(work_ / "log.txt"); }
  std::string out(const std::string& name) const { return (work_ / name).string(); }

  fs::path work_;
};

TEST_F(CliTest, RunIsByteForByteDeterministic) {
  const std::string config = kData + "/pinned.ini";
  ASSERT_EQ(cli("run --config " + config + " --out " + out("a")), 0) << log();
  ASSERT_EQ(cli("run --config " + config + " --out " + out("b") + " --jobs 2"), 0) << log();
  for (const char* seed : {"seed_0.csv", "seed_1.csv"}) {
    const auto a = slurp(work_ / "a" / "traces" / "ar-n2-T12" / seed);
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(work_ / "b" / "traces" / "ar-n2-T12" / seed));
  }
  EXPECT_EQ(slurp(work_ / "a" / "summary.json"), slurp(work_ / "b" / "summary.json"));
}

TEST_F(CliTest, RunMatchesGoldenTraces) {
  ASSERT_EQ(cli("run --config " + kData + "/pinned.ini --out " + out("r")), 0) << log();
  for (const char* seed : {"0", "1"}) {
    EXPECT_EQ(slurp(work_ / "r" / "traces" / "ar-n2-T12" / (std::string("seed_") + seed + ".csv")),
              slurp(fs::path(kData) / "golden" / (std::string("ar-n2-T12_seed_") + seed + ".csv")))
        << "seed " << seed;
  }
}

TEST_F(CliTest, SeedOffsetShiftsSeeds) {
  ASSERT_EQ(cli("run --config " + kData + "/pinned.ini --out " + out("r") + " --seed-offset 1"),
            0)
      << log();
  EXPECT_TRUE(fs::exists(work_ / "r" / "traces" / "ar-n2-T12" / "seed_2.csv"));
  EXPECT_EQ(slurp(work_ / "r" / "traces" / "ar-n2-T12" / "seed_1.csv"),
            slurp(fs::path(kData) / "golden" / "ar-n2-T12_seed_1.csv"));
}

TEST_F(CliTest, CheckPassesOnFreshTraces) {
  ASSERT_EQ(cli("run --config " + kData + "/pinned.ini --out " + out("r")), 0) << log();
  EXPECT_EQ(cli("check --config " + kData + "/pinned.ini --out " + out("r")), 0) << log();
  const std::string bounds = slurp(work_ / "r" / "bounds.json");
  EXPECT_NE(bounds.find("\"lemma2\""), std::string::npos);
  EXPECT_NE(bounds.find("\"passed\": true"), std::string::npos);
}

TEST_F(CliTest, CorruptedTraceFailsCheck) {
  ASSERT_EQ(cli("run --config " + kData + "/pinned.ini --out " + out("r")), 0) << log();
  const fs::path trace = work_ / "r" / "traces" / "ar-n2-T12" / "seed_0.csv";
  std::istringstream in(slurp(trace));
  std::ostringstream fixed;
  std::string line;
  std::getline(in, line);
  fixed << line << '\n';
  // Inflate the delta_gap_sq column (7th) on every row.
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells[6] = "1000";
    for (std::size_t i = 0; i < cells.size(); ++i) fixed << (i ? "," : "") << cells[i];
    fixed << '\n';
  }
  std::ofstream(trace) << fixed.str();
  EXPECT_EQ(cli("check --config " + kData + "/pinned.ini --out " + out("r")), 1) << log();
  EXPECT_NE(log().find("FAIL"), std::string::npos);
}

TEST_F(CliTest, MissingTracesAreAUsageError) {
  EXPECT_EQ(cli("check --config " + kData + "/pinned.ini --out " + out("nothing")), 2);
  EXPECT_NE(log().find("error"), std::string::npos);
}

TEST_F(CliTest, StaleTracesAreAUsageError) {
  ASSERT_EQ(cli("run --config " + kData + "/pinned.ini --out " + out("r")), 0) << log();
  std::string config = slurp(fs::path(kData) / "pinned.ini");
  config.replace(config.find("alpha = 0.1"), 11, "alpha = 0.05");
  std::ofstream(work_ / "changed.ini") << config;
  EXPECT_EQ(cli("check --config " + out("changed.ini") + " --out " + out("r")), 2) << log();
}

TEST_F(CliTest, SequenceSuiteRunsWithoutProtocols) {
  EXPECT_EQ(cli("check --config " + kData + "/lemma5_only.ini --out " + out("l")), 0) << log();
  EXPECT_NE(log().find("200 instances, 0 + 0 violations"), std::string::npos) << log();
}

TEST_F(CliTest, EmptyGridIsAUsageError) {
  EXPECT_EQ(cli("mixing --config " + kData + "/empty.ini --out " + out("m")), 2);
  EXPECT_EQ(cli("fit --config " + kData + "/empty.ini --out " + out("m")), 2);
}

TEST_F(CliTest, MixingWritesTableAndReportsNoComm) {
  std::ofstream(work_ / "mix.ini") << "[objective]\nd = 2\n"
                                      "[protocol.ar]\nkind = allreduce\nn = 4\n"
                                      "[protocol.none]\nkind = nocomm\nn = 2\n"
                                      "[mixing]\nmax_window = 64\n";
  EXPECT_EQ(cli("mixing --config " + out("mix.ini") + " --out " + out("m")), 0) << log();
  const std::string csv = slurp(work_ / "m" / "mixing.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "protocol,n,tmix_hat,tmix_theory,xi_hat,quantile,status");
  EXPECT_NE(csv.find("allreduce,4,4,4,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("no-mixing"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(work_ / "m" / "mixing.json"));
}

TEST_F(CliTest, BadInvocationsAreUsageErrors) {
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("run"), 2);
  EXPECT_EQ(cli("run --config /does/not/exist.ini"), 2);
  std::ofstream(work_ / "bad.ini") << "[experiment]\nwhat = 1\n";
  EXPECT_EQ(cli("run --config " + out("bad.ini")), 2);
  EXPECT_NE(log().find("bad.ini:2"), std::string::npos) << log();
}

TEST_F(CliTest, HelpExitsCleanly) { EXPECT_EQ(cli("--help"), 0); }

}  // namespace
