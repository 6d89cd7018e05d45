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


#include <string>

#include <gtest/gtest.h>

#include "mixsim/config.hpp"

namespace mixsim {
namespace {

constexpr const char* kSample = R"(# sample
[experiment]
name = sample
out = out/sample
seeds = 0..3, 10
T = 500

[objective]
kind = sigmoidsum
d = 8
samples = 16

[noise]
kind = minibatch
batch = 2

[optimizer]
kind = amsgrad
beta1 = 0.8

[schedule]
kind = constant
alpha = 0.01

[protocol.local]
kind = localstep
n = 2

[protocol.sparse]
kind = sparsified
inner = allreduce
n = 4
eta = 0.5

[sweep]
local_steps = 1, 4
T = 100, 200
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "test.ini");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    return e.what();
  }
  return "";
}

TEST(Config, ParsesEverySection) {
  const auto cfg = parse_config(kSample, "sample.ini");
  EXPECT_EQ(cfg.name, "sample");
  EXPECT_EQ(cfg.out_dir, "out/sample");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1, 2, 3, 10}));
  EXPECT_EQ(cfg.base.T, 500u);
  EXPECT_EQ(cfg.base.objective.kind, ObjectiveKind::kSigmoidSum);
  EXPECT_EQ(cfg.base.objective.d, 8u);
  EXPECT_EQ(cfg.base.noise.kind, NoiseKind::kMinibatch);
  EXPECT_EQ(cfg.base.noise.batch, 2u);
  EXPECT_EQ(cfg.base.optimizer.kind, OptimizerKind::kSam);
  EXPECT_DOUBLE_EQ(cfg.base.optimizer.sam.p, 0.5);
  EXPECT_DOUBLE_EQ(cfg.base.optimizer.sam.beta1, 0.8);
  EXPECT_DOUBLE_EQ(cfg.base.schedule.alpha, 0.01);
  ASSERT_EQ(cfg.protocols.size(), 2u);
  EXPECT_EQ(cfg.protocols[0].label, "local");
  EXPECT_EQ(cfg.protocols[1].spec.kind, ProtocolKind::kSparsified);
  ASSERT_TRUE(cfg.protocols[1].spec.inner);
  EXPECT_EQ(cfg.protocols[1].spec.inner->kind, ProtocolKind::kAllReduce);
  EXPECT_EQ(cfg.protocols[1].spec.d, 8u);
  EXPECT_EQ(cfg.hash.size(), 16u);
}

TEST(Config, GridAppliesAxesOnlyWhereRelevant) {
  const auto points = expand_grid(parse_config(kSample));
  std::vector<std::string> keys;
  for (const auto& p : points) keys.push_back(p.key);
  EXPECT_EQ(keys, (std::vector<std::string>{"local-n2-m1-T100", "local-n2-m1-T200",
                                            "local-n2-m4-T100", "local-n2-m4-T200",
                                            "sparse-n4-e0.5-T100", "sparse-n4-e0.5-T200"}));
  EXPECT_EQ(points[2].multiplier, 4u);
  EXPECT_EQ(points[2].config.protocol.local_steps, 4u);
  EXPECT_EQ(points[4].multiplier, 1u);
  EXPECT_EQ(points[5].config.T, 200u);
}

TEST(Config, MixingGridDropsTheTAxis) {
  const auto grid = expand_mixing_grid(parse_config(kSample));
  ASSERT_EQ(grid.size(), 3u);
  EXPECT_EQ(grid[1].spec.local_steps, 4u);
}

TEST(Config, HashIgnoresCommentsAndOrder) {
  const auto a = parse_config("[experiment]\nname = x\nT = 5\n");
  const auto b = parse_config("# c\n[experiment]\nT = 5   # five\nname = x\n");
  const auto c = parse_config("[experiment]\nname = x\nT = 6\n");
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
}

TEST(Config, DefaultsWithoutSections) {
  const auto cfg = parse_config("");
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
  EXPECT_TRUE(cfg.protocols.empty());
  EXPECT_TRUE(expand_grid(cfg).empty());
  EXPECT_EQ(cfg.base.optimizer.kind, OptimizerKind::kSgd);
}

TEST(Config, ErrorsCarryFileAndLine) {
  EXPECT_NE(error_of("[experiment]\nbogus = 1\n").find("test.ini:2"), std::string::npos);
  EXPECT_NE(error_of("[nowhere]\n").find("test.ini:1"), std::string::npos);
  EXPECT_NE(error_of("[experiment]\nT = 1\nT = 2\n").find("test.ini:3"), std::string::npos);
  EXPECT_NE(error_of("[experiment]\njust text\n").find("test.ini:2"), std::string::npos);
}

TEST(Config, RejectsInvalidValues) {
  EXPECT_FALSE(error_of("[experiment]\nT = abc\n").empty());
  EXPECT_FALSE(error_of("[experiment]\nT = 0\n").empty());
  EXPECT_FALSE(error_of("[noise]\nsigma = -1\n").empty());
  EXPECT_FALSE(error_of("[schedule]\nkind = cosine\n").empty());
  EXPECT_FALSE(error_of("[schedule]\nkind = table\n").empty());
  EXPECT_FALSE(error_of("[protocol.a]\nkind = teleport\n").empty());
  EXPECT_FALSE(error_of("[protocol.a]\nkind = slack\ngamma = 2\n").empty());
  EXPECT_FALSE(error_of("[mixing]\nquantile = 0\n").empty());
  EXPECT_FALSE(error_of("[experiment]\nseeds = 5..2\n").empty());
}

TEST(Config, InvalidSweepPointIsReported) {
  const std::string text = "[protocol.a]\nkind = allreduce\nn = 2\n[sweep]\nn = 1\n";
  const auto cfg = parse_config(text);
  EXPECT_THROW(expand_grid(cfg), Error);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"mixing.ini", "bounds_sgd.ini", "rate.ini"}) {
    const auto cfg = load_config(std::string(MIXSIM_CONFIGS) + "/" + name);
    EXPECT_FALSE(cfg.protocols.empty()) << name;
    EXPECT_NO_THROW(expand_grid(cfg)) << name;
  }
  EXPECT_THROW(load_config("/nonexistent/config.ini"), Error);
}

}  // namespace
}  // namespace mixsim
