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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mixsim/objectives.hpp"

namespace mixsim {
namespace {

ObjectiveParams params(ObjectiveKind kind, std::size_t d = 6) {
  ObjectiveParams p;
  p.kind = kind;
  p.d = d;
  p.seed = 7;
  p.samples = 32;
  return p;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mixsim_test_" + name);
}

TEST(Objectives, KindNamesRoundTrip) {
  for (auto kind : {ObjectiveKind::kQuadratic, ObjectiveKind::kSigmoidSum,
                    ObjectiveKind::kRegularizedLogistic}) {
    EXPECT_EQ(parse_objective_kind(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_objective_kind("rosenbrock"), Error);
  EXPECT_EQ(parse_noise_kind("minibatch"), NoiseKind::kMinibatch);
  EXPECT_THROW(parse_noise_kind("pink"), Error);
}

TEST(Objectives, GradientsMatchFiniteDifferences) {
  for (auto kind : {ObjectiveKind::kQuadratic, ObjectiveKind::kSigmoidSum,
                    ObjectiveKind::kRegularizedLogistic}) {
    auto p = params(kind);
    p.identity_hessian = false;
    p.center_scale = 1.0;
    const auto f = make_objective(p);
    EXPECT_LT(gradient_check(*f, 50, 3), 1e-6) << to_string(kind);
  }
}

TEST(Objectives, GradientsStayWithinSmoothnessConstant) {
  for (auto kind : {ObjectiveKind::kQuadratic, ObjectiveKind::kSigmoidSum,
                    ObjectiveKind::kRegularizedLogistic}) {
    auto p = params(kind);
    p.identity_hessian = false;
    const auto f = make_objective(p);
    EXPECT_LE(smoothness_ratio(*f, 500, 4), 1.0 + 1e-9) << to_string(kind);
  }
}

TEST(Objectives, IdentityQuadraticIsHalfSquaredDistance) {
  auto p = params(ObjectiveKind::kQuadratic, 3);
  const auto f = make_objective(p);
  const std::vector<double> x = {1.0, -2.0, 2.0};
  EXPECT_DOUBLE_EQ(f->value(x), 4.5);
  EXPECT_EQ(f->grad(x), x);
  EXPECT_DOUBLE_EQ(f->smoothness(), 1.0);
  EXPECT_EQ(f->f_star(), 0.0);
  EXPECT_FALSE(f->ginf().has_value());
}

TEST(Objectives, SpectrumControlsSmoothness) {
  auto p = params(ObjectiveKind::kQuadratic, 8);
  p.identity_hessian = false;
  p.eig_min = 0.2;
  p.eig_max = 3.0;
  EXPECT_NEAR(make_objective(p)->smoothness(), 3.0, 1e-9);
  p.eig_min = 4.0;
  EXPECT_THROW(make_objective(p), Error);
}

TEST(Objectives, QuadraticMinimumIsAtCenter) {
  auto p = params(ObjectiveKind::kQuadratic, 5);
  p.identity_hessian = false;
  p.center_scale = 2.0;
  const auto f = make_objective(p);
  // Gradient descent with step 1/L converges to the zero of the gradient.
  std::vector<double> x(5, 0.0), g(5);
  for (int i = 0; i < 20000; ++i) {
    f->grad(x, g);
    for (std::size_t j = 0; j < 5; ++j) x[j] -= g[j] / f->smoothness();
  }
  EXPECT_NEAR(f->value(x), 0.0, 1e-12);
}

TEST(Objectives, SigmoidSquareConstants) {
  // Grid search for the suprema of the first and second derivatives of
  // sigmoid(z)^2.
  double slope = 0.0, curvature = 0.0;
  const double h = 1e-4;
  for (double z = -20.0; z <= 20.0; z += 1e-3) {
    auto s2 = [](double v) { return std::pow(sigmoid(v), 2); };
    slope = std::max(slope, std::abs((s2(z + h) - s2(z - h)) / (2 * h)));
    curvature = std::max(curvature, std::abs((s2(z + h) - 2 * s2(z) + s2(z - h)) / (h * h)));
  }
  EXPECT_NEAR(sigmoid_square_slope(), slope, 1e-6);
  EXPECT_NEAR(sigmoid_square_slope(), 8.0 / 27.0, 1e-15);
  EXPECT_NEAR(sigmoid_square_curvature(), curvature, 1e-5);
}

TEST(Objectives, SigmoidSumAtOriginWithZeroTargets) {
  Dataset data;
  data.features = Eigen::MatrixXd::Random(10, 3);
  data.targets = Eigen::VectorXd::Zero(10);
  const auto path = temp_file("zero_targets.csv");
  data.save_csv(path.string());
  auto p = params(ObjectiveKind::kSigmoidSum, 3);
  p.dataset_path = path.string();
  const auto f = make_objective(p);
  EXPECT_DOUBLE_EQ(f->value(std::vector<double>(3, 0.0)), 0.25);
  EXPECT_EQ(f->sample_count(), 10u);
  std::filesystem::remove(path);
}

TEST(Objectives, SigmoidSumGradientBoundHolds) {
  const auto f = make_objective(params(ObjectiveKind::kSigmoidSum));
  ASSERT_TRUE(f->ginf().has_value());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::vector<double> x(f->dim()), g(f->dim());
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    for (auto& v : x) v = normal(rng);
    for (std::size_t k = 0; k < f->sample_count(); ++k) {
      f->sample_grad(k, x, g);
      for (double v : g) worst = std::max(worst, std::abs(v));
    }
  }
  EXPECT_LE(worst, *f->ginf());
  EXPECT_GT(worst, 0.1 * *f->ginf());
}

TEST(Objectives, SampleGradientsAverageToFullGradient) {
  for (auto kind : {ObjectiveKind::kSigmoidSum, ObjectiveKind::kRegularizedLogistic}) {
    const auto f = make_objective(params(kind));
    const std::vector<double> x = {0.3, -0.1, 0.2, 0.5, -0.4, 0.0};
    std::vector<double> sum(f->dim(), 0.0), g(f->dim());
    for (std::size_t k = 0; k < f->sample_count(); ++k) {
      f->sample_grad(k, x, g);
      for (std::size_t j = 0; j < g.size(); ++j) sum[j] += g[j];
    }
    const auto full = f->grad(x);
    for (std::size_t j = 0; j < g.size(); ++j) {
      EXPECT_NEAR(sum[j] / static_cast<double>(f->sample_count()), full[j], 1e-12);
    }
  }
}

TEST(Objectives, QuadraticIsNotAFiniteSum) {
  const auto f = make_objective(params(ObjectiveKind::kQuadratic));
  std::vector<double> x(f->dim()), g(f->dim());
  EXPECT_THROW(f->sample_grad(0, x, g), Error);
  EXPECT_THROW(GradientOracle(f, {NoiseKind::kMinibatch, 0.0, 1}), Error);
}

TEST(Objectives, DatasetCsvRoundTripsExactly) {
  const auto f = make_objective(params(ObjectiveKind::kSigmoidSum));
  const auto path = temp_file("roundtrip.csv");
  f->dataset()->save_csv(path.string());
  const Dataset loaded = Dataset::load_csv(path.string());
  EXPECT_EQ(loaded.features, f->dataset()->features);
  EXPECT_EQ(loaded.targets, f->dataset()->targets);
  std::filesystem::remove(path);
}

TEST(Objectives, DatasetCsvRejectsMalformedRows) {
  const auto path = temp_file("bad.csv");
  {
    std::ofstream out(path);
    out << "a0,a1,target\n1,2,3\n1,x,3\n";
  }
  EXPECT_THROW(Dataset::load_csv(path.string()), Error);
  {
    std::ofstream out(path);
    out << "a0,a1,target\n1,2\n";
  }
  EXPECT_THROW(Dataset::load_csv(path.string()), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(Dataset::load_csv(path.string()), Error);
}

TEST(Objectives, LogisticRejectsNonBinaryLabels) {
  Dataset data;
  data.features = Eigen::MatrixXd::Ones(2, 2);
  data.targets = Eigen::VectorXd::Constant(2, 0.5);
  const auto path = temp_file("labels.csv");
  data.save_csv(path.string());
  auto p = params(ObjectiveKind::kRegularizedLogistic, 2);
  p.dataset_path = path.string();
  EXPECT_THROW(make_objective(p), Error);
  std::filesystem::remove(path);
}

TEST(Oracle, ZeroSigmaIsExactGradient) {
  const auto f = make_objective(params(ObjectiveKind::kQuadratic));
  GradientOracle oracle(f, {NoiseKind::kGaussian, 0.0, 1});
  std::mt19937_64 rng(1);
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  EXPECT_EQ(oracle.stoch_grad(x, rng), f->grad(x));
  EXPECT_DOUBLE_EQ(oracle.sigma2(), 0.0);
}

TEST(Oracle, GaussianNoiseIsUnbiasedWithDeclaredVariance) {
  const auto f = make_objective(params(ObjectiveKind::kQuadratic));
  GradientOracle oracle(f, {NoiseKind::kGaussian, 1.5, 1});
  EXPECT_DOUBLE_EQ(oracle.sigma2(), 2.25);
  EXPECT_FALSE(oracle.ginf().has_value());
  std::mt19937_64 rng(2);
  const std::vector<double> x = {1, -1, 0.5, 0, 2, -3};
  const auto exact = f->grad(x);
  const int draws = 40000;
  std::vector<double> mean(6, 0.0);
  double sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto g = oracle.stoch_grad(x, rng);
    for (std::size_t j = 0; j < 6; ++j) {
      mean[j] += (g[j] - exact[j]) / draws;
      sq += (g[j] - exact[j]) * (g[j] - exact[j]) / draws;
    }
  }
  // Each coordinate mean has standard error 1.5 / sqrt(6 * draws) ~ 0.003.
  for (double m : mean) EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(sq, 2.25, 0.05);
}

TEST(Oracle, MinibatchNoiseIsUnbiasedAndWithinVarianceBound) {
  const auto f = make_objective(params(ObjectiveKind::kSigmoidSum));
  GradientOracle oracle(f, {NoiseKind::kMinibatch, 0.0, 4});
  ASSERT_TRUE(oracle.ginf().has_value());
  std::mt19937_64 rng(3);
  const std::vector<double> x = {0.2, -0.3, 0.1, 0.0, 0.4, -0.2};
  const auto exact = f->grad(x);
  const int draws = 40000;
  std::vector<double> mean(6, 0.0);
  double sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto g = oracle.stoch_grad(x, rng);
    for (std::size_t j = 0; j < 6; ++j) {
      mean[j] += g[j] / draws;
      sq += (g[j] - exact[j]) * (g[j] - exact[j]) / draws;
      EXPECT_LE(std::abs(g[j]), *oracle.ginf());
    }
  }
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(mean[j], exact[j], 0.01);
  EXPECT_LE(sq, oracle.sigma2());
}

TEST(Oracle, RejectsNegativeSigma) {
  const auto f = make_objective(params(ObjectiveKind::kQuadratic));
  EXPECT_THROW(GradientOracle(f, {NoiseKind::kGaussian, -1.0, 1}), Error);
  EXPECT_THROW(GradientOracle(nullptr, {}), Error);
}

TEST(Oracle, SameSeedSameDraws) {
  const auto f = make_objective(params(ObjectiveKind::kSigmoidSum));
  GradientOracle oracle(f, {NoiseKind::kMinibatch, 0.0, 2});
  std::mt19937_64 a(9), b(9);
  const std::vector<double> x(6, 0.1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(oracle.stoch_grad(x, a), oracle.stoch_grad(x, b));
}

}  // namespace
}  // namespace mixsim
