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

#include "mixsim/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mixsim/error.hpp"
#include "mixsim/random.hpp"

namespace mixsim {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  if (m > 0.0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

Eigen::Map<const Eigen::VectorXd> as_eigen(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}
Eigen::Map<Eigen::VectorXd> as_eigen(std::span<double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw Error(ErrorCode::kDimensionMismatch,
                "objective expects d = " + std::to_string(expected) + ", got " +
                    std::to_string(got));
  }
}

double top_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

class Quadratic final : public Objective {
 public:
  Quadratic(Eigen::MatrixXd a, Eigen::VectorXd b)
      : a_(std::move(a)), b_(std::move(b)), l_(top_eigenvalue(a_)) {}

  ObjectiveKind kind() const override { return ObjectiveKind::kQuadratic; }
  std::size_t dim() const override { return static_cast<std::size_t>(b_.size()); }
  double value(std::span<const double> x) const override {
    check_dim(dim(), x.size());
    const Eigen::VectorXd r = as_eigen(x) - b_;
    return 0.5 * r.dot(a_ * r);
  }
  void grad(std::span<const double> x, std::span<double> out) const override {
    check_dim(dim(), x.size());
    as_eigen(out) = a_ * (as_eigen(x) - b_);
  }
  double smoothness() const override { return l_; }
  std::optional<double> f_star() const override { return 0.0; }
  double lower_bound() const override { return 0.0; }
  std::optional<double> ginf() const override { return std::nullopt; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  double l_;
};

// (1/K) sum_k sigmoid(a_k^T x - b_k)^2
class SigmoidSum final : public Objective {
 public:
  explicit SigmoidSum(Dataset data) : data_(std::move(data)) {
    const auto k = static_cast<double>(data_.samples());
    const Eigen::MatrixXd gram = data_.features.transpose() * data_.features / k;
    l_ = sigmoid_square_curvature() * top_eigenvalue(gram);
    ginf_ = sigmoid_square_slope() * data_.features.cwiseAbs().maxCoeff();
    const double row_max = data_.features.rowwise().squaredNorm().maxCoeff();
    variation_ = sigmoid_square_slope() * sigmoid_square_slope() * row_max;
  }

  ObjectiveKind kind() const override { return ObjectiveKind::kSigmoidSum; }
  std::size_t dim() const override { return data_.dim(); }
  double value(std::span<const double> x) const override {
    check_dim(dim(), x.size());
    const Eigen::VectorXd z = data_.features * as_eigen(x) - data_.targets;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) sum += std::pow(sigmoid(z(k)), 2);
    return sum / static_cast<double>(z.size());
  }
  void grad(std::span<const double> x, std::span<double> out) const override {
    check_dim(dim(), x.size());
    const Eigen::VectorXd z = data_.features * as_eigen(x) - data_.targets;
    Eigen::VectorXd w(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) w(k) = slope(z(k));
    as_eigen(out) = data_.features.transpose() * w / static_cast<double>(z.size());
  }
  double smoothness() const override { return l_; }
  std::optional<double> f_star() const override { return std::nullopt; }
  double lower_bound() const override { return 0.0; }
  std::optional<double> ginf() const override { return ginf_; }

  std::size_t sample_count() const override { return data_.samples(); }
  void sample_grad(std::size_t k, std::span<const double> x,
                   std::span<double> out) const override {
    const auto row = data_.features.row(static_cast<Eigen::Index>(k));
    const double z = row.dot(as_eigen(x)) - data_.targets(static_cast<Eigen::Index>(k));
    as_eigen(out) = slope(z) * row.transpose();
  }
  double sample_variation_bound() const override { return variation_; }
  const Dataset* dataset() const override { return &data_; }

 private:
  // d/dz sigmoid(z)^2
  static double slope(double z) {
    const double s = sigmoid(z);
    return 2.0 * s * s * (1.0 - s);
  }

  Dataset data_;
  double l_ = 0.0;
  double ginf_ = 0.0;
  double variation_ = 0.0;
};

// (1/K) sum_k log(1 + exp(-y_k a_k^T x)) + sum_j x_j^2 / (1 + x_j^2)
class RegularizedLogistic final : public Objective {
 public:
  explicit RegularizedLogistic(Dataset data) : data_(std::move(data)) {
    const auto k = static_cast<double>(data_.samples());
    const Eigen::MatrixXd gram = data_.features.transpose() * data_.features / k;
    l_ = top_eigenvalue(gram) / 4.0 + 2.0;
    ginf_ = data_.features.cwiseAbs().maxCoeff() + kRegularizerSlope;
    variation_ = data_.features.rowwise().squaredNorm().maxCoeff();
  }

  ObjectiveKind kind() const override { return ObjectiveKind::kRegularizedLogistic; }
  std::size_t dim() const override { return data_.dim(); }
  double value(std::span<const double> x) const override {
    check_dim(dim(), x.size());
    const Eigen::VectorXd z = data_.features * as_eigen(x);
    double loss = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) loss += softplus_neg(data_.targets(k) * z(k));
    loss /= static_cast<double>(z.size());
    for (double v : x) loss += v * v / (1.0 + v * v);
    return loss;
  }
  void grad(std::span<const double> x, std::span<double> out) const override {
    check_dim(dim(), x.size());
    const Eigen::VectorXd z = data_.features * as_eigen(x);
    Eigen::VectorXd w(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) w(k) = loss_slope(k, z(k));
    as_eigen(out) = data_.features.transpose() * w / static_cast<double>(z.size());
    add_regularizer(x, out);
  }
  double smoothness() const override { return l_; }
  std::optional<double> f_star() const override { return std::nullopt; }
  double lower_bound() const override { return 0.0; }
  std::optional<double> ginf() const override { return ginf_; }

  std::size_t sample_count() const override { return data_.samples(); }
  void sample_grad(std::size_t k, std::span<const double> x,
                   std::span<double> out) const override {
    const auto idx = static_cast<Eigen::Index>(k);
    const auto row = data_.features.row(idx);
    as_eigen(out) = loss_slope(idx, row.dot(as_eigen(x))) * row.transpose();
    add_regularizer(x, out);
  }
  double sample_variation_bound() const override { return variation_; }
  const Dataset* dataset() const override { return &data_; }

 private:
  // sup |d/dx x^2 / (1 + x^2)| = 3 sqrt(3) / 8, attained at x = 1/sqrt(3).
  static constexpr double kRegularizerSlope = 0.649519052838329;

  double loss_slope(Eigen::Index k, double z) const {
    const double y = data_.targets(k);
    return -y * sigmoid(-y * z);
  }
  static void add_regularizer(std::span<const double> x, std::span<double> out) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double q = 1.0 + x[j] * x[j];
      out[j] += 2.0 * x[j] / (q * q);
    }
  }

  Dataset data_;
  double l_ = 0.0;
  double ginf_ = 0.0;
  double variation_ = 0.0;
};

Dataset synthetic_dataset(const ObjectiveParams& params) {
  std::mt19937_64 rng = make_rng(params.seed, "dataset");
  std::normal_distribution<double> normal;
  const auto k = static_cast<Eigen::Index>(params.samples);
  const auto d = static_cast<Eigen::Index>(params.d);
  Dataset data;
  data.features.resize(k, d);
  data.targets.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = params.feature_scale * normal(rng);
  }
  if (params.kind == ObjectiveKind::kSigmoidSum) {
    for (Eigen::Index i = 0; i < k; ++i) data.targets(i) = normal(rng);
  } else {
    Eigen::VectorXd truth(d);
    for (Eigen::Index j = 0; j < d; ++j) truth(j) = normal(rng);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double margin = data.features.row(i).dot(truth) + normal(rng);
      data.targets(i) = margin >= 0.0 ? 1.0 : -1.0;
    }
  }
  return data;
}

}  // namespace

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kQuadratic: return "quadratic";
    case ObjectiveKind::kSigmoidSum: return "sigmoidsum";
    case ObjectiveKind::kRegularizedLogistic: return "reglogistic";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(const std::string& name) {
  if (name == "quadratic") return ObjectiveKind::kQuadratic;
  if (name == "sigmoidsum") return ObjectiveKind::kSigmoidSum;
  if (name == "reglogistic") return ObjectiveKind::kRegularizedLogistic;
  throw Error(ErrorCode::kInvalidArgument, "unknown objective kind '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::kGaussian ? "gaussian" : "minibatch";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::kGaussian;
  if (name == "minibatch") return NoiseKind::kMinibatch;
  throw Error(ErrorCode::kInvalidArgument, "unknown noise model '" + name + "'");
}

double sigmoid_square_slope() { return 8.0 / 27.0; }

double sigmoid_square_curvature() {
  // d2/dz2 sigmoid(z)^2 = 2 q(s) with q(s) = s^2 (1 - s)(2 - 3s), s = sigmoid(z).
  // q'(s) = s (12 s^2 - 15 s + 4) vanishes at s = (15 +- sqrt(33)) / 24.
  auto q = [](double s) { return s * s * (1.0 - s) * (2.0 - 3.0 * s); };
  const double r = std::sqrt(33.0);
  return 2.0 * std::max(std::abs(q((15.0 - r) / 24.0)), std::abs(q((15.0 + r) / 24.0)));
}

// ---------------------------------------------------------------------------
// Dataset CSV

void Dataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write dataset '" + path + "'");
  for (std::size_t j = 0; j < dim(); ++j) out << 'a' << j << ',';
  out << "target\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) out << features(i, j) << ',';
    out << targets(i) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing dataset '" + path + "'");
}

Dataset Dataset::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIo, "empty dataset '" + path + "'");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw Error(ErrorCode::kIo, "dataset needs at least one feature");
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kIo, path + ":" + std::to_string(line_no) +
                                        ": not a number '" + cell + "'");
      }
    }
    if (row.size() != columns) {
      throw Error(ErrorCode::kIo, path + ":" + std::to_string(line_no) +
                                      ": expected " + std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::kIo, "dataset '" + path + "' has no rows");
  Dataset data;
  const auto k = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(columns - 1);
  data.features.resize(k, d);
  data.targets.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = rows[i][j];
    data.targets(i) = rows[i][columns - 1];
  }
  return data;
}

// ---------------------------------------------------------------------------
// Objective

std::vector<double> Objective::grad(std::span<const double> x) const {
  std::vector<double> out(dim());
  grad(x, out);
  return out;
}

void Objective::sample_grad(std::size_t, std::span<const double>,
                            std::span<double>) const {
  throw Error(ErrorCode::kUnsupported,
              to_string(kind()) + " objective is not a finite sum");
}

std::shared_ptr<const Objective> make_objective(const ObjectiveParams& params) {
  if (params.d < 1) throw Error(ErrorCode::kInvalidArgument, "objective needs d >= 1");
  switch (params.kind) {
    case ObjectiveKind::kQuadratic: {
      const auto d = static_cast<Eigen::Index>(params.d);
      std::mt19937_64 rng = make_rng(params.seed, "quadratic");
      std::normal_distribution<double> normal;
      Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
      if (!params.identity_hessian) {
        if (!(params.eig_min > 0.0 && params.eig_min <= params.eig_max)) {
          throw Error(ErrorCode::kInvalidArgument, "need 0 < eig_min <= eig_max");
        }
        Eigen::MatrixXd g(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
          for (Eigen::Index j = 0; j < d; ++j) g(i, j) = normal(rng);
        }
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        const Eigen::MatrixXd q = qr.householderQ();
        std::uniform_real_distribution<double> eig(params.eig_min, params.eig_max);
        Eigen::VectorXd lambda(d);
        for (Eigen::Index i = 0; i < d; ++i) lambda(i) = eig(rng);
        lambda(0) = params.eig_max;
        a = q * lambda.asDiagonal() * q.transpose();
        a = 0.5 * (a + a.transpose());
      }
      Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
      for (Eigen::Index i = 0; i < d; ++i) b(i) = params.center_scale * normal(rng);
      return std::make_shared<Quadratic>(std::move(a), std::move(b));
    }
    case ObjectiveKind::kSigmoidSum:
    case ObjectiveKind::kRegularizedLogistic: {
      Dataset data;
      if (!params.dataset_path.empty()) {
        data = Dataset::load_csv(params.dataset_path);
        check_dim(params.d, data.dim());
      } else {
        if (params.samples < 1) {
          throw Error(ErrorCode::kInvalidArgument, "dataset needs samples >= 1");
        }
        data = synthetic_dataset(params);
      }
      if (params.kind == ObjectiveKind::kSigmoidSum) {
        return std::make_shared<SigmoidSum>(std::move(data));
      }
      for (Eigen::Index i = 0; i < data.targets.size(); ++i) {
        if (data.targets(i) != 1.0 && data.targets(i) != -1.0) {
          throw Error(ErrorCode::kInvalidArgument, "logistic labels must be +1 or -1");
        }
      }
      return std::make_shared<RegularizedLogistic>(std::move(data));
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown objective kind");
}

// ---------------------------------------------------------------------------
// GradientOracle

GradientOracle::GradientOracle(std::shared_ptr<const Objective> objective,
                               NoiseParams noise)
    : objective_(std::move(objective)), noise_(noise) {
  if (!objective_) throw Error(ErrorCode::kInvalidArgument, "oracle needs an objective");
  if (!(noise_.sigma >= 0.0) || !std::isfinite(noise_.sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be finite and >= 0");
  }
  if (noise_.kind == NoiseKind::kMinibatch) {
    if (objective_->sample_count() == 0) {
      throw Error(ErrorCode::kUnsupported,
                  "minibatch noise needs a finite-sum objective, not " +
                      to_string(objective_->kind()));
    }
    if (noise_.batch < 1) throw Error(ErrorCode::kInvalidArgument, "batch must be >= 1");
  }
}

void GradientOracle::stoch_grad(std::span<const double> x, std::mt19937_64& rng,
                                std::span<double> out) const {
  const std::size_t d = objective_->dim();
  if (noise_.kind == NoiseKind::kGaussian) {
    objective_->grad(x, out);
    if (noise_.sigma > 0.0) {
      std::normal_distribution<double> normal(0.0, noise_.sigma / std::sqrt(static_cast<double>(d)));
      for (auto& g : out) g += normal(rng);
    }
    return;
  }
  std::uniform_int_distribution<std::size_t> pick(0, objective_->sample_count() - 1);
  std::vector<double> sample(d);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t b = 0; b < noise_.batch; ++b) {
    objective_->sample_grad(pick(rng), x, sample);
    for (std::size_t j = 0; j < d; ++j) out[j] += sample[j];
  }
  const double inv = 1.0 / static_cast<double>(noise_.batch);
  for (auto& g : out) g *= inv;
}

std::vector<double> GradientOracle::stoch_grad(std::span<const double> x,
                                               std::mt19937_64& rng) const {
  std::vector<double> out(objective_->dim());
  stoch_grad(x, rng, out);
  return out;
}

double GradientOracle::sigma2() const {
  if (noise_.kind == NoiseKind::kGaussian) return noise_.sigma * noise_.sigma;
  return objective_->sample_variation_bound() / static_cast<double>(noise_.batch);
}

std::optional<double> GradientOracle::ginf() const {
  if (noise_.kind == NoiseKind::kGaussian && noise_.sigma > 0.0) return std::nullopt;
  return objective_->ginf();
}

// ---------------------------------------------------------------------------
// Checks

double gradient_check(const Objective& objective, std::size_t points,
                      std::uint64_t seed, double h, double radius) {
  std::mt19937_64 rng = make_rng(seed, "gradient-check");
  std::normal_distribution<double> normal(0.0, radius);
  const std::size_t d = objective.dim();
  double worst = 0.0;
  std::vector<double> x(d);
  for (std::size_t p = 0; p < points; ++p) {
    for (auto& v : x) v = normal(rng);
    const auto g = objective.grad(x);
    double err = 0.0;
    double scale = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double keep = x[j];
      x[j] = keep + h;
      const double up = objective.value(x);
      x[j] = keep - h;
      const double down = objective.value(x);
      x[j] = keep;
      const double fd = (up - down) / (2.0 * h);
      err += (g[j] - fd) * (g[j] - fd);
      scale += g[j] * g[j];
    }
    worst = std::max(worst, std::sqrt(err) / std::max(std::sqrt(scale), 1e-6));
  }
  return worst;
}

double smoothness_ratio(const Objective& objective, std::size_t pairs,
                        std::uint64_t seed, double radius) {
  std::mt19937_64 rng = make_rng(seed, "smoothness");
  std::normal_distribution<double> normal(0.0, radius);
  std::uniform_real_distribution<double> step(-6.0, 0.0);
  const std::size_t d = objective.dim();
  double worst = 0.0;
  std::vector<double> x(d);
  std::vector<double> y(d);
  for (std::size_t p = 0; p < pairs; ++p) {
    // Mix far-apart and nearby pairs so local curvature is probed too.
    const double spread = std::pow(10.0, step(rng));
    double dist = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = normal(rng);
      y[j] = x[j] + spread * normal(rng);
      dist += (x[j] - y[j]) * (x[j] - y[j]);
    }
    const auto gx = objective.grad(x);
    const auto gy = objective.grad(y);
    double diff = 0.0;
    for (std::size_t j = 0; j < d; ++j) diff += (gx[j] - gy[j]) * (gx[j] - gy[j]);
    if (dist > 0.0) {
      worst = std::max(worst, std::sqrt(diff / dist) / objective.smoothness());
    }
  }
  return worst;
}

}  // namespace mixsim
