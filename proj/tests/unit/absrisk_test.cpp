// Copyright 2026 The recal Authors.
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

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "recal/absrisk.hpp"
#include "recal/errors.hpp"

namespace recal {
namespace {

double L0(double t) { return std::pow(0.01 * t, 2.0); }
double l0(double t) { return 2.0 * 0.01 * 0.01 * t; }
double Lc(double t) { return std::pow(0.008 * t, 1.5); }

StepFunction sample(double (*f)(double), double a, double b, double step) {
  std::vector<double> kn, va;
  const int n = static_cast<int>(std::lround((b - a) / step));
  for (int k = 0; k <= n; ++k) {
    const double t = a + (b - a) * k / n;
    kn.push_back(t);
    va.push_back(f(t));
  }
  return StepFunction(kn, va, 0.0);
}

AbsoluteRiskInput weibull_input(double step, double t0 = 50.0, double t1 = 60.0) {
  AbsoluteRiskInput in;
  in.t0 = t0;
  in.t1 = t1;
  in.z = Eigen::Vector2d(1.0, 0.0);
  in.beta = Eigen::Vector2d(std::log(2.0), std::log(2.0));
  in.lambda0 = sample(L0, t0, t1, step);
  in.lambda_c = sample(Lc, t0, t1, step);
  return in;
}

double weibull_oracle(double t0, double t1) {
  return oracle::absolute_risk_integral(l0, L0, Lc, 2.0, t0, t1);
}

AbsoluteRiskInput random_input(SplitMix64& rng, int L, int p) {
  AbsoluteRiskInput in;
  in.t0 = 2.0;
  in.t1 = 2.0 + L;
  in.z.resize(p);
  in.beta.resize(p);
  for (int j = 0; j < p; ++j) {
    in.z[j] = rng.normal();
    in.beta[j] = rng.normal(0.0, 0.4);
  }
  std::vector<double> kn, va, vc;
  double a = 0.01, c = 0.02;
  for (int k = 0; k <= L; ++k) {
    kn.push_back(2.0 + k);
    va.push_back(a);
    vc.push_back(c);
    a += 0.02 * rng.uniform();
    c += 0.03 * rng.uniform();
  }
  in.lambda0 = StepFunction(kn, va);
  in.lambda_c = StepFunction(kn, vc);
  return in;
}

TEST(AbsoluteRisk, FlatBaselineIsZero) {
  AbsoluteRiskInput in = weibull_input(1.0);
  in.lambda0 = StepFunction({10.0}, {0.3});
  Warnings w;
  EXPECT_EQ(absolute_risk(in, &w), 0.0);
  EXPECT_EQ(w.size(), 1u);
}

TEST(AbsoluteRisk, SingleJump) {
  AbsoluteRiskInput in;
  in.t0 = 5.0;
  in.t1 = 9.0;
  in.z = Eigen::VectorXd::Zero(1);
  in.beta = Eigen::VectorXd::Constant(1, 0.8);
  in.lambda0 = StepFunction({5.0, 5.5}, {0.1, 0.13});
  in.lambda_c = StepFunction({1.0}, {0.4});
  EXPECT_NEAR(absolute_risk(in), 0.03, 1e-15);
}

TEST(AbsoluteRisk, WeibullMatchesQuadrature) {
  const double truth = weibull_oracle(50.0, 60.0);
  EXPECT_NEAR(absolute_risk(weibull_input(0.001)), truth, 2e-4);
}

TEST(AbsoluteRisk, GridRefinementIsFirstOrder) {
  const double truth = weibull_oracle(50.0, 60.0);
  double prev = 0.0;
  for (double step : {0.5, 0.25, 0.125, 0.0625}) {
    const double err = std::abs(absolute_risk(weibull_input(step)) - truth);
    if (prev > 0.0) EXPECT_NEAR(prev / err, 2.0, 0.1) << "step " << step;
    prev = err;
  }
}

TEST(AbsoluteRisk, NondecreasingInHorizon) {
  AbsoluteRiskInput in = weibull_input(0.5, 50.0, 80.0);
  double prev = 0.0;
  for (double t1 = 50.5; t1 <= 80.0; t1 += 0.5) {
    in.t1 = t1;
    const double r = absolute_risk(in);
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(AbsoluteRisk, CompetingHazardNeverIncreasesRisk) {
  SplitMix64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    AbsoluteRiskInput in = random_input(rng, 8, 2);
    const double base = absolute_risk(in);
    std::vector<double> va = in.lambda_c.values();
    for (std::size_t k = 0; k < va.size(); ++k) va[k] += 0.01 * k * rng.uniform() + 0.001 * k;
    // keep it nondecreasing
    for (std::size_t k = 1; k < va.size(); ++k) va[k] = std::max(va[k], va[k - 1]);
    in.lambda_c = StepFunction(in.lambda_c.knots(), va);
    EXPECT_LE(absolute_risk(in), base + 1e-15);
  }
}

TEST(AbsoluteRisk, EventPlusCompetingRiskAtMostOne) {
  SplitMix64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    AbsoluteRiskInput in = random_input(rng, 10, 2);
    const double r = std::exp(in.beta.dot(in.z));
    // competing-event risk on the same grid: swap the two hazards
    AbsoluteRiskInput c = in;
    c.z.setZero();
    c.lambda0 = in.lambda_c;
    std::vector<double> scaled = in.lambda0.values();
    for (double& v : scaled) v *= r;
    c.lambda_c = StepFunction(in.lambda0.knots(), scaled);
    EXPECT_LE(absolute_risk(in) + absolute_risk(c), 1.0);
  }
}

TEST(AbsoluteRiskGradient, AnalyticMatchesFiniteDifference) {
  SplitMix64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    AbsoluteRiskInput in = random_input(rng, 1 + static_cast<int>(rng.below(8)), 3);
    Eigen::VectorXd a = absolute_risk_gradient(in, GradientMode::Analytic);
    Eigen::VectorXd f = absolute_risk_gradient(in, GradientMode::FiniteDifference);
    ASSERT_EQ(a.size(), f.size());
    for (Eigen::Index j = 0; j < a.size(); ++j)
      EXPECT_LE(std::abs(a[j] - f[j]), 1e-5 * std::max(std::abs(f[j]), 1e-3)) << "coordinate " << j;
  }
}

TEST(AbsoluteRiskVariance, ZeroCovarianceIsZero) {
  AbsoluteRiskInput in = weibull_input(1.0);
  in.sigma_beta = Eigen::Matrix2d::Zero();
  in.cov_lambda = Eigen::MatrixXd::Zero(10, 10);
  EXPECT_EQ(absolute_risk_variance(in), 0.0);
}

TEST(AbsoluteRiskVariance, MatchesExplicitQuadraticForm) {
  SplitMix64 rng(6);
  AbsoluteRiskInput in = random_input(rng, 5, 2);
  Eigen::MatrixXd A(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) A(i, j) = rng.normal();
  Eigen::MatrixXd S = A * A.transpose() * 1e-4;
  in.sigma_beta = S.topLeftCorner(2, 2);
  in.cov_lambda = S.block(2, 2, 5, 5);
  in.cov_beta_lambda = S.block(0, 2, 2, 5);
  in.var_lambda_c = Eigen::VectorXd::Constant(5, 2e-5);
  Eigen::VectorXd g = absolute_risk_gradient(in, GradientMode::Analytic);
  // Xi = (beta, Lambda0(g_0..g_5), Lambda_c(g_0..g_5)); g_0 entries fixed
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(14, 14);
  V.topLeftCorner(2, 2) = in.sigma_beta;
  V.block(3, 3, 5, 5) = in.cov_lambda;
  V.block(0, 3, 2, 5) = in.cov_beta_lambda;
  V.block(3, 0, 5, 2) = in.cov_beta_lambda.transpose();
  for (int k = 0; k < 5; ++k) V(9 + k, 9 + k) = 2e-5;
  EXPECT_NEAR(absolute_risk_variance(in, GradientMode::Analytic), g.dot(V * g), 1e-15);
}

TEST(AbsoluteRiskVariance, RejectsWrongSizes) {
  AbsoluteRiskInput in = weibull_input(1.0);
  in.cov_lambda = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(absolute_risk_variance(in), InputError);
}

TEST(MakeRiskInput, AnnualInterpolation) {
  CoxFit fit;
  fit.beta_hat = Eigen::VectorXd::Zero(1);
  fit.sigma_beta = Eigen::MatrixXd::Zero(1, 1);
  RecalResult rec;
  rec.times = {2.0, 4.0};
  rec.lambda0 = Eigen::Vector2d(0.2, 0.6);
  rec.cov_lambda = Eigen::Matrix2d::Identity();
  rec.cov_beta_lambda = Eigen::MatrixXd::Zero(1, 2);
  CompetingHazard ch{StepFunction({1.0}, {0.0}), std::nullopt, std::nullopt};
  AbsoluteRiskInput in = make_risk_input(fit, rec, ch, Eigen::VectorXd::Zero(1), 0.0, 4.0, true);
  ASSERT_EQ(in.grid, (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  EXPECT_NEAR(in.lambda0(1.0), 0.1, 1e-15);
  EXPECT_NEAR(in.lambda0(3.0), 0.4, 1e-15);
  EXPECT_NEAR(in.cov_lambda(3, 3), 0.5, 1e-15);  // (I/2 + I/2) at t = 3
  EXPECT_NEAR(absolute_risk(in),
              0.1 + 0.1 * std::exp(-0.1) + 0.2 * std::exp(-0.2) + 0.2 * std::exp(-0.4),
              1e-15);
}

}  // namespace
}  // namespace recal
