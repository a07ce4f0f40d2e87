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
#include "recal/cox.hpp"
#include "recal/errors.hpp"
#include "recal/recalib.hpp"
#include "recal/simlab.hpp"

namespace recal {
namespace {

Cohort binary_cohort(int n_zero, int n_one) {
  const int n = n_zero + n_one;
  Eigen::MatrixXd Z(n, 1);
  for (int i = 0; i < n; ++i) Z(i, 0) = i < n_zero ? 0.0 : 1.0;
  Eigen::VectorXd X = Eigen::VectorXd::LinSpaced(n, 1.0, n);
  std::vector<EventCode> e(static_cast<std::size_t>(n), EventCode::EventOfInterest);
  return Cohort(Eigen::VectorXd::Zero(n), X, e, Z, {"z"});
}

struct Dataset {
  Cohort source;
  CoxFit fit;
  Cohort target;
};

Dataset a1c1(std::uint64_t seed, int n = 1000, long m = 100000) {
  ScenarioConfig cfg = scenario_preset("A1", "C1");
  SplitMix64 rng(seed);
  Cohort s = generate_cohort(cfg, Population::Source, rng, n);
  Cohort t = generate_cohort(cfg, Population::Target, rng, m);
  CoxFit f = fit_cox(s);
  return {std::move(s), std::move(f), std::move(t)};
}

TEST(Phi, Examples) {
  Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 0.9);
  EXPECT_NEAR(phi(Eigen::VectorXd::Zero(1), -std::log(0.3), b, 0.3), 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(phi(Eigen::VectorXd::Ones(1), 0.0, b, 0.3), 0.7);
  EXPECT_NEAR(phi(Eigen::VectorXd::Ones(1), 0.5, Eigen::VectorXd::Constant(1, std::log(2.0)), 0.5),
              std::exp(-1.0) - 0.5, 1e-15);
  EXPECT_NEAR(std::exp(-1.0) - 0.5, -0.132120, 1e-6);
}

TEST(SolveUnweighted, ClosedForms) {
  Cohort c = binary_cohort(10, 0);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 0.4);
  EXPECT_EQ(solve_unweighted(c, b, 1.0), 0.0);
  EXPECT_NEAR(solve_unweighted(c, b, 0.6), -std::log(0.6), 1e-14);
}

TEST(SolveUnweighted, HalfHalfMatchesBisection) {
  Cohort c = binary_cohort(50, 50);
  const double V = solve_unweighted(c, Eigen::VectorXd::Constant(1, std::log(2.0)), 0.7);
  const double ref = oracle::bisect(
      [](double v) { return 0.5 * std::exp(-v) + 0.5 * std::exp(-2.0 * v) - 0.7; }, 0.0, 10.0);
  EXPECT_NEAR(V, ref, 1e-10);
}

TEST(SolveWeighted, UniformEqualsUnweighted) {
  SplitMix64 rng(1);
  Cohort c = oracle::random_cohort(rng, 40, 2);
  Eigen::Vector2d b(0.3, -0.6);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(40, 1.0 / 40);
  // same root; the two sums differ only in rounding
  for (double S : {0.95, 0.6, 0.2}) {
    const double u = solve_unweighted(c, b, S);
    EXPECT_NEAR(solve_weighted(c, b, S, w), u, 1e-14 * u);
  }
}

TEST(SolveWeighted, ConcentratedWeightClosedForm) {
  SplitMix64 rng(2);
  Cohort c = oracle::random_cohort(rng, 12, 2);
  Eigen::Vector2d b(0.5, 0.25);
  Eigen::VectorXd risk = (c.covariates() * b).array().exp().matrix();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(12);
  w[7] = 1.0;
  const double V = solve_equation(risk, &w, 0.8);
  EXPECT_NEAR(V, -std::log(0.8) * std::exp(-b.dot(c.covariates().row(7).transpose())), 1e-13);
}

TEST(SolveWeighted, ElWeightsMatchBisection) {
  Eigen::MatrixXd Zm(5, 1);
  Zm << 0, 0, 1, 1, 1;
  Cohort c(Eigen::VectorXd::Zero(5), Eigen::VectorXd::LinSpaced(5, 1, 5),
           std::vector<EventCode>(5, EventCode::EventOfInterest), Zm, {"z"});
  ELWeights el = solve_el_dual(Zm, Eigen::VectorXd::Constant(1, 0.8));
  Eigen::VectorXd b = Eigen::VectorXd::Constant(1, std::log(2.0));
  const double V = solve_weighted(c, b, 0.7, el.weights);
  const double ref = oracle::bisect(
      [&](double v) {
        double s = 0.0;
        for (int i = 0; i < 5; ++i) s += el.weights[i] * std::exp(-v * std::exp(b[0] * Zm(i, 0)));
        return s - 0.7;
      },
      0.0, 10.0);
  EXPECT_NEAR(V, ref, 1e-10);
}

TEST(SolveEquation, RandomInstancesMatchBisection) {
  SplitMix64 rng(3);
  for (int inst = 0; inst < 100; ++inst) {
    const int n = 2 + static_cast<int>(rng.below(50));
    Eigen::VectorXd risk(n), w(n);
    for (int i = 0; i < n; ++i) {
      risk[i] = std::exp(rng.normal(0.0, 1.5));
      w[i] = rng.uniform();
    }
    w /= w.sum();
    const double S = 0.02 + 0.97 * rng.uniform();
    const bool weighted = inst % 2;
    const double V = solve_equation(risk, weighted ? &w : nullptr, S);
    auto f = [&](double v) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += (weighted ? w[i] : 1.0 / n) * std::exp(-v * risk[i]);
      return s - S;
    };
    double hi = 1.0;
    while (f(hi) > 0) hi *= 2.0;
    EXPECT_NEAR(V, oracle::bisect(f, 0.0, hi), 1e-9) << "instance " << inst;
    EXPECT_LT(std::abs(f(V)), 1e-12);
  }
}

TEST(SolveEquation, StrictlyDecreasingInSurvival) {
  SplitMix64 rng(4);
  Cohort c = oracle::random_cohort(rng, 30, 2);
  Eigen::Vector2d b(0.2, 0.7);
  double prev = -1.0;
  for (double S = 0.99; S > 0.01; S -= 0.02) {
    const double V = solve_unweighted(c, b, S);
    EXPECT_GT(V, prev);
    prev = V;
  }
}

TEST(SolveEquation, RejectsZeroSurvival) {
  Cohort c = binary_cohort(3, 3);
  EXPECT_THROW(solve_unweighted(c, Eigen::VectorXd::Zero(1), 0.0), InputError);
}

TEST(DiscretePopulation, RecoversWeibullBaseline) {
  oracle::DiscretePopulation pop;
  const double z1[] = {0, 1}, z2[] = {-1.0, 0.0, 1.5};
  const int counts[2][3] = {{3, 5, 2}, {4, 1, 5}};
  std::vector<Eigen::VectorXd> rows;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) {
      pop.z.push_back(Eigen::Vector2d(z1[a], z2[b]));
      pop.p.push_back(counts[a][b] / 20.0);
      for (int k = 0; k < counts[a][b]; ++k) rows.push_back(Eigen::Vector2d(z1[a], z2[b]));
    }
  Eigen::MatrixXd Z(20, 2);
  for (int i = 0; i < 20; ++i) Z.row(i) = rows[i].transpose();
  Cohort c(Eigen::VectorXd::Zero(20), Eigen::VectorXd::LinSpaced(20, 1, 20),
           std::vector<EventCode>(20, EventCode::EventOfInterest), Z, {"z1", "z2"});
  Eigen::Vector2d beta(std::log(2.0), 0.4);
  Weibull wb{0.01, 2.0, 1.0};
  for (double t : {10.0, 25.0, 40.0, 60.0, 90.0}) {
    const double S = pop.survival(wb.cumhaz(t), beta);
    EXPECT_NEAR(solve_unweighted(c, beta, S), wb.cumhaz(t), 1e-8) << "t = " << t;
  }
  // attributable-hazard identity: lambda0 / lambda = S / E{S(t|Z) exp(beta'Z)}
  const double h = 1e-3;
  for (double t : {15.0, 30.0, 50.0}) {
    auto S = [&](double u) { return pop.survival(wb.cumhaz(u), beta); };
    const double l0 =
        (solve_unweighted(c, beta, S(t + h)) - solve_unweighted(c, beta, S(t - h))) / (2 * h);
    const double lam = -(std::log(S(t + h)) - std::log(S(t - h))) / (2 * h);
    const double rhs = S(t) / pop.weighted_risk(wb.cumhaz(t), beta);
    EXPECT_NEAR(l0 / lam, rhs, 1e-4) << "t = " << t;
  }
}

TEST(Rho1Derivatives, MatchFiniteDifferences) {
  SplitMix64 rng(5);
  int checked = 0;
  for (int pt = 0; pt < 100; ++pt) {
    const int p = 1 + static_cast<int>(rng.below(3)), q = 1 + static_cast<int>(rng.below(3));
    Eigen::VectorXd z(p), beta(p), h(q), gamma(q), mu(q);
    for (int j = 0; j < p; ++j) {
      z[j] = rng.normal();
      beta[j] = rng.normal(0.0, 0.5);
    }
    for (int j = 0; j < q; ++j) {
      h[j] = rng.normal();
      mu[j] = rng.normal(0.0, 0.3);
      gamma[j] = rng.normal(0.0, 0.2);
    }
    if (1.0 + gamma.dot(h - mu) < 0.2) continue;
    const double V = 0.05 + rng.uniform(), S = 0.1 + 0.8 * rng.uniform();
    // independent statement of rho1 = (exp(-V e^{b'z}) - S) / (1 + g'(h - mu))
    auto rho = [&](double v, const Eigen::VectorXd& b, double s, const Eigen::VectorXd& g,
                   const Eigen::VectorXd& m) {
      return (std::exp(-v * std::exp(b.dot(z))) - s) / (1.0 + g.dot(h - m));
    };
    Rho1Derivatives d = rho1_derivatives(z, h, V, beta, S, gamma, mu);
    const double eps = 1e-6;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-3, std::abs(b)); };
    EXPECT_NEAR(d.rho1, rho(V, beta, S, gamma, mu), 1e-15);
    EXPECT_LT(rel(d.d_lambda, (rho(V + eps, beta, S, gamma, mu) - rho(V - eps, beta, S, gamma, mu)) / (2 * eps)), 1e-5);
    EXPECT_LT(rel(d.d_S, (rho(V, beta, S + eps, gamma, mu) - rho(V, beta, S - eps, gamma, mu)) / (2 * eps)), 1e-5);
    Eigen::VectorXd gb = oracle::central_gradient(
        [&](const Eigen::VectorXd& x) { return rho(V, x, S, gamma, mu); }, beta, eps);
    Eigen::VectorXd gg = oracle::central_gradient(
        [&](const Eigen::VectorXd& x) { return rho(V, beta, S, x, mu); }, gamma, eps);
    Eigen::VectorXd gm = oracle::central_gradient(
        [&](const Eigen::VectorXd& x) { return rho(V, beta, S, gamma, x); }, mu, eps);
    for (int j = 0; j < p; ++j) EXPECT_LT(rel(d.d_beta[j], gb[j]), 1e-5);
    for (int j = 0; j < q; ++j) {
      EXPECT_LT(rel(d.d_gamma[j], gg[j]), 1e-5);
      EXPECT_LT(rel(d.d_mu[j], gm[j]), 1e-5);
    }
    auto Q = [&](const Eigen::VectorXd& g, const Eigen::VectorXd& m) -> Eigen::VectorXd {
      return (h - m) / (1.0 + g.dot(h - m));
    };
    QDerivatives qd = q_derivatives(h, gamma, mu);
    Eigen::MatrixXd Jg = oracle::central_jacobian([&](const Eigen::VectorXd& x) { return Q(x, mu); }, gamma, eps);
    Eigen::MatrixXd Jm = oracle::central_jacobian([&](const Eigen::VectorXd& x) { return Q(gamma, x); }, mu, eps);
    EXPECT_LT((qd.q - Q(gamma, mu)).cwiseAbs().maxCoeff(), 1e-14);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        EXPECT_LT(rel(qd.d_gamma(a, b), Jg(a, b)), 1e-5);
        EXPECT_LT(rel(qd.d_mu(a, b), Jm(a, b)), 1e-5);
      }
    ++checked;
  }
  EXPECT_GT(checked, 80);
}

TEST(Variance, PureFirstTermWithoutExternalNoise) {
  Dataset d = a1c1(11, 1000, 2000);
  d.fit.sigma_beta.setZero();
  TargetSummary s = summarize_target(d.target, {30.0}, {});
  s.survival_variance.setZero();
  s.survival_covariance.reset();
  const double V = solve_unweighted(d.source, d.fit.beta_hat, s.survival[0]);
  const double v1 = variance_unweighted(d.source, d.fit, s, V, 0);
  double mphi2 = 0.0, mphil = 0.0;
  const int n = d.source.size();
  for (int i = 0; i < n; ++i) {
    const double r = std::exp(d.fit.beta_hat.dot(d.source.covariates().row(i).transpose()));
    const double e = std::exp(-V * r);
    mphi2 += (e - s.survival[0]) * (e - s.survival[0]) / n;
    mphil += -r * e / n;
  }
  EXPECT_NEAR(v1, mphi2 / (mphil * mphil), 1e-10 * v1);
}

TEST(Variance, WeightedAtZeroGammaNotAboveUnweighted) {
  Dataset d = a1c1(12);
  std::vector<ConstraintItem> items{ConstraintItem::raw(0), ConstraintItem::raw(1)};
  TargetSummary s = summarize_target(d.target, {20.0, 40.0, 60.0}, items);
  Eigen::MatrixXd H = evaluate_constraints(d.source.covariates(), items);
  s.constraints->targets = H.colwise().mean().transpose();
  s.constraints->target_variances.setZero();
  s.constraints->target_covariance.reset();
  RecalResult w = recalibrate(d.source, d.fit, s, Method::Weighted);
  RecalResult u = recalibrate(d.source, d.fit, s, Method::Unweighted);
  EXPECT_LT(w.gamma_hat->cwiseAbs().maxCoeff(), 1e-12);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(w.lambda0[k], u.lambda0[k], 1e-10);
    const double s1 = variance_unweighted(d.source, d.fit, s, u.lambda0[k], k);
    const double s3 = variance_weighted(d.source, d.fit, s, w.lambda0[k], *w.gamma_hat, k);
    EXPECT_LE(s3, s1 * (1.0 + 1e-9));
  }
}

TEST(InfluenceCovariance, SingleTimeMatchesScalarVariance) {
  Dataset d = a1c1(13);
  std::vector<ConstraintItem> items{ConstraintItem::raw(0), ConstraintItem::raw(1)};
  TargetSummary s = summarize_target(d.target, {40.0}, items);
  for (bool diag : {false, true}) {
    RecalOptions o;
    o.diag_approx = diag;
    RecalResult w = recalibrate(d.source, d.fit, s, Method::Weighted, o);
    const double s3 =
        variance_weighted(d.source, d.fit, s, w.lambda0[0], *w.gamma_hat, 0, diag);
    EXPECT_NEAR(w.cov_lambda(0, 0), s3 / d.source.size(), 1e-10 * w.cov_lambda(0, 0));
    RecalResult u = recalibrate(d.source, d.fit, s, Method::Unweighted, o);
    EXPECT_NEAR(u.cov_lambda(0, 0),
                variance_unweighted(d.source, d.fit, s, u.lambda0[0], 0) / d.source.size(),
                1e-10 * u.cov_lambda(0, 0));
  }
}

TEST(InfluenceCovariance, PositiveSemidefiniteWithoutExternalNoise) {
  Dataset d = a1c1(14, 1000, 3000);
  std::vector<ConstraintItem> items{ConstraintItem::raw(0), ConstraintItem::raw(1)};
  TargetSummary s = summarize_target(d.target, {10.0, 20.0, 30.0, 40.0, 50.0}, items);
  s.survival_variance.setZero();
  s.survival_covariance = Eigen::MatrixXd::Zero(5, 5);
  s.constraints->target_variances.setZero();
  s.constraints->target_covariance = Eigen::MatrixXd::Zero(2, 2);
  RecalResult w = recalibrate(d.source, d.fit, s, Method::Weighted);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w.cov_lambda);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
  EXPECT_GT(w.cov_lambda.diagonal().minCoeff(), 0.0);
}

TEST(Recalibrate, SurvivalOneGivesZero) {
  Dataset d = a1c1(15, 500, 1000);
  TargetSummary s;
  s.times = {10.0, 20.0};
  s.survival = Eigen::Vector2d(1.0, 1.0);
  s.survival_variance = Eigen::Vector2d::Zero();
  RecalResult u = recalibrate(d.source, d.fit, s, Method::Unweighted);
  EXPECT_EQ(u.lambda0, Eigen::VectorXd::Zero(2));
  EXPECT_TRUE(u.se.allFinite());
  EXPECT_EQ(u.ci_lower, Eigen::VectorXd::Zero(2));
}

TEST(Recalibrate, ZeroSurvivalIsAnError) {
  Dataset d = a1c1(16, 300, 300);
  TargetSummary s;
  s.times = {10.0};
  s.survival = Eigen::VectorXd::Zero(1);
  s.survival_variance = Eigen::VectorXd::Zero(1);
  EXPECT_THROW(recalibrate(d.source, d.fit, s, Method::Unweighted), InputError);
}

TEST(Recalibrate, WeightedWithoutConstraintsIsInfeasible) {
  Dataset d = a1c1(17, 300, 300);
  TargetSummary s = summarize_target(d.target, {20.0}, {});
  EXPECT_THROW(recalibrate(d.source, d.fit, s, Method::Weighted), InfeasibleConstraint);
}

TEST(Recalibrate, InfeasibleTargetsPropagate) {
  Dataset d = a1c1(18, 300, 300);
  TargetSummary s = summarize_target(d.target, {20.0}, {ConstraintItem::raw(0)});
  s.constraints->targets[0] = 1.5;  // Z1 is binary
  try {
    recalibrate(d.source, d.fit, s, Method::Weighted);
    FAIL() << "expected InfeasibleConstraint";
  } catch (const InfeasibleConstraint& e) {
    EXPECT_DOUBLE_EQ(e.direction()[0], -1.0);
  }
}

TEST(Recalibrate, CiLevelUsesNormalQuantile) {
  EXPECT_NEAR(normal_quantile_two_sided(0.90), 1.6448536269514722, 1e-12);
  EXPECT_NEAR(normal_quantile_two_sided(0.95), 1.959963984540054, 1e-12);
  Dataset d = a1c1(19, 1000, 5000);
  TargetSummary s = summarize_target(d.target, {20.0, 40.0}, {});
  RecalOptions o;
  o.ci_level = 0.9;
  RecalResult u = recalibrate(d.source, d.fit, s, Method::Unweighted, o);
  for (int k = 0; k < 2; ++k)
    EXPECT_NEAR((u.ci_upper[k] - u.lambda0[k]) / u.se[k], 1.6448536269514722, 1e-9);
}

TEST(Recalibrate, IsotonicIsPresentationOnly) {
  Eigen::VectorXd y(5);
  y << 1, 3, 2, 2, 5;
  Eigen::VectorXd r = isotonic_increasing(y);
  Eigen::VectorXd expect(5);
  expect << 1, 7.0 / 3, 7.0 / 3, 7.0 / 3, 5;
  EXPECT_LT((r - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Recalibrate, RootResidualBelowTolerance) {
  Dataset d = a1c1(20, 1000, 5000);
  std::vector<ConstraintItem> items{ConstraintItem::raw(0), ConstraintItem::raw(1)};
  TargetSummary s = summarize_target(d.target, {10.0, 30.0, 50.0}, items);
  RecalResult w = recalibrate(d.source, d.fit, s, Method::Weighted);
  Eigen::VectorXd risk = (d.source.covariates() * d.fit.beta_hat).array().exp().matrix();
  for (int k = 0; k < 3; ++k) {
    const double res = w.weights->dot((-w.lambda0[k] * risk).array().exp().matrix()) - s.survival[k];
    EXPECT_LT(std::abs(res), 1e-12);
  }
}

}  // namespace
}  // namespace recal
