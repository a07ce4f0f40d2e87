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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "recal/cox.hpp"
#include "recal/el_weights.hpp"
#include "recal/errors.hpp"
#include "recal/survival.hpp"

namespace recal {

// Target-population summary statistics.
struct TargetSummary {
  std::vector<double> times;
  Eigen::VectorXd survival;
  Eigen::VectorXd survival_variance;
  // Full covariance of S_hat across times. When absent it is rebuilt from
  // the marginal variances assuming the Greenwood structure
  // cov(S_k, S_l) = S_k S_l min(v_k / S_k^2, v_l / S_l^2).
  std::optional<Eigen::MatrixXd> survival_covariance;
  std::optional<ConstraintSpec> constraints;
  long m = 1;
  std::optional<Eigen::MatrixXd> mu_s_covariance;  // q x s, cov(mu_hat, S_hat)

  int size() const { return static_cast<int>(times.size()); }
  void validate() const;
  Eigen::MatrixXd survival_cov() const;
};

enum class Method { Unweighted, Weighted };

std::string to_string(Method m);

struct RecalOptions {
  double ci_level = 0.95;
  bool diag_approx = false;
  // Pool-adjacent-violators projection of the estimates onto nondecreasing
  // sequences. Presentation only.
  bool isotonic = false;
  double root_tol = 1e-12;
  bool compute_covariance = true;
  ELOptions el;
};

struct RecalResult {
  std::vector<double> times;
  Eigen::VectorXd lambda0;
  Method method = Method::Unweighted;
  std::optional<Eigen::VectorXd> gamma_hat;
  std::optional<Eigen::VectorXd> weights;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  double ci_level = 0.95;
  bool isotonic = false;
  Eigen::MatrixXd cov_lambda;       // s x s
  Eigen::MatrixXd cov_beta_lambda;  // p x s
  Warnings warnings;
};

// exp(-V exp(beta'z)) - S.
double phi(const Eigen::VectorXd& z, double V, const Eigen::VectorXd& beta,
           double S);

// Root of sum_i w_i exp(-V r_i) = S in V >= 0, r_i = exp(beta'Z_i). With no
// weights the plain mean is used.
double solve_equation(const Eigen::VectorXd& risk, const Eigen::VectorXd* weights,
                      double S, double tol = 1e-12);

double solve_unweighted(const Cohort& cohort, const Eigen::VectorXd& beta,
                        double S_t, double tol = 1e-12);
double solve_weighted(const Cohort& cohort, const Eigen::VectorXd& beta,
                      double S_t, const Eigen::VectorXd& weights,
                      double tol = 1e-12);

// Subject-level pieces of the stacked estimating equations, exposed for
// testing. rho1 = Phi / D with D = 1 + gamma'(h - mu).
struct Rho1Derivatives {
  double rho1 = 0.0;
  double d_lambda = 0.0;
  double d_S = 0.0;
  Eigen::VectorXd d_beta;
  Eigen::VectorXd d_gamma;
  Eigen::VectorXd d_mu;
};

Rho1Derivatives rho1_derivatives(const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& h, double V,
                                 const Eigen::VectorXd& beta, double S,
                                 const Eigen::VectorXd& gamma,
                                 const Eigen::VectorXd& mu);

// Q = (h - mu) / D and its Jacobians dQ/dgamma', dQ/dmu'.
struct QDerivatives {
  Eigen::VectorXd q;
  Eigen::MatrixXd d_gamma;
  Eigen::MatrixXd d_mu;
};

QDerivatives q_derivatives(const Eigen::VectorXd& h, const Eigen::VectorXd& gamma,
                           const Eigen::VectorXd& mu);

// n times the asymptotic variance of the unweighted estimate at
// summary.times[t_index]; the standard error is sqrt(value / n).
double variance_unweighted(const Cohort& cohort, const CoxFit& fit,
                           const TargetSummary& summary, double lambda_hat,
                           int t_index);

double variance_weighted(const Cohort& cohort, const CoxFit& fit,
                         const TargetSummary& summary, double lambda_hat,
                         const Eigen::VectorXd& gamma_hat, int t_index,
                         bool diag_approx = false);

struct InfluenceCovariance {
  Eigen::MatrixXd cov_lambda;
  Eigen::MatrixXd cov_beta_lambda;
};

// Joint covariance of the estimates across all summary times (already on
// the scale of var(Lambda_hat), i.e. divided by n).
InfluenceCovariance influence_covariance(const Cohort& cohort, const CoxFit& fit,
                                         const TargetSummary& summary,
                                         const RecalResult& recal,
                                         bool diag_approx = false);

RecalResult recalibrate(const Cohort& cohort, const CoxFit& fit,
                        const TargetSummary& summary, Method method,
                        const RecalOptions& options = {});

// Two-sided standard normal quantile z_{1 - (1 - level)/2}.
double normal_quantile_two_sided(double level);

// Pool-adjacent-violators fit of a nondecreasing sequence.
Eigen::VectorXd isotonic_increasing(const Eigen::VectorXd& y);

}  // namespace recal
