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

#include "recal/survival.hpp"

namespace recal {

struct CoxOptions {
  std::optional<Eigen::VectorXd> init_beta;
  double tol = 1e-8;       // on max |U|
  int max_iter = 50;       // 0 = evaluate at init_beta only
  double max_condition = 1e12;
};

struct CoxFit {
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd sigma_beta;  // I(beta_hat)^{-1}
  StepFunction breslow_baseline;
  // Pointwise model-based variance of the Breslow estimate, including the
  // contribution of beta_hat.
  StepFunction breslow_variance;
  double log_partial_likelihood = 0.0;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> covariate_names;
};

struct ScoreInformation {
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
  double log_partial_likelihood = 0.0;
};

// Breslow-tie score, observed information and log partial likelihood.
ScoreInformation score_and_information(const Cohort& cohort,
                                       const Eigen::VectorXd& beta);

double log_partial_likelihood(const Cohort& cohort,
                              const Eigen::VectorXd& beta);

CoxFit fit_cox(const Cohort& cohort, const CoxOptions& options = {});

}  // namespace recal
