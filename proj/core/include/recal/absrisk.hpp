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
#include <vector>

#include <Eigen/Dense>

#include "recal/cox.hpp"
#include "recal/errors.hpp"
#include "recal/recalib.hpp"
#include "recal/survival.hpp"

namespace recal {

// Inputs for the risk of the event of interest in (t0, t1] given event-free
// survival to t0. The sum runs over nodes g_0 = t0 < g_1 < ... < g_L where
// g_1..g_L are the grid points (jump times of lambda0 inside (t0, t1]).
//
// The covariance blocks are indexed by the grid points. They may either
// cover g_1..g_L (L entries; Lambda0(t0) and Lambda_c(t0) are then treated
// as fixed) or g_0..g_L (L + 1 entries, t0 first).
struct AbsoluteRiskInput {
  double t0 = 0.0;
  double t1 = 0.0;
  Eigen::VectorXd z;
  Eigen::VectorXd beta;
  Eigen::MatrixXd sigma_beta;
  StepFunction lambda0;
  StepFunction lambda_c;
  std::vector<double> grid;  // empty: jump times of lambda0 in (t0, t1]
  Eigen::MatrixXd cov_lambda;
  Eigen::MatrixXd cov_beta_lambda;
  std::optional<Eigen::VectorXd> var_lambda_c;
};

enum class GradientMode { FiniteDifference, Analytic };

// The grid actually used: explicit grid if given, else jump times of
// lambda0 inside (t0, t1].
std::vector<double> risk_grid(const AbsoluteRiskInput& input);

double absolute_risk(const AbsoluteRiskInput& input, Warnings* warnings = nullptr);

// Gradient of the risk with respect to Xi = (beta, Lambda0(g_0..g_L),
// Lambda_c(g_0..g_L)).
Eigen::VectorXd absolute_risk_gradient(const AbsoluteRiskInput& input,
                                       GradientMode mode);

double absolute_risk_variance(const AbsoluteRiskInput& input,
                              GradientMode mode = GradientMode::FiniteDifference);

// Assemble an input from a recalibrated baseline. When annual is set the
// estimates are linearly interpolated onto the integer grid in (t0, t1]
// (covariances transformed accordingly); otherwise the recalibration
// times inside (t0, t1] are the grid. t0 itself must be 0 or one of the
// recalibration times.
struct CompetingHazard {
  StepFunction cumhaz;
  std::optional<StepFunction> variance;
  // Optional covariate-specific extension: Lambda_c(t|z) =
  // cumhaz(t) exp(beta_c'z).
  std::optional<Eigen::VectorXd> beta_c;
};

AbsoluteRiskInput make_risk_input(const CoxFit& fit, const RecalResult& recal,
                                  const CompetingHazard& competing,
                                  const Eigen::VectorXd& z, double t0, double t1,
                                  bool annual = false);

}  // namespace recal
