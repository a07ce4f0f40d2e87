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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "recal/errors.hpp"
#include "recal/survival.hpp"

namespace recal {

enum class ConstraintType {
  RawMoment,                // Z_j
  SecondMoment,             // Z_j^2
  ConditionalMoment,        // Z_j * I(Z_k == v)
  ConditionalSecondMoment,  // Z_j^2 * I(Z_k == v)
  Indicator                 // I(Z_k == v)
};

// Covariate indices are 0-based here. The JSON form uses 1-based j/k.
struct ConstraintItem {
  ConstraintType type = ConstraintType::RawMoment;
  int j = -1;
  int k = -1;
  double value = 0.0;

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  std::string label(const std::vector<std::string>& names) const;

  static ConstraintItem raw(int j) { return {ConstraintType::RawMoment, j}; }
  static ConstraintItem second(int j) {
    return {ConstraintType::SecondMoment, j};
  }
  static ConstraintItem conditional(int j, int k, double v) {
    return {ConstraintType::ConditionalMoment, j, k, v};
  }
  static ConstraintItem conditional_second(int j, int k, double v) {
    return {ConstraintType::ConditionalSecondMoment, j, k, v};
  }
  static ConstraintItem indicator(int k, double v) {
    return {ConstraintType::Indicator, -1, k, v};
  }
};

struct ConstraintSpec {
  std::vector<ConstraintItem> items;
  Eigen::VectorXd targets;
  Eigen::VectorXd target_variances;  // var(mu_hat), zeros when known exactly
  std::optional<Eigen::MatrixXd> target_covariance;
  long m = 0;

  int size() const { return static_cast<int>(items.size()); }
  // Throws InputError when inconsistent with a p-covariate cohort.
  void validate(int p, bool require_targets = true) const;
  // Covariance of mu_hat; diagonal only when diag_approx is set or no full
  // matrix is available.
  Eigen::MatrixXd mu_covariance(bool diag_approx) const;
};

Eigen::MatrixXd evaluate_constraints(const Eigen::MatrixXd& Z,
                                     const std::vector<ConstraintItem>& items);
Eigen::MatrixXd evaluate_constraints(const Cohort& cohort,
                                     const ConstraintSpec& spec);

struct ELOptions {
  double tol = 1e-10;  // max |mean_i g_i / D_i|
  int max_iter = 100;
  double min_denominator = 1e-10;
  bool strict_feasibility = false;
};

struct ELWeights {
  Eigen::VectorXd gamma_hat;
  Eigen::VectorXd weights;
  double dual_value = 0.0;  // mean_i log D_i
  bool converged = false;
  int iterations = 0;
  Warnings warnings;
};

ELWeights solve_el_dual(const Eigen::MatrixXd& H, const Eigen::VectorXd& targets,
                        const ELOptions& options = {});

struct Feasibility {
  bool feasible = true;
  // When infeasible: d with d'(h_i - mu) >= 0 for every row.
  Eigen::VectorXd direction;
  std::string reason;
};

// Probe test on coordinate axes, random unit vectors and the null space of
// the centered rows. strict adds an exact LP check.
Feasibility check_feasibility(const Eigen::MatrixXd& H,
                              const Eigen::VectorXd& targets,
                              bool strict = false, int random_probes = 64,
                              std::uint64_t seed = 0x5eedULL);

}  // namespace recal
