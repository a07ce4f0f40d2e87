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

#include "recal/el_weights.hpp"
#include "recal/recalib.hpp"
#include "recal/rng.hpp"
#include "recal/survival.hpp"

namespace recal {

// Lambda(t) = kappa * (theta t)^nu.
struct Weibull {
  double theta = 0.01;
  double nu = 2.0;
  double kappa = 1.0;

  double cumhaz(double t) const;
  // Inverse of the cumulative hazard.
  double inverse(double H) const;
};

// Z1 ~ Bernoulli(p_z1); Z2 | Z1 = v ~ Normal(mean_v, sd_v).
struct CovariateDesign {
  double p_z1 = 0.5;
  double mean1 = 0.0, sd1 = 1.0;
  double mean0 = 0.0, sd0 = 1.0;

  // "C1".."C4". The second Normal parameter is read as a standard
  // deviation.
  static CovariateDesign preset(const std::string& name);
  Eigen::Vector2d draw(SplitMix64& rng) const;
  // Population value of a constraint item (closed form).
  double moment(const ConstraintItem& item) const;
};

struct CompetingDesign {
  double kappa_event = 1.0;
  double kappa_competing = 1.0;
  Eigen::VectorXd beta_c = Eigen::VectorXd::Zero(2);
};

struct ConstraintSet {
  std::string label;
  std::vector<ConstraintItem> items;
};

// The four nested sets: {E Z1}, {E Z1, E Z2}, {E Z1, E Z2, E Z2^2} and
// {E Z1, E Z2 I(Z1=1), E Z2^2 I(Z1=1), E Z2 I(Z1=0), E Z2^2 I(Z1=0)}.
std::vector<ConstraintSet> default_constraint_sets();

enum class Population { Source, Target };

struct ScenarioConfig {
  std::string baseline_label = "A1";
  std::string covariate_label = "C1";
  Weibull baseline_source{0.01, 2.0, 1.0};
  Weibull baseline_target{0.01, 2.0, 1.0};
  CovariateDesign source_covariates = CovariateDesign::preset("C1");
  CovariateDesign target_covariates = CovariateDesign::preset("C1");
  Eigen::VectorXd beta0 = Eigen::Vector2d(0.6931471805599453, 0.6931471805599453);
  double censor_zeta = -5.0;
  double censor_mean = 40.0;
  double censor_sd = 15.0;
  double censor_min = 1.0;
  double censor_max = 100.0;
  bool round_times = true;
  int n_source = 1000;
  long m_target = 100000;
  std::vector<ConstraintSet> constraint_sets = default_constraint_sets();
  bool include_breslow = true;
  bool include_unweighted = true;
  int cad_horizon = 60;  // 0 disables CAD
  bool diag_approx = true;
  double ci_level = 0.95;
  int replicates = 500;
  std::uint64_t seed = 42;
  int threads = 0;  // 0: RECAL_THREADS or hardware concurrency
  std::optional<CompetingDesign> competing;
};

// Baselines "A1".."A4" for the source, covariates "C1".."C4" for the
// target. The target baseline is always (0.01, 2).
ScenarioConfig scenario_preset(const std::string& baseline,
                               const std::string& covariates);

Cohort generate_cohort(const ScenarioConfig& config, Population which,
                       SplitMix64& rng, long size = -1);

enum class SurvivalSource { KaplanMeier, NelsonAalen };

// Survival at `times` with its (co)variances, and sample moments of the
// constraint rows with var(mu_hat) = sample variance / m. Competing events
// count as censoring. NelsonAalen uses exp(-cumhaz) with delta-method
// variances S^2 var(cumhaz).
TargetSummary summarize_target(const Cohort& cohort, const std::vector<double>& times,
                               const std::vector<ConstraintItem>& items,
                               SurvivalSource source = SurvivalSource::KaplanMeier);

struct MetricsRow {
  std::string estimator;
  double time = 0.0;
  double truth = 0.0;
  double pbias = 0.0;  // percent
  double esd = 0.0;    // NaN when fewer than two replicates
  double ase = 0.0;
  double smse = 0.0;
  double cp = 0.0;     // percent
  double cad = 0.0;    // NaN when disabled
  double mean = 0.0;   // mean estimate
};

struct ScenarioReport {
  std::vector<MetricsRow> rows;
  int replicates_requested = 0;
  int replicates_used = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  double source_censoring = 0.0;  // mean fraction censored in the source
  double target_event_fraction = 0.0;
  double target_competing_fraction = 0.0;
  // Closed-form target moments per constraint set.
  std::vector<std::pair<std::string, Eigen::VectorXd>> target_moments;
};

// Worker count: explicit > RECAL_THREADS > hardware concurrency.
int resolve_threads(int requested);

ScenarioReport run_scenario(const ScenarioConfig& config,
                            const std::vector<double>& eval_times);

struct ContourCell {
  double kappa_event = 1.0;
  double kappa_competing = 1.0;
  Eigen::VectorXd beta_c;
  double p_event = 0.0;  // P(observe event of interest) in the target
  double ratio = 0.0;    // P(observe competing) / P(observe event)
  double corr = 0.0;     // Pearson corr(beta0'Z, T_c) in the target
  double max_pbias = 0.0;
  double min_cp = 0.0;
  int failures = 0;
};

// One scenario per grid cell using the last constraint set of `base`.
std::vector<ContourCell> run_competing_contour(
    const ScenarioConfig& base, const std::vector<double>& kappa_event,
    const std::vector<double>& kappa_competing,
    const std::vector<Eigen::VectorXd>& beta_c,
    const std::vector<double>& eval_times = {20.0, 40.0, 60.0});

// Aalen-Johansen cumulative incidence of `cause` with delayed entry.
StepFunction aalen_johansen(const Cohort& cohort, EventCode cause);

// Synthetic eight-binary-covariate cohort pair modelled on a large
// colorectal cancer application: a US source and an English target, with
// left truncation, censoring and competing death.
struct RealLikeConfig {
  std::vector<std::string> names;
  Eigen::VectorXd source_prevalence;
  Eigen::VectorXd target_prevalence;
  // Covariates in exclusive_pair are levels of one categorical variable.
  std::pair<int, int> exclusive_pair{2, 3};
  Eigen::VectorXd beta;
  Eigen::VectorXd beta_death;
  Weibull source_baseline;
  Weibull target_baseline;
  Weibull source_death;
  Weibull target_death;
  double source_entry_max = 29.0;
  double target_entry_max = 19.0;
  double source_followup_min = 1.0, source_followup_max = 12.4;
  double target_followup_min = 1.0, target_followup_max = 10.4;
  int n_source = 76733;
  long m_target = 175248;
  std::vector<ConstraintItem> constraints;  // prevalences used for weighting
  std::vector<double> times;                // recalibration grid
  Eigen::VectorXd profile;                  // covariates for the risk
  double t0 = 0.0;
  double t1 = 10.0;
  int replicates = 300;
  std::uint64_t seed = 2024;
  int threads = 0;
};

RealLikeConfig real_like_preset();

Cohort generate_real_like(const RealLikeConfig& config, Population which,
                          SplitMix64& rng);

struct RealLikeReport {
  std::vector<double> risk;     // plug-in risk per replicate
  std::vector<double> risk_se;  // delta-method SE per replicate
  double truth_lambda_t1 = 0.0;
  double mc_sd = 0.0;
  double mean_se = 0.0;
  int failures = 0;
};

RealLikeReport run_real_like(const RealLikeConfig& config);

}  // namespace recal
