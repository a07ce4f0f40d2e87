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
#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "recal/errors.hpp"
#include "recal/serialize.hpp"

namespace recal {
namespace {

std::string error_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_cohort_csv(in, "in.csv");
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  SplitMix64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.normal(0.0, 5.0));
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(CohortCsv, ParsesCommentsCrlfAndBom) {
  std::istringstream in(
      "\xEF\xBB\xBF# produced by hand\r\nentry_age,exit_age,event,a,b\r\n0,2.5,1,1,0.25\r\n"
      "# note\n1,4,2,0,-1\n0,3,0,1,2\n");
  Cohort c = read_cohort_csv(in);
  ASSERT_EQ(c.size(), 3);
  EXPECT_EQ(c.covariate_names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(c.exit()[0], 2.5);
  EXPECT_EQ(c.event(1), EventCode::Competing);
  EXPECT_EQ(c.covariates()(1, 1), -1.0);
  EXPECT_EQ(c.entry()[1], 1.0);
}

TEST(CohortCsv, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("entry_age,exit_age,z\n").find("missing column 'event'"), std::string::npos);
  EXPECT_NE(error_of("exit_age,event,z\n").find("'entry_age'"), std::string::npos);
  const std::string bad_num = error_of("entry_age,exit_age,event,z\n0,1,1,0\n0,x,1,0\n");
  EXPECT_NE(bad_num.find("in.csv:3:"), std::string::npos) << bad_num;
  EXPECT_NE(error_of("entry_age,exit_age,event,z\n0,1,3,0\n").find("in.csv:2:"), std::string::npos);
  EXPECT_NE(error_of("entry_age,exit_age,event,z\n# c\n2,1,1,0\n").find("in.csv:3:"),
            std::string::npos);
  EXPECT_NE(error_of("entry_age,exit_age,event,z\n0,1,1\n").find("in.csv:2:"), std::string::npos);
  EXPECT_NE(error_of("entry_age,exit_age,event,z\n").find("no data"), std::string::npos);
}

TEST(CohortCsv, WriteReadRoundTrip) {
  SplitMix64 rng(2);
  Cohort c = oracle::random_cohort(rng, 30, 3, true);
  std::ostringstream out;
  write_cohort_csv(out, c);
  std::istringstream in(out.str());
  Cohort d = read_cohort_csv(in);
  EXPECT_EQ(c.entry(), d.entry());
  EXPECT_EQ(c.exit(), d.exit());
  EXPECT_EQ(c.events(), d.events());
  EXPECT_EQ(c.covariates(), d.covariates());
}

TEST(CoxFitJson, RoundTripIsExact) {
  SplitMix64 rng(3);
  Cohort c = oracle::random_cohort(rng, 6, 1);
  CoxOptions o;
  o.init_beta = Eigen::VectorXd::Constant(1, 0.3);
  o.max_iter = 0;
  CoxFit f = fit_cox(c, o);
  const std::string a = cox_fit_to_json(f, R"({"cohort":"toy.csv"})");
  CoxFit g = cox_fit_from_json(a);
  EXPECT_EQ(cox_fit_to_json(g, R"({"cohort":"toy.csv"})"), a);
  EXPECT_EQ(f.beta_hat, g.beta_hat);
  EXPECT_EQ(f.sigma_beta, g.sigma_beta);
  EXPECT_EQ(f.breslow_baseline.values(), g.breslow_baseline.values());
  EXPECT_EQ(f.breslow_variance.values(), g.breslow_variance.values());
  EXPECT_EQ(f.log_partial_likelihood, g.log_partial_likelihood);
}

TEST(ConstraintJson, OneBasedIndices) {
  ConstraintSpec s = constraint_spec_from_json(R"({"items":[
      {"type":"raw_moment","j":1},
      {"type":"conditional_moment","j":2,"given":{"k":1,"value":0}},
      {"type":"indicator","given":{"k":2,"value":1}}],
    "targets":[0.5,0.1,0.3],"target_variances":[1e-6,2e-6,3e-6],"m":1000})");
  ASSERT_EQ(s.size(), 3);
  EXPECT_EQ(s.items[0].j, 0);
  EXPECT_EQ(s.items[1].type, ConstraintType::ConditionalMoment);
  EXPECT_EQ(s.items[1].j, 1);
  EXPECT_EQ(s.items[1].k, 0);
  EXPECT_EQ(s.items[2].k, 1);
  EXPECT_EQ(s.items[2].value, 1.0);
  EXPECT_EQ(s.m, 1000);
  ConstraintSpec t = constraint_spec_from_json(constraint_spec_to_json(s));
  EXPECT_EQ(constraint_spec_to_json(t), constraint_spec_to_json(s));
  EXPECT_THROW(constraint_spec_from_json(R"({"items":[{"type":"raw_moment","j":0}]})"), InputError);
  EXPECT_THROW(constraint_spec_from_json(R"({"items":[{"type":"cubic","j":1}]})"), InputError);
  EXPECT_THROW(constraint_spec_from_json("{not json"), InputError);
}

TEST(RecalJson, NanSurvivesAsNull) {
  RecalResult r;
  r.times = {1.0, 2.0};
  r.lambda0 = Eigen::Vector2d(0.1, 0.2);
  r.se = Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(), 0.01);
  r.ci_lower = Eigen::Vector2d(0.0, 0.18);
  r.ci_upper = Eigen::Vector2d(0.3, 0.22);
  r.cov_lambda = Eigen::Matrix2d::Identity();
  r.cov_beta_lambda = Eigen::MatrixXd::Zero(1, 2);
  r.method = Method::Weighted;
  r.gamma_hat = Eigen::VectorXd::Constant(1, -0.25);
  r.warnings = {"note"};
  const std::string text = recal_results_to_json({r});
  EXPECT_NE(text.find("null"), std::string::npos);
  std::vector<RecalResult> back = recal_results_from_json(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_TRUE(std::isnan(back[0].se[0]));
  EXPECT_EQ(back[0].lambda0, r.lambda0);
  EXPECT_EQ(back[0].method, Method::Weighted);
  EXPECT_EQ(*back[0].gamma_hat, *r.gamma_hat);
  EXPECT_EQ(back[0].warnings, r.warnings);
  EXPECT_EQ(recal_results_to_json(back), text);
}

TEST(SummaryJson, RoundTrip) {
  TargetSummary s;
  s.times = {10.0, 20.0};
  s.survival = Eigen::Vector2d(0.9, 0.8);
  s.survival_variance = Eigen::Vector2d(1e-5, 2e-5);
  s.survival_covariance = (Eigen::Matrix2d() << 1e-5, 8e-6, 8e-6, 2e-5).finished();
  s.m = 500;
  ConstraintSpec c;
  c.items = {ConstraintItem::raw(0)};
  c.targets = Eigen::VectorXd::Constant(1, 0.4);
  c.target_variances = Eigen::VectorXd::Constant(1, 0.24 / 500);
  s.constraints = c;
  s.mu_s_covariance = Eigen::MatrixXd::Zero(1, 2);
  const std::string a = target_summary_to_json(s);
  TargetSummary t = target_summary_from_json(a);
  EXPECT_EQ(target_summary_to_json(t), a);
  EXPECT_EQ(*t.survival_covariance, *s.survival_covariance);
  EXPECT_EQ(t.m, 500);
}

}  // namespace
}  // namespace recal
