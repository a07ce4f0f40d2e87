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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "recal/errors.hpp"
#include "recal/survival.hpp"

namespace recal {
namespace {

Cohort make(std::vector<double> L, std::vector<double> X, std::vector<int> ev,
            std::vector<double> z) {
  const int n = static_cast<int>(X.size());
  std::vector<EventCode> e;
  for (int v : ev) e.push_back(static_cast<EventCode>(v));
  Eigen::MatrixXd Z(n, 1);
  for (int i = 0; i < n; ++i) Z(i, 0) = z[i];
  return Cohort(Eigen::Map<Eigen::VectorXd>(L.data(), n), Eigen::Map<Eigen::VectorXd>(X.data(), n),
                e, Z, {"z"});
}

// events at 1 and 2, censored at 1.5 and 3
Cohort four_subjects() { return make({0, 0, 0, 0}, {1, 1.5, 2, 3}, {1, 0, 1, 0}, {0, 0, 0, 0}); }

TEST(RiskSetSize, SingleSubject) {
  Cohort c = make({0}, {5}, {1}, {0});
  Eigen::VectorXd b = Eigen::VectorXd::Zero(1);
  EXPECT_DOUBLE_EQ(risk_set_size(c, 3.0, b, 0)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(risk_set_size(c, 6.0, b, 0)(0, 0), 0.0);
}

TEST(RiskSetSize, DelayedEntry) {
  Cohort c = make({0, 2, 4}, {5, 5, 5}, {1, 0, 0}, {1, 0, 1});
  Eigen::VectorXd b = Eigen::VectorXd::Constant(1, std::log(2.0));
  EXPECT_NEAR(risk_set_size(c, 3.0, b, 0)(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(risk_set_size(c, 3.0, b, 1)(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(risk_set_size(c, 3.0, b, 2)(0, 0), 2.0 / 3.0, 1e-15);
}

TEST(RiskSetSize, DimensionMismatchThrows) {
  Cohort c = make({0}, {5}, {1}, {0});
  EXPECT_THROW(risk_set_size(c, 1.0, Eigen::VectorXd::Zero(2), 0), InputError);
}

TEST(RiskSetSize, NonincreasingWithoutTruncation) {
  SplitMix64 rng(3);
  Cohort c = oracle::random_cohort(rng, 60, 2);
  Eigen::VectorXd b(2);
  b << 0.3, -0.2;
  double prev = risk_set_size(c, 1e-12, b, 0)(0, 0);
  for (double t = 0.5; t < 60; t += 0.5) {
    const double h = risk_set_size(c, t, b, 0)(0, 0);
    EXPECT_LE(h, prev);
    prev = h;
  }
}

TEST(KaplanMeier, NoEvents) {
  Cohort c = make({0, 0, 0, 0, 0}, {1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0});
  KaplanMeier km = kaplan_meier(c);
  for (double t : {0.5, 1.0, 3.0, 10.0}) {
    EXPECT_EQ(km.survival(t), 1.0);
    EXPECT_EQ(km.variance(t), 0.0);
  }
}

TEST(KaplanMeier, HandExample) {
  KaplanMeier km = kaplan_meier(four_subjects());
  EXPECT_DOUBLE_EQ(km.survival(0.99), 1.0);
  EXPECT_DOUBLE_EQ(km.survival(1.0), 0.75);
  EXPECT_DOUBLE_EQ(km.survival(1.7), 0.75);
  EXPECT_DOUBLE_EQ(km.survival(2.0), 0.375);
  EXPECT_DOUBLE_EQ(km.survival(100.0), 0.375);
  EXPECT_NEAR(km.variance(1.0), 0.046875, 1e-15);
  EXPECT_DOUBLE_EQ(km.covariance(1.0, 1.0), km.variance(1.0));
  EXPECT_DOUBLE_EQ(km.covariance(2.0, 2.0), km.variance(2.0));
  // cross term uses the sum up to min(t1, t2)
  EXPECT_NEAR(km.covariance(1.0, 2.0), 0.75 * 0.375 / 12.0, 1e-15);
}

TEST(KaplanMeier, CompetingEventsAreCensored) {
  Cohort a = make({0, 0, 0, 0}, {1, 1.5, 2, 3}, {1, 2, 1, 0}, {0, 0, 0, 0});
  KaplanMeier km = kaplan_meier(a);
  EXPECT_DOUBLE_EQ(km.survival(2.0), 0.375);
}

TEST(KaplanMeier, MatchesBruteForceWithTruncationAndTies) {
  SplitMix64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Cohort c = oracle::random_cohort(rng, 40, 1, true, true);
    KaplanMeier km = kaplan_meier(c);
    for (double t : {1.0, 3.0, 5.5, 9.0, 20.0}) {
      oracle::KMValue v = oracle::kaplan_meier_at(c, t);
      EXPECT_NEAR(km.survival(t), v.survival, 1e-13);
      EXPECT_NEAR(km.greenwood(t), v.greenwood, 1e-12);
      EXPECT_NEAR(km.variance(t), v.survival * v.survival * v.greenwood, 1e-12);
    }
  }
}

TEST(KaplanMeier, PermutationInvariant) {
  SplitMix64 rng(5);
  Cohort c = oracle::random_cohort(rng, 50, 2, true);
  std::vector<int> idx(50);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 49; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
  Cohort p = c.subset(idx);
  KaplanMeier a = kaplan_meier(c), b = kaplan_meier(p);
  EXPECT_EQ(a.survival.knots(), b.survival.knots());
  EXPECT_EQ(a.survival.values(), b.survival.values());
  EXPECT_EQ(a.variance.values(), b.variance.values());
}

TEST(KaplanMeier, CovarianceMatrixConsistent) {
  SplitMix64 rng(8);
  Cohort c = oracle::random_cohort(rng, 80, 1);
  KaplanMeier km = kaplan_meier(c);
  std::vector<double> ts{2.0, 5.0, 9.0};
  Eigen::MatrixXd S = km.covariance(ts);
  for (int a = 0; a < 3; ++a) {
    EXPECT_DOUBLE_EQ(S(a, a), km.variance(ts[a]));
    for (int b = 0; b < 3; ++b) EXPECT_DOUBLE_EQ(S(a, b), km.covariance(ts[a], ts[b]));
  }
}

TEST(NelsonAalen, Examples) {
  Cohort none = make({0, 0}, {1, 2}, {0, 0}, {0, 0});
  EXPECT_EQ(nelson_aalen(none).cumhaz(5.0), 0.0);
  Cohort one = make({0, 0, 0, 0}, {1, 2, 3, 4}, {1, 0, 0, 0}, {0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(nelson_aalen(one).cumhaz(1.0), 0.25);
  EXPECT_DOUBLE_EQ(nelson_aalen(four_subjects()).cumhaz(2.0), 0.75);
}

TEST(NelsonAalen, CompetingCause) {
  Cohort c = make({0, 0, 0, 0}, {1, 2, 3, 4}, {2, 1, 2, 0}, {0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(nelson_aalen(c, EventCode::Competing).cumhaz(3.0), 0.25 + 0.5);
  EXPECT_DOUBLE_EQ(nelson_aalen(c).cumhaz(3.0), 1.0 / 3.0);
}

TEST(NelsonAalen, DominatesKaplanMeierToFirstOrder) {
  SplitMix64 rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    Cohort c = oracle::random_cohort(rng, 25, 1);
    KaplanMeier km = kaplan_meier(c);
    NelsonAalen na = nelson_aalen(c);
    EventTable tab = event_table(c);
    for (double t = 0.25; t < 80; t += 0.25) {
      double bound = 0.0;
      for (std::size_t k = 0; k < tab.times.size() && tab.times[k] <= t; ++k)
        bound += tab.events[k] / (tab.at_risk[k] * tab.at_risk[k]);
      const double e = std::exp(-na.cumhaz(t));
      EXPECT_GE(e + 1e-15, km.survival(t));
      EXPECT_LE(std::abs(e - km.survival(t)), bound + 1e-15);
      EXPECT_NEAR(na.cumhaz(t), oracle::nelson_aalen_at(c, t), 1e-13);
    }
  }
}

TEST(StepFunction, RightContinuous) {
  StepFunction f({1.0, 2.0}, {0.5, 0.8}, 0.1);
  EXPECT_EQ(f(0.5), 0.1);
  EXPECT_EQ(f(1.0), 0.5);
  EXPECT_EQ(f(1.999), 0.5);
  EXPECT_EQ(f(2.0), 0.8);
  EXPECT_EQ(f(50.0), 0.8);
  EXPECT_THROW(StepFunction({2.0, 1.0}, {0.0, 0.0}), InputError);
}

TEST(Cohort, Validation) {
  EXPECT_THROW(make({0}, {0}, {1}, {0}), InputError);
  EXPECT_THROW(make({1}, {0.5}, {1}, {0}), InputError);
}

}  // namespace
}  // namespace recal
