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

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace recal {

enum class EventCode : int { Censored = 0, EventOfInterest = 1, Competing = 2 };

struct SubjectRecord {
  double entry_age = 0.0;
  double exit_age = 0.0;
  EventCode event = EventCode::Censored;
  Eigen::VectorXd covariates;
};

// Right-continuous step function. Evaluation before the first knot gives
// pre_value.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> knots, std::vector<double> values,
               double pre_value = 0.0);

  double operator()(double t) const;

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  double pre_value() const { return pre_; }
  std::size_t size() const { return knots_.size(); }
  bool empty() const { return knots_.empty(); }
  bool is_nondecreasing() const;
  bool is_nonincreasing() const;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double pre_ = 0.0;
};

// Column-oriented cohort. Validated on construction.
class Cohort {
 public:
  Cohort(Eigen::VectorXd entry, Eigen::VectorXd exit,
         std::vector<EventCode> event, Eigen::MatrixXd covariates,
         std::vector<std::string> covariate_names);

  static Cohort from_records(const std::vector<SubjectRecord>& records,
                             std::vector<std::string> covariate_names);

  int size() const { return static_cast<int>(exit_.size()); }
  int dim() const { return static_cast<int>(z_.cols()); }

  const Eigen::VectorXd& entry() const { return entry_; }
  const Eigen::VectorXd& exit() const { return exit_; }
  const std::vector<EventCode>& events() const { return event_; }
  EventCode event(int i) const { return event_[i]; }
  const Eigen::MatrixXd& covariates() const { return z_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  SubjectRecord record(int i) const;
  int count(EventCode code) const;
  bool has_truncation() const;

  // Rows picked by index, duplicates allowed (bootstrap resampling).
  Cohort subset(const std::vector<int>& rows) const;

 private:
  Eigen::VectorXd entry_;
  Eigen::VectorXd exit_;
  std::vector<EventCode> event_;
  Eigen::MatrixXd z_;
  std::vector<std::string> names_;
};

// Distinct event times of one cause with event counts and delayed-entry
// risk-set sizes n_u = #{L < u <= X}.
struct EventTable {
  std::vector<double> times;
  std::vector<double> events;
  std::vector<double> at_risk;
};

EventTable event_table(const Cohort& cohort,
                       EventCode which = EventCode::EventOfInterest);

// n^{-1} sum_i Y_i(t) Z_i^{(x)r} exp(beta'Z_i) for r in {0,1,2}. Returned as
// 1x1, p x 1 or p x p.
Eigen::MatrixXd risk_set_size(const Cohort& cohort, double t,
                              const Eigen::VectorXd& beta, int r);

struct KaplanMeier {
  StepFunction survival;
  StepFunction variance;
  // Greenwood sums sum_{u<=t} d/(n(n-d)) on the survival knots.
  StepFunction greenwood;

  double covariance(double t1, double t2) const;
  Eigen::MatrixXd covariance(const std::vector<double>& times) const;
};

// Product-limit estimate for the event of interest. Competing events are
// censored at their time.
KaplanMeier kaplan_meier(const Cohort& cohort);

struct NelsonAalen {
  StepFunction cumhaz;
  StepFunction variance;  // sum d/n^2
};

NelsonAalen nelson_aalen(const Cohort& cohort,
                         EventCode which = EventCode::EventOfInterest);

}  // namespace recal
