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

#include <cmath>
#include <string>

#include "recal/errors.hpp"
#include "recal/survival.hpp"

namespace recal {

Cohort::Cohort(Eigen::VectorXd entry, Eigen::VectorXd exit,
               std::vector<EventCode> event, Eigen::MatrixXd covariates,
               std::vector<std::string> covariate_names)
    : entry_(std::move(entry)),
      exit_(std::move(exit)),
      event_(std::move(event)),
      z_(std::move(covariates)),
      names_(std::move(covariate_names)) {
  const Eigen::Index n = exit_.size();
  if (n < 1) throw InputError("cohort is empty");
  if (entry_.size() != n || static_cast<Eigen::Index>(event_.size()) != n ||
      z_.rows() != n)
    throw InputError("cohort columns have different lengths");
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < z_.cols(); ++j)
      names_.push_back("z" + std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(names_.size()) != z_.cols())
    throw InputError("covariate_names length does not match covariates");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(entry_[i]) || !std::isfinite(exit_[i]) ||
        entry_[i] < 0.0 || !(exit_[i] > entry_[i]))
      throw InputError("subject " + std::to_string(i + 1) +
                       ": need exit_age > entry_age >= 0");
    int code = static_cast<int>(event_[i]);
    if (code < 0 || code > 2)
      throw InputError("subject " + std::to_string(i + 1) +
                       ": event code must be 0, 1 or 2");
  }
  if (!z_.allFinite()) throw InputError("covariates must be finite");
}

Cohort Cohort::from_records(const std::vector<SubjectRecord>& records,
                            std::vector<std::string> covariate_names) {
  const Eigen::Index n = static_cast<Eigen::Index>(records.size());
  if (n < 1) throw InputError("cohort is empty");
  const Eigen::Index p = records.front().covariates.size();
  Eigen::VectorXd entry(n), exit(n);
  Eigen::MatrixXd z(n, p);
  std::vector<EventCode> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.covariates.size() != p)
      throw InputError("subject " + std::to_string(i + 1) +
                       ": covariate dimension mismatch");
    entry[i] = r.entry_age;
    exit[i] = r.exit_age;
    ev[static_cast<std::size_t>(i)] = r.event;
    z.row(i) = r.covariates.transpose();
  }
  return Cohort(std::move(entry), std::move(exit), std::move(ev), std::move(z),
                std::move(covariate_names));
}

SubjectRecord Cohort::record(int i) const {
  return SubjectRecord{entry_[i], exit_[i], event_[static_cast<std::size_t>(i)],
                       z_.row(i).transpose()};
}

int Cohort::count(EventCode code) const {
  int c = 0;
  for (auto e : event_) c += (e == code);
  return c;
}

bool Cohort::has_truncation() const { return (entry_.array() > 0.0).any(); }

Cohort Cohort::subset(const std::vector<int>& rows) const {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd entry(n), exit(n);
  Eigen::MatrixXd z(n, z_.cols());
  std::vector<EventCode> ev(rows.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    int i = rows[static_cast<std::size_t>(k)];
    if (i < 0 || i >= size()) throw InputError("subset: row out of range");
    entry[k] = entry_[i];
    exit[k] = exit_[i];
    ev[static_cast<std::size_t>(k)] = event_[static_cast<std::size_t>(i)];
    z.row(k) = z_.row(i);
  }
  return Cohort(std::move(entry), std::move(exit), std::move(ev), std::move(z),
                names_);
}

}  // namespace recal
