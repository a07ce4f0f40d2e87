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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "recal/errors.hpp"
#include "recal/survival.hpp"

namespace recal {

namespace {

std::vector<double> sorted_copy(const Eigen::VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  return out;
}

// #{x >= u} in a sorted vector.
double count_at_least(const std::vector<double>& sorted, double u) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), u);
  return static_cast<double>(sorted.end() - it);
}

}  // namespace

EventTable event_table(const Cohort& cohort, EventCode which) {
  const int n = cohort.size();
  std::vector<double> ev_times;
  ev_times.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    if (cohort.event(i) == which) ev_times.push_back(cohort.exit()[i]);
  std::sort(ev_times.begin(), ev_times.end());

  const std::vector<double> exits = sorted_copy(cohort.exit());
  const std::vector<double> entries = sorted_copy(cohort.entry());

  EventTable tab;
  for (std::size_t k = 0; k < ev_times.size();) {
    const double u = ev_times[k];
    std::size_t j = k;
    while (j < ev_times.size() && ev_times[j] == u) ++j;
    const double nu = count_at_least(exits, u) - count_at_least(entries, u);
    if (nu <= 0.0) {
      std::ostringstream os;
      os << "risk set is empty at event time " << u;
      throw NumericalError(os.str());
    }
    tab.times.push_back(u);
    tab.events.push_back(static_cast<double>(j - k));
    tab.at_risk.push_back(nu);
    k = j;
  }
  return tab;
}

Eigen::MatrixXd risk_set_size(const Cohort& cohort, double t,
                              const Eigen::VectorXd& beta, int r) {
  const int p = cohort.dim();
  if (beta.size() != p)
    throw InputError("risk_set_size: beta has length " +
                     std::to_string(beta.size()) + ", expected " +
                     std::to_string(p));
  if (r < 0 || r > 2) throw InputError("risk_set_size: r must be 0, 1 or 2");
  const auto& Z = cohort.covariates();
  const int n = cohort.size();
  Eigen::MatrixXd out = r == 0   ? Eigen::MatrixXd::Zero(1, 1)
                        : r == 1 ? Eigen::MatrixXd::Zero(p, 1)
                                 : Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < n; ++i) {
    if (!(cohort.entry()[i] < t && t <= cohort.exit()[i])) continue;
    const double w = std::exp(Z.row(i).dot(beta));
    if (r == 0)
      out(0, 0) += w;
    else if (r == 1)
      out += w * Z.row(i).transpose();
    else
      out += w * Z.row(i).transpose() * Z.row(i);
  }
  return out / static_cast<double>(n);
}

KaplanMeier kaplan_meier(const Cohort& cohort) {
  const EventTable tab = event_table(cohort, EventCode::EventOfInterest);
  const std::size_t K = tab.times.size();
  std::vector<double> s(K), v(K), g(K);
  double surv = 1.0, gw = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double d = tab.events[k], nu = tab.at_risk[k];
    surv *= 1.0 - d / nu;
    // When everyone at risk fails the curve hits 0 and so does its variance.
    if (nu > d) gw += d / (nu * (nu - d));
    s[k] = surv;
    g[k] = gw;
    v[k] = surv > 0.0 ? surv * surv * gw : 0.0;
  }
  KaplanMeier km;
  km.survival = StepFunction(tab.times, std::move(s), 1.0);
  km.variance = StepFunction(tab.times, std::move(v), 0.0);
  km.greenwood = StepFunction(tab.times, std::move(g), 0.0);
  return km;
}

double KaplanMeier::covariance(double t1, double t2) const {
  const double s1 = survival(t1), s2 = survival(t2);
  if (s1 <= 0.0 || s2 <= 0.0) return 0.0;
  return s1 * s2 * greenwood(std::min(t1, t2));
}

Eigen::MatrixXd KaplanMeier::covariance(const std::vector<double>& times) const {
  const Eigen::Index s = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd out(s, s);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b <= a; ++b)
      out(a, b) = out(b, a) = covariance(times[static_cast<std::size_t>(a)],
                                         times[static_cast<std::size_t>(b)]);
  return out;
}

NelsonAalen nelson_aalen(const Cohort& cohort, EventCode which) {
  const EventTable tab = event_table(cohort, which);
  const std::size_t K = tab.times.size();
  std::vector<double> h(K), v(K);
  double cum = 0.0, var = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    cum += tab.events[k] / tab.at_risk[k];
    var += tab.events[k] / (tab.at_risk[k] * tab.at_risk[k]);
    h[k] = cum;
    v[k] = var;
  }
  return NelsonAalen{StepFunction(tab.times, std::move(h), 0.0),
                     StepFunction(tab.times, std::move(v), 0.0)};
}

}  // namespace recal
