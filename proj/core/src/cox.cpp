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
#include <limits>
#include <numeric>
#include <sstream>

#include "recal/cox.hpp"
#include "recal/errors.hpp"

namespace recal {

namespace {

// Per event-time sums over the delayed-entry risk set, computed on centered
// covariates with exp(eta - eta_max) weights.
struct Sweep {
  std::vector<double> times;
  std::vector<double> d;
  std::vector<double> s0;
  std::vector<Eigen::VectorXd> s1;
  std::vector<Eigen::MatrixXd> s2;
  std::vector<Eigen::VectorXd> zsum;  // sum of centered Z over events at u
  std::vector<double> etasum;         // sum of eta over events at u
  double shift = 0.0;
};

class CoxEngine {
 public:
  explicit CoxEngine(const Cohort& c) : cohort_(c) {
    const int n = c.size();
    mean_ = c.covariates().colwise().mean().transpose();
    zc_ = c.covariates().rowwise() - mean_.transpose();
    by_exit_.resize(static_cast<std::size_t>(n));
    std::iota(by_exit_.begin(), by_exit_.end(), 0);
    by_entry_ = by_exit_;
    const auto& X = c.exit();
    const auto& L = c.entry();
    std::sort(by_exit_.begin(), by_exit_.end(),
              [&](int a, int b) { return X[a] > X[b]; });
    std::sort(by_entry_.begin(), by_entry_.end(),
              [&](int a, int b) { return L[a] > L[b]; });
    for (int i = 0; i < n; ++i)
      if (c.event(i) == EventCode::EventOfInterest) ev_.push_back(i);
    std::sort(ev_.begin(), ev_.end(), [&](int a, int b) { return X[a] > X[b]; });
  }

  const Eigen::VectorXd& mean() const { return mean_; }
  bool has_events() const { return !ev_.empty(); }

  Sweep sweep(const Eigen::VectorXd& beta, bool need_s2) const {
    const int p = cohort_.dim();
    const auto& X = cohort_.exit();
    const auto& L = cohort_.entry();
    Eigen::VectorXd eta = zc_ * beta;
    Sweep sw;
    sw.shift = eta.size() ? eta.maxCoeff() : 0.0;
    Eigen::VectorXd w = (eta.array() - sw.shift).exp();

    double a0 = 0.0, r0 = 0.0;
    Eigen::VectorXd a1 = Eigen::VectorXd::Zero(p), r1 = a1;
    Eigen::MatrixXd a2, r2;
    if (need_s2) {
      a2 = Eigen::MatrixXd::Zero(p, p);
      r2 = a2;
    }
    std::size_t ix = 0, il = 0;
    const std::size_t n = by_exit_.size();
    for (std::size_t k = 0; k < ev_.size();) {
      const double u = X[ev_[k]];
      while (ix < n && X[by_exit_[ix]] >= u) {
        int i = by_exit_[ix++];
        a0 += w[i];
        a1.noalias() += w[i] * zc_.row(i).transpose();
        if (need_s2) a2.noalias() += w[i] * zc_.row(i).transpose() * zc_.row(i);
      }
      while (il < n && L[by_entry_[il]] >= u) {
        int i = by_entry_[il++];
        r0 += w[i];
        r1.noalias() += w[i] * zc_.row(i).transpose();
        if (need_s2) r2.noalias() += w[i] * zc_.row(i).transpose() * zc_.row(i);
      }
      double dcount = 0.0, es = 0.0;
      Eigen::VectorXd zs = Eigen::VectorXd::Zero(p);
      while (k < ev_.size() && X[ev_[k]] == u) {
        int i = ev_[k++];
        dcount += 1.0;
        es += eta[i];
        zs += zc_.row(i).transpose();
      }
      const double s0 = a0 - r0;
      if (!(s0 > 0.0)) {
        std::ostringstream os;
        os << "risk set is empty at event time " << u;
        throw NumericalError(os.str());
      }
      sw.times.push_back(u);
      sw.d.push_back(dcount);
      sw.s0.push_back(s0);
      sw.s1.push_back(a1 - r1);
      if (need_s2) sw.s2.push_back(a2 - r2);
      sw.zsum.push_back(std::move(zs));
      sw.etasum.push_back(es);
    }
    return sw;
  }

  ScoreInformation evaluate(const Eigen::VectorXd& beta, bool need_info) const {
    const int p = cohort_.dim();
    Sweep sw = sweep(beta, need_info);
    ScoreInformation out;
    out.score = Eigen::VectorXd::Zero(p);
    out.information = Eigen::MatrixXd::Zero(p, p);
    double ll = 0.0;
    for (std::size_t k = 0; k < sw.times.size(); ++k) {
      const double d = sw.d[k];
      Eigen::VectorXd zbar = sw.s1[k] / sw.s0[k];
      ll += sw.etasum[k] - d * (std::log(sw.s0[k]) + sw.shift);
      out.score += sw.zsum[k] - d * zbar;
      if (need_info)
        out.information += d * (sw.s2[k] / sw.s0[k] - zbar * zbar.transpose());
    }
    out.log_partial_likelihood = ll;
    return out;
  }

 private:
  const Cohort& cohort_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd zc_;
  std::vector<int> by_exit_, by_entry_, ev_;
};

void check_beta(const Cohort& cohort, const Eigen::VectorXd& beta) {
  if (beta.size() != cohort.dim())
    throw InputError("beta has length " + std::to_string(beta.size()) +
                     ", cohort has " + std::to_string(cohort.dim()) +
                     " covariates");
  if (!beta.allFinite()) throw InputError("beta must be finite");
}

Eigen::MatrixXd invert_information(const Eigen::MatrixXd& info,
                                   double max_condition) {
  const Eigen::Index p = info.rows();
  if (p == 0) return Eigen::MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > max_condition) {
    std::ostringstream os;
    os << "information matrix is singular or ill-conditioned (eigenvalues "
       << lo << " .. " << hi << "); check for constant or collinear covariates";
    throw NumericalError(os.str());
  }
  Eigen::MatrixXd inv = es.eigenvectors() *
                        es.eigenvalues().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

ScoreInformation score_and_information(const Cohort& cohort,
                                       const Eigen::VectorXd& beta) {
  check_beta(cohort, beta);
  CoxEngine eng(cohort);
  return eng.evaluate(beta, true);
}

double log_partial_likelihood(const Cohort& cohort,
                              const Eigen::VectorXd& beta) {
  check_beta(cohort, beta);
  CoxEngine eng(cohort);
  return eng.evaluate(beta, false).log_partial_likelihood;
}

CoxFit fit_cox(const Cohort& cohort, const CoxOptions& options) {
  const int p = cohort.dim();
  CoxEngine eng(cohort);
  if (!eng.has_events()) throw InputError("cohort has no events of interest");
  Eigen::VectorXd beta =
      options.init_beta ? *options.init_beta : Eigen::VectorXd::Zero(p);
  check_beta(cohort, beta);

  CoxFit fit;
  fit.covariate_names = cohort.covariate_names();
  ScoreInformation cur = eng.evaluate(beta, true);
  fit.loglik_trace.push_back(cur.log_partial_likelihood);
  int iter = 0;
  bool converged = cur.score.cwiseAbs().maxCoeff() < options.tol;
  while (!converged && iter < options.max_iter) {
    Eigen::VectorXd step =
        invert_information(cur.information, options.max_condition) * cur.score;
    // Near the maximum the expected gain (half the Newton decrement) drops
    // below the rounding error of a large log partial likelihood, so the
    // monotone test is skipped there.
    const bool pure_newton = cur.score.dot(step) < 1e-6;
    ScoreInformation next;
    double scale = 1.0;
    for (int h = 0; h < 40; ++h) {
      next = eng.evaluate(beta + scale * step, true);
      if (std::isfinite(next.log_partial_likelihood) &&
          (pure_newton ||
           next.log_partial_likelihood >= cur.log_partial_likelihood - 1e-12))
        break;
      scale *= 0.5;
    }
    beta += scale * step;
    cur = std::move(next);
    ++iter;
    fit.loglik_trace.push_back(cur.log_partial_likelihood);
    converged = cur.score.cwiseAbs().maxCoeff() < options.tol;
  }
  if (!converged && options.max_iter > 0) {
    std::ostringstream os;
    os << "Cox fit did not converge in " << options.max_iter
       << " iterations (max |U| = " << cur.score.cwiseAbs().maxCoeff() << ")";
    throw ConvergenceError(os.str(), beta);
  }

  fit.beta_hat = beta;
  fit.iterations = iter;
  fit.converged = converged;
  fit.log_partial_likelihood = cur.log_partial_likelihood;
  fit.sigma_beta = invert_information(cur.information, options.max_condition);

  // Breslow baseline on the original covariate scale.
  Sweep sw = eng.sweep(beta, false);
  const double offset = sw.shift + beta.dot(eng.mean());
  const std::size_t K = sw.times.size();
  // The sweep runs backwards in time; accumulate forwards.
  std::vector<double> times(K), cum(K), var(K);
  double lam = 0.0, v0 = 0.0;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(p);
  for (std::size_t out = 0; out < K; ++out) {
    const std::size_t k = K - 1 - out;
    const double s0 = sw.s0[k] * std::exp(offset);
    const double jump = sw.d[k] / s0;
    Eigen::VectorXd zbar = sw.s1[k] / sw.s0[k] + eng.mean();
    lam += jump;
    v0 += sw.d[k] / (s0 * s0);
    q += zbar * jump;
    times[out] = sw.times[k];
    cum[out] = lam;
    var[out] = v0 + q.dot(fit.sigma_beta * q);
  }
  fit.breslow_baseline = StepFunction(times, std::move(cum), 0.0);
  fit.breslow_variance = StepFunction(std::move(times), std::move(var), 0.0);
  return fit;
}

}  // namespace recal
