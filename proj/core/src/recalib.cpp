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
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "recal/recalib.hpp"

namespace recal {

namespace {

// Plug-in ingredients of the linearization at one time point.
struct TimePieces {
  Eigen::VectorXd psi;     // per-subject internal influence
  double a = 0.0;          // mean d rho1 / d Lambda
  Eigen::VectorXd e_beta;  // mean d rho1 / d beta
  double e_S = 0.0;        // mean d rho1 / d S
  Eigen::VectorXd pi14;    // mu coefficient after the gamma correction
};

TimePieces time_pieces(const Eigen::MatrixXd& Z, const Eigen::VectorXd& risk,
                       const Eigen::MatrixXd& G, const Eigen::VectorXd& D,
                       const Eigen::VectorXd& gamma, double V, double S) {
  const Eigen::Index n = Z.rows(), q = G.cols();
  const double dn = static_cast<double>(n);
  TimePieces tp;
  Eigen::ArrayXd e = (-V * risk.array()).exp();
  Eigen::ArrayXd Phi = e - S;
  Eigen::ArrayXd invD = D.array().inverse();
  Eigen::ArrayXd rho1 = Phi * invD;
  tp.a = -(risk.array() * e * invD).mean();
  Eigen::VectorXd wb = (-V * risk.array() * e * invD).matrix();
  tp.e_beta = Z.transpose() * wb / dn;
  tp.e_S = -invD.mean();
  tp.psi = rho1.matrix();
  tp.pi14 = Eigen::VectorXd::Zero(q);
  if (q == 0) return tp;

  Eigen::ArrayXd invD2 = invD * invD;
  // E rho1_gamma = -mean(Phi g / D^2); A = E Q_gamma = -mean(g g' / D^2).
  Eigen::VectorXd e_rg = -(G.transpose() * (Phi * invD2).matrix()) / dn;
  Eigen::MatrixXd Gw = invD.matrix().asDiagonal() * G;
  Eigen::MatrixXd A = -(Gw.transpose() * Gw) / dn;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(-A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw NumericalError(
        "mean constraint Jacobian is singular; constraints are degenerate");
  Eigen::VectorXd c = -ldlt.solve(e_rg);  // A^{-1} E rho1_gamma
  tp.psi.noalias() -= Gw * c;
  // B = E Q_mu = -mean(1/D) I + mean(g / D^2) gamma'.
  Eigen::MatrixXd B = -invD.mean() * Eigen::MatrixXd::Identity(q, q) +
                      (G.transpose() * invD2.matrix() / dn) * gamma.transpose();
  Eigen::VectorXd e_rm = (Phi * invD2).mean() * gamma;
  tp.pi14 = e_rm - B.transpose() * c;
  return tp;
}

struct Prepared {
  Eigen::VectorXd risk;
  Eigen::MatrixXd G;
  Eigen::VectorXd D;
  Eigen::VectorXd gamma;
  Eigen::MatrixXd mu_cov;   // q x q
  Eigen::MatrixXd mu_s_cov; // q x s
};

Prepared prepare(const Cohort& cohort, const CoxFit& fit,
                 const TargetSummary& summary,
                 const std::optional<Eigen::VectorXd>& gamma, bool diag_approx) {
  Prepared pr;
  if (fit.beta_hat.size() != cohort.dim())
    throw InputError("model has " + std::to_string(fit.beta_hat.size()) +
                     " coefficients, cohort has " + std::to_string(cohort.dim()) +
                     " covariates");
  pr.risk = (cohort.covariates() * fit.beta_hat).array().exp().matrix();
  const Eigen::Index n = cohort.size();
  if (gamma) {
    if (!summary.constraints)
      throw InputError("weighted inference needs summary constraints");
    const ConstraintSpec& spec = *summary.constraints;
    spec.validate(cohort.dim());
    if (gamma->size() != spec.size())
      throw InputError("gamma_hat length does not match the constraints");
    Eigen::MatrixXd H = evaluate_constraints(cohort, spec);
    pr.G = H.rowwise() - spec.targets.transpose();
    pr.gamma = *gamma;
    pr.D = (pr.G * pr.gamma).array() + 1.0;
    if (pr.D.minCoeff() <= 0.0)
      throw NumericalError("gamma_hat gives nonpositive EL denominators");
    pr.mu_cov = spec.mu_covariance(diag_approx);
    if (summary.mu_s_covariance)
      pr.mu_s_cov = *summary.mu_s_covariance;
    else
      pr.mu_s_cov = Eigen::MatrixXd::Zero(spec.size(), summary.size());
  } else {
    pr.G = Eigen::MatrixXd(n, 0);
    pr.D = Eigen::VectorXd::Ones(n);
    pr.gamma = Eigen::VectorXd(0);
    pr.mu_cov = Eigen::MatrixXd(0, 0);
    pr.mu_s_cov = Eigen::MatrixXd(0, summary.size());
  }
  return pr;
}

void check_index(const TargetSummary& summary, int t_index) {
  if (t_index < 0 || t_index >= summary.size())
    throw InputError("time index out of range");
}

// n * var of the estimate at one time.
double scaled_variance(const Cohort& cohort, const CoxFit& fit,
                       const TargetSummary& summary, const Prepared& pr,
                       double lambda_hat, int k) {
  const double n = static_cast<double>(cohort.size());
  const double S = summary.survival[k];
  TimePieces tp = time_pieces(cohort.covariates(), pr.risk, pr.G, pr.D, pr.gamma,
                              lambda_hat, S);
  double pi = tp.psi.squaredNorm() / n;
  pi += n * tp.e_beta.dot(fit.sigma_beta * tp.e_beta);
  pi += n * summary.survival_variance[k] * tp.e_S * tp.e_S;
  if (tp.pi14.size()) {
    pi += n * tp.pi14.dot(pr.mu_cov * tp.pi14);
    pi += 2.0 * n * tp.e_S * tp.pi14.dot(pr.mu_s_cov.col(k));
  }
  return pi / (tp.a * tp.a);
}

}  // namespace

std::string to_string(Method m) {
  return m == Method::Weighted ? "weighted" : "unweighted";
}

void TargetSummary::validate() const {
  const Eigen::Index s = static_cast<Eigen::Index>(times.size());
  if (survival.size() != s || survival_variance.size() != s)
    throw InputError("summary: times, survival and survival_variance must have equal length");
  for (Eigen::Index k = 0; k < s; ++k) {
    if (!(times[static_cast<std::size_t>(k)] > 0.0))
      throw InputError("summary: times must be positive");
    if (k && !(times[static_cast<std::size_t>(k)] > times[static_cast<std::size_t>(k - 1)]))
      throw InputError("summary: times must be strictly increasing");
    if (!(survival[k] > 0.0)) {
      std::ostringstream os;
      os << "summary: survival is " << survival[k] << " at t = "
         << times[static_cast<std::size_t>(k)] << "; it must be in (0, 1]";
      throw InputError(os.str());
    }
    if (survival[k] > 1.0) throw InputError("summary: survival exceeds 1");
    if (k && survival[k] > survival[k - 1] + 1e-12)
      throw InputError("summary: survival must be nonincreasing in time");
    if (survival_variance[k] < 0.0)
      throw InputError("summary: survival_variance must be nonnegative");
  }
  if (m < 1) throw InputError("summary: m must be at least 1");
  if (survival_covariance &&
      (survival_covariance->rows() != s || survival_covariance->cols() != s))
    throw InputError("summary: survival_covariance must be s x s");
  if (mu_s_covariance) {
    if (!constraints)
      throw InputError("summary: mu_s_covariance given without constraints");
    if (mu_s_covariance->rows() != constraints->size() ||
        mu_s_covariance->cols() != s)
      throw InputError("summary: mu_s_covariance must be q x s");
  }
}

Eigen::MatrixXd TargetSummary::survival_cov() const {
  if (survival_covariance) return *survival_covariance;
  const Eigen::Index s = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd out(s, s);
  for (Eigen::Index a = 0; a < s; ++a) {
    out(a, a) = survival_variance[a];
    for (Eigen::Index b = 0; b < a; ++b) {
      const double gb = survival_variance[b] / (survival[b] * survival[b]);
      const double ga = survival_variance[a] / (survival[a] * survival[a]);
      out(a, b) = out(b, a) = survival[a] * survival[b] * std::min(ga, gb);
    }
  }
  return out;
}

double phi(const Eigen::VectorXd& z, double V, const Eigen::VectorXd& beta,
           double S) {
  return std::exp(-V * std::exp(beta.dot(z))) - S;
}

double solve_equation(const Eigen::VectorXd& risk, const Eigen::VectorXd* weights,
                      double S, double tol) {
  if (!(S > 0.0) || S > 1.0)
    throw InputError("survival probability must lie in (0, 1]");
  if (S == 1.0) return 0.0;
  const Eigen::Index n = risk.size();
  if (weights && weights->size() != n)
    throw InputError("weights length does not match the cohort");
  auto eval = [&](double V, double& f, double& df) {
    Eigen::ArrayXd e = (-V * risk.array()).exp();
    if (weights) {
      f = (weights->array() * e).sum() - S;
      df = -(weights->array() * risk.array() * e).sum();
    } else {
      f = e.mean() - S;
      df = -(risk.array() * e).mean();
    }
  };
  double f, df;
  double lo = 0.0, hi = 1.0;
  eval(hi, f, df);
  while (f > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("cannot bracket the estimating equation");
    eval(hi, f, df);
  }
  if (f == 0.0) return hi;
  // Safeguarded Newton from the closed form of the mean-risk subject.
  double V = std::clamp(-std::log(S) / risk.mean(), lo, hi);
  if (!(V > lo && V < hi)) V = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    eval(V, f, df);
    if (std::abs(f) < tol) return V;
    if (f > 0.0)
      lo = V;
    else
      hi = V;
    double next = df < 0.0 ? V - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == V || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi)
      return next;
    V = next;
  }
  return V;
}

double solve_unweighted(const Cohort& cohort, const Eigen::VectorXd& beta,
                        double S_t, double tol) {
  if (beta.size() != cohort.dim()) throw InputError("beta length mismatch");
  Eigen::VectorXd risk = (cohort.covariates() * beta).array().exp().matrix();
  return solve_equation(risk, nullptr, S_t, tol);
}

double solve_weighted(const Cohort& cohort, const Eigen::VectorXd& beta,
                      double S_t, const Eigen::VectorXd& weights, double tol) {
  if (beta.size() != cohort.dim()) throw InputError("beta length mismatch");
  if ((weights.array() <= 0.0).any())
    throw InputError("weights must be positive");
  if (std::abs(weights.sum() - 1.0) > 1e-8)
    throw InputError("weights must sum to 1");
  Eigen::VectorXd risk = (cohort.covariates() * beta).array().exp().matrix();
  return solve_equation(risk, &weights, S_t, tol);
}

Rho1Derivatives rho1_derivatives(const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& h, double V,
                                 const Eigen::VectorXd& beta, double S,
                                 const Eigen::VectorXd& gamma,
                                 const Eigen::VectorXd& mu) {
  const double r = std::exp(beta.dot(z));
  const double e = std::exp(-V * r);
  const double Phi = e - S;
  const Eigen::VectorXd g = h - mu;
  const double D = 1.0 + gamma.dot(g);
  Rho1Derivatives out;
  out.rho1 = Phi / D;
  out.d_lambda = -r * e / D;
  out.d_S = -1.0 / D;
  out.d_beta = (-V * r * e / D) * z;
  out.d_gamma = (-Phi / (D * D)) * g;
  out.d_mu = (Phi / (D * D)) * gamma;
  return out;
}

QDerivatives q_derivatives(const Eigen::VectorXd& h, const Eigen::VectorXd& gamma,
                           const Eigen::VectorXd& mu) {
  const Eigen::VectorXd g = h - mu;
  const double D = 1.0 + gamma.dot(g);
  const Eigen::Index q = g.size();
  QDerivatives out;
  out.q = g / D;
  out.d_gamma = -(g * g.transpose()) / (D * D);
  out.d_mu = -Eigen::MatrixXd::Identity(q, q) / D + (g * gamma.transpose()) / (D * D);
  return out;
}

double variance_unweighted(const Cohort& cohort, const CoxFit& fit,
                           const TargetSummary& summary, double lambda_hat,
                           int t_index) {
  check_index(summary, t_index);
  Prepared pr = prepare(cohort, fit, summary, std::nullopt, false);
  return scaled_variance(cohort, fit, summary, pr, lambda_hat, t_index);
}

double variance_weighted(const Cohort& cohort, const CoxFit& fit,
                         const TargetSummary& summary, double lambda_hat,
                         const Eigen::VectorXd& gamma_hat, int t_index,
                         bool diag_approx) {
  check_index(summary, t_index);
  Prepared pr = prepare(cohort, fit, summary, gamma_hat, diag_approx);
  return scaled_variance(cohort, fit, summary, pr, lambda_hat, t_index);
}

InfluenceCovariance influence_covariance(const Cohort& cohort, const CoxFit& fit,
                                         const TargetSummary& summary,
                                         const RecalResult& recal,
                                         bool diag_approx) {
  const int s = summary.size();
  if (recal.lambda0.size() != s)
    throw InputError("recalibration result does not match the summary times");
  const bool weighted = recal.method == Method::Weighted;
  if (weighted && !recal.gamma_hat)
    throw InputError("weighted result lacks gamma_hat");
  Prepared pr = prepare(cohort, fit, summary,
                        weighted ? recal.gamma_hat : std::nullopt, diag_approx);
  const Eigen::Index n = cohort.size(), p = cohort.dim(), q = pr.G.cols();
  const double dn = static_cast<double>(n);

  Eigen::MatrixXd Psi(n, s), Eb(p, s), P14(q, s);
  Eigen::VectorXd a(s), eS(s);
  for (int k = 0; k < s; ++k) {
    TimePieces tp = time_pieces(cohort.covariates(), pr.risk, pr.G, pr.D, pr.gamma,
                                recal.lambda0[k], summary.survival[k]);
    Psi.col(k) = tp.psi / tp.a;
    Eb.col(k) = tp.e_beta / tp.a;
    P14.col(k) = tp.pi14 / tp.a;
    a[k] = tp.a;
    eS[k] = tp.e_S / tp.a;
  }
  const Eigen::MatrixXd Sc = summary.survival_cov();
  Eigen::MatrixXd cov = Psi.transpose() * Psi / (dn * dn);
  cov += Eb.transpose() * fit.sigma_beta * Eb;
  cov += eS.asDiagonal() * Sc * eS.asDiagonal();
  if (q) {
    cov += P14.transpose() * pr.mu_cov * P14;
    // cross terms between mu_hat and S_hat
    Eigen::MatrixXd C = P14.transpose() * pr.mu_s_cov;  // (k, l): pi14_k' cov(mu, S_l)
    Eigen::MatrixXd X = C * eS.asDiagonal();
    cov += X + X.transpose();
  }
  InfluenceCovariance out;
  out.cov_lambda = 0.5 * (cov + cov.transpose());
  out.cov_beta_lambda = -fit.sigma_beta * Eb;
  return out;
}

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw InputError("confidence level must lie in (0, 1)");
  boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, 0.5 + 0.5 * level);
}

Eigen::VectorXd isotonic_increasing(const Eigen::VectorXd& y) {
  std::vector<double> val;
  std::vector<int> cnt;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    val.push_back(y[i]);
    cnt.push_back(1);
    while (val.size() > 1 && val[val.size() - 2] > val.back()) {
      const std::size_t b = val.size() - 1;
      const double merged =
          (val[b - 1] * cnt[b - 1] + val[b] * cnt[b]) / (cnt[b - 1] + cnt[b]);
      cnt[b - 1] += cnt[b];
      val[b - 1] = merged;
      val.pop_back();
      cnt.pop_back();
    }
  }
  Eigen::VectorXd out(y.size());
  Eigen::Index pos = 0;
  for (std::size_t b = 0; b < val.size(); ++b)
    for (int c = 0; c < cnt[b]; ++c) out[pos++] = val[b];
  return out;
}

RecalResult recalibrate(const Cohort& cohort, const CoxFit& fit,
                        const TargetSummary& summary, Method method,
                        const RecalOptions& options) {
  summary.validate();
  if (fit.beta_hat.size() != cohort.dim())
    throw InputError("model and cohort disagree on the number of covariates");
  const double z = normal_quantile_two_sided(options.ci_level);
  const int s = summary.size();

  RecalResult res;
  res.times = summary.times;
  res.method = method;
  res.ci_level = options.ci_level;

  Eigen::VectorXd risk = (cohort.covariates() * fit.beta_hat).array().exp().matrix();
  std::optional<Eigen::VectorXd> w;
  if (method == Method::Weighted) {
    if (!summary.constraints || summary.constraints->size() == 0)
      throw InfeasibleConstraint(
          "weighted recalibration requested but the summary has no constraints",
          Eigen::VectorXd(0));
    const ConstraintSpec& spec = *summary.constraints;
    spec.validate(cohort.dim());
    Eigen::MatrixXd H = evaluate_constraints(cohort, spec);
    ELWeights el = solve_el_dual(H, spec.targets, options.el);
    res.gamma_hat = el.gamma_hat;
    res.weights = el.weights;
    w = el.weights;
    for (auto& msg : el.warnings) res.warnings.push_back(msg);
    if (options.diag_approx)
      res.warnings.push_back(
          "diagonal approximation: off-diagonal elements of var(mu_hat) set to 0");
  }

  res.lambda0.resize(s);
  for (int k = 0; k < s; ++k)
    res.lambda0[k] = solve_equation(risk, w ? &*w : nullptr, summary.survival[k],
                                    options.root_tol);

  const double horizon = cohort.exit().maxCoeff();
  if (summary.times.back() > horizon) {
    std::ostringstream os;
    os << "requested time " << summary.times.back()
       << " exceeds the source follow-up (" << horizon << ")";
    res.warnings.push_back(os.str());
  }

  if (options.compute_covariance) {
    InfluenceCovariance ic =
        influence_covariance(cohort, fit, summary, res, options.diag_approx);
    res.cov_lambda = std::move(ic.cov_lambda);
    res.cov_beta_lambda = std::move(ic.cov_beta_lambda);
    res.se = res.cov_lambda.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    Prepared pr = prepare(cohort, fit, summary, res.gamma_hat, options.diag_approx);
    res.se.resize(s);
    for (int k = 0; k < s; ++k)
      res.se[k] = std::sqrt(std::max(
          0.0, scaled_variance(cohort, fit, summary, pr, res.lambda0[k], k) /
                   cohort.size()));
  }

  if (options.isotonic) {
    res.lambda0 = isotonic_increasing(res.lambda0);
    res.isotonic = true;
  }
  res.ci_lower = (res.lambda0 - z * res.se).cwiseMax(0.0);
  res.ci_upper = res.lambda0 + z * res.se;
  return res;
}

}  // namespace recal
