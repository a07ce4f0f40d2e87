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

#include "recal/absrisk.hpp"

namespace recal {

namespace {

struct Params {
  Eigen::VectorXd beta;
  Eigen::VectorXd P;  // Lambda0 at g_0..g_L
  Eigen::VectorXd C;  // Lambda_c at g_0..g_L
};

Params collect(const AbsoluteRiskInput& in, const std::vector<double>& grid) {
  const Eigen::Index L = static_cast<Eigen::Index>(grid.size());
  Params pr;
  pr.beta = in.beta;
  pr.P.resize(L + 1);
  pr.C.resize(L + 1);
  pr.P[0] = in.lambda0(in.t0);
  pr.C[0] = in.lambda_c(in.t0);
  for (Eigen::Index l = 1; l <= L; ++l) {
    pr.P[l] = in.lambda0(grid[static_cast<std::size_t>(l - 1)]);
    pr.C[l] = in.lambda_c(grid[static_cast<std::size_t>(l - 1)]);
  }
  return pr;
}

double risk_from(const Eigen::VectorXd& z, const Params& pr) {
  const double r = std::exp(pr.beta.dot(z));
  double sum = 0.0;
  for (Eigen::Index l = 1; l < pr.P.size(); ++l) {
    const double expo = (pr.P[l - 1] - pr.P[0]) * r + (pr.C[l - 1] - pr.C[0]);
    sum += (pr.P[l] - pr.P[l - 1]) * r * std::exp(-expo);
  }
  return sum;
}

Eigen::VectorXd flatten(const Params& pr) {
  Eigen::VectorXd x(pr.beta.size() + pr.P.size() + pr.C.size());
  x << pr.beta, pr.P, pr.C;
  return x;
}

Params unflatten(const Eigen::VectorXd& x, Eigen::Index p, Eigen::Index n1) {
  return Params{x.head(p), x.segment(p, n1), x.tail(n1)};
}

void check_input(const AbsoluteRiskInput& in) {
  if (!(in.t1 > in.t0)) throw InputError("absolute risk needs t1 > t0");
  if (in.t0 < 0.0) throw InputError("absolute risk needs t0 >= 0");
  if (in.z.size() != in.beta.size())
    throw InputError("z and beta have different lengths");
  if (!in.lambda0.is_nondecreasing() || !in.lambda_c.is_nondecreasing())
    throw InputError("cumulative hazards must be nondecreasing");
}

}  // namespace

std::vector<double> risk_grid(const AbsoluteRiskInput& in) {
  std::vector<double> grid;
  if (!in.grid.empty()) {
    for (std::size_t l = 0; l < in.grid.size(); ++l) {
      const double g = in.grid[l];
      if (!(g > in.t0 && g <= in.t1) || (l && !(g > in.grid[l - 1])))
        throw InputError("grid must be strictly increasing inside (t0, t1]");
      grid.push_back(g);
    }
    return grid;
  }
  const auto& kn = in.lambda0.knots();
  const auto& va = in.lambda0.values();
  double prev = in.lambda0(in.t0);
  for (std::size_t k = 0; k < kn.size(); ++k) {
    if (kn[k] <= in.t0) continue;
    if (kn[k] > in.t1) break;
    if (va[k] != prev) grid.push_back(kn[k]);
    prev = va[k];
  }
  return grid;
}

double absolute_risk(const AbsoluteRiskInput& in, Warnings* warnings) {
  check_input(in);
  const std::vector<double> grid = risk_grid(in);
  if (grid.empty()) {
    if (warnings) warnings->push_back("absolute risk: empty grid inside (t0, t1]; risk is 0");
    return 0.0;
  }
  const double risk = risk_from(in.z, collect(in, grid));
  if (risk < -1e-12 || risk > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "absolute risk " << risk << " outside [0, 1]; check the hazard inputs";
    throw NumericalError(os.str());
  }
  return std::clamp(risk, 0.0, 1.0);
}

Eigen::VectorXd absolute_risk_gradient(const AbsoluteRiskInput& in,
                                       GradientMode mode) {
  check_input(in);
  const std::vector<double> grid = risk_grid(in);
  const Params pr = collect(in, grid);
  const Eigen::Index p = pr.beta.size();
  const Eigen::Index n1 = pr.P.size();
  const Eigen::Index L = n1 - 1;

  if (mode == GradientMode::FiniteDifference) {
    Eigen::VectorXd x = flatten(pr);
    Eigen::VectorXd grad(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double h = 1e-6 * std::max(std::abs(x[j]), 1e-3);
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      grad[j] = (risk_from(in.z, unflatten(xp, p, n1)) -
                 risk_from(in.z, unflatten(xm, p, n1))) /
                (2.0 * h);
    }
    return grad;
  }

  const double r = std::exp(pr.beta.dot(in.z));
  // E_l and T_l for l = 1..L (index l).
  Eigen::VectorXd E = Eigen::VectorXd::Zero(L + 2), T = Eigen::VectorXd::Zero(L + 2);
  Eigen::VectorXd dbeta = Eigen::VectorXd::Zero(p);
  for (Eigen::Index l = 1; l <= L; ++l) {
    const double A = pr.P[l - 1] - pr.P[0];
    E[l] = std::exp(-A * r - (pr.C[l - 1] - pr.C[0]));
    T[l] = (pr.P[l] - pr.P[l - 1]) * r * E[l];
    dbeta += T[l] * (1.0 - A * r) * in.z;
  }
  const double tail = T.segment(2, std::max<Eigen::Index>(L - 1, 0)).sum();
  Eigen::VectorXd dP = Eigen::VectorXd::Zero(n1), dC = Eigen::VectorXd::Zero(n1);
  if (L >= 1) {
    dP[0] = -r * E[1] + r * tail;
    dC[0] = tail;
  }
  for (Eigen::Index k = 1; k <= L; ++k) {
    dP[k] = r * E[k];
    if (k < L) {
      dP[k] -= r * E[k + 1] + r * T[k + 1];
      dC[k] = -T[k + 1];
    }
  }
  Eigen::VectorXd grad(p + 2 * n1);
  grad << dbeta, dP, dC;
  return grad;
}

double absolute_risk_variance(const AbsoluteRiskInput& in, GradientMode mode) {
  check_input(in);
  const std::vector<double> grid = risk_grid(in);
  const Eigen::Index p = in.beta.size();
  const Eigen::Index L = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index n1 = L + 1;
  if (L == 0) return 0.0;

  auto offset_of = [&](Eigen::Index len, const char* what) -> Eigen::Index {
    if (len == L) return 1;
    if (len == n1) return 0;
    std::ostringstream os;
    os << what << " has " << len << " entries; expected " << L << " or " << n1
       << " for the risk grid";
    throw InputError(os.str());
  };

  const Eigen::Index dim = p + 2 * n1;
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(dim, dim);
  if (in.sigma_beta.size()) {
    if (in.sigma_beta.rows() != p || in.sigma_beta.cols() != p)
      throw InputError("sigma_beta must be p x p");
    V.topLeftCorner(p, p) = in.sigma_beta;
  }
  if (in.cov_lambda.size()) {
    if (in.cov_lambda.rows() != in.cov_lambda.cols())
      throw InputError("cov_lambda must be square");
    const Eigen::Index o = offset_of(in.cov_lambda.rows(), "cov_lambda");
    const Eigen::Index len = in.cov_lambda.rows();
    V.block(p + o, p + o, len, len) = in.cov_lambda;
  }
  if (in.cov_beta_lambda.size()) {
    if (in.cov_beta_lambda.rows() != p)
      throw InputError("cov_beta_lambda must have p rows");
    const Eigen::Index o = offset_of(in.cov_beta_lambda.cols(), "cov_beta_lambda");
    const Eigen::Index len = in.cov_beta_lambda.cols();
    V.block(0, p + o, p, len) = in.cov_beta_lambda;
    V.block(p + o, 0, len, p) = in.cov_beta_lambda.transpose();
  }
  if (in.var_lambda_c) {
    const Eigen::Index o = offset_of(in.var_lambda_c->size(), "var_lambda_c");
    for (Eigen::Index k = 0; k < in.var_lambda_c->size(); ++k)
      V(p + n1 + o + k, p + n1 + o + k) = (*in.var_lambda_c)[k];
  }
  const Eigen::VectorXd g = absolute_risk_gradient(in, mode);
  const double v = g.dot(V * g);
  if (v < -1e-12) {
    std::ostringstream os;
    os << "delta-method variance is negative (" << v
       << "); covariance blocks are inconsistent";
    throw NumericalError(os.str());
  }
  return std::max(v, 0.0);
}

AbsoluteRiskInput make_risk_input(const CoxFit& fit, const RecalResult& recal,
                                  const CompetingHazard& competing,
                                  const Eigen::VectorXd& z, double t0, double t1,
                                  bool annual) {
  if (!(t1 > t0) || t0 < 0.0) throw InputError("need 0 <= t0 < t1");
  const Eigen::Index s = recal.lambda0.size();
  const Eigen::Index p = fit.beta_hat.size();
  if (z.size() != p) throw InputError("profile has the wrong number of covariates");
  const std::vector<double>& tau = recal.times;

  // Nodes g_0 = t0, then the grid.
  std::vector<double> nodes{t0};
  if (annual) {
    for (double g = t0 + 1.0; g <= t1 + 1e-9; g += 1.0) nodes.push_back(std::min(g, t1));
    if (nodes.back() < t1) nodes.push_back(t1);
  } else {
    for (double t : tau)
      if (t > t0 && t <= t1) nodes.push_back(t);
  }
  if (nodes.size() > 1 && annual && nodes.back() > tau.back() + 1e-9)
    throw InputError("annual grid extends past the last recalibration time");

  // Row k maps the recalibrated estimates to Lambda0 at node k.
  const Eigen::Index n1 = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n1, s);
  for (Eigen::Index k = 0; k < n1; ++k) {
    const double g = nodes[static_cast<std::size_t>(k)];
    auto it = std::upper_bound(tau.begin(), tau.end(), g + 1e-12);
    const Eigen::Index hi = static_cast<Eigen::Index>(it - tau.begin());  // first tau > g
    if (!annual) {
      if (hi > 0) W(k, hi - 1) = 1.0;  // step semantics
      continue;
    }
    if (hi > 0 && std::abs(tau[static_cast<std::size_t>(hi - 1)] - g) <= 1e-12) {
      W(k, hi - 1) = 1.0;
    } else if (hi == 0) {
      W(k, 0) = g / tau[0];  // linear from Lambda0(0) = 0
    } else if (hi < s) {
      const double a = tau[static_cast<std::size_t>(hi - 1)];
      const double b = tau[static_cast<std::size_t>(hi)];
      W(k, hi - 1) = (b - g) / (b - a);
      W(k, hi) = (g - a) / (b - a);
    } else {
      W(k, s - 1) = 1.0;
    }
  }
  Eigen::VectorXd vals = W * recal.lambda0;

  AbsoluteRiskInput in;
  in.t0 = t0;
  in.t1 = t1;
  in.z = z;
  in.beta = fit.beta_hat;
  in.sigma_beta = fit.sigma_beta;
  std::vector<double> kn(nodes), va(vals.data(), vals.data() + vals.size());
  // Keep the step function nondecreasing if the raw estimates are not.
  for (std::size_t k = 1; k < va.size(); ++k) va[k] = std::max(va[k], va[k - 1]);
  in.lambda0 = StepFunction(kn, va, 0.0);
  in.grid.assign(nodes.begin() + 1, nodes.end());
  if (recal.cov_lambda.size()) in.cov_lambda = W * recal.cov_lambda * W.transpose();
  if (recal.cov_beta_lambda.size()) in.cov_beta_lambda = recal.cov_beta_lambda * W.transpose();

  double scale = 1.0;
  if (competing.beta_c) {
    if (competing.beta_c->size() != p)
      throw InputError("competing beta has the wrong length");
    scale = std::exp(competing.beta_c->dot(z));
  }
  {
    std::vector<double> cv = competing.cumhaz.values();
    for (double& v : cv) v *= scale;
    in.lambda_c = StepFunction(competing.cumhaz.knots(), cv, 0.0);
  }
  if (competing.variance) {
    Eigen::VectorXd vc(n1);
    for (Eigen::Index k = 0; k < n1; ++k)
      vc[k] = (*competing.variance)(nodes[static_cast<std::size_t>(k)]) * scale * scale;
    in.var_lambda_c = vc;
  }
  return in;
}

}  // namespace recal
