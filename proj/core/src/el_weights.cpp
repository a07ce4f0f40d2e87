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

#include "recal/el_weights.hpp"
#include "recal/rng.hpp"

namespace recal {

namespace {

std::string vec_str(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

// Dense two-phase simplex with Bland's rule for
//   maximize c'x  subject to  A x = b, x >= 0, b >= 0.
// Small row counts only; columns may be many.
struct LpResult {
  bool optimal = false;
  double value = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // duals
};

LpResult simplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                 const Eigen::VectorXd& c) {
  const Eigen::Index m = A.rows(), nv = A.cols();
  const Eigen::Index ncol = nv + m;  // structural + artificial
  const double eps = 1e-11;
  Eigen::MatrixXd T(m, ncol + 1);
  T.leftCols(nv) = A;
  T.block(0, nv, m, m).setIdentity();
  T.col(ncol) = b;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) basis[static_cast<std::size_t>(r)] = nv + r;

  auto run = [&](const Eigen::VectorXd& cost, Eigen::Index allowed) {
    for (int guard = 0; guard < 100000; ++guard) {
      Eigen::VectorXd cb(m);
      for (Eigen::Index r = 0; r < m; ++r)
        cb[r] = cost[basis[static_cast<std::size_t>(r)]];
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        const double red = cost[j] - cb.dot(T.col(j));
        if (red > eps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < m; ++r) {
        const double a = T(r, enter);
        if (a > eps) {
          const double ratio = T(r, ncol) / a;
          if (ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
               basis[static_cast<std::size_t>(r)] <
                   basis[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      T.row(leave) /= T(leave, enter);
      for (Eigen::Index r = 0; r < m; ++r)
        if (r != leave && T(r, enter) != 0.0)
          T.row(r) -= T(r, enter) * T.row(leave);
      basis[static_cast<std::size_t>(leave)] = enter;
    }
    return false;
  };

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(ncol);
  phase1.tail(m).setConstant(-1.0);
  LpResult out;
  if (!run(phase1, ncol)) return out;
  double infeas = 0.0;
  for (Eigen::Index r = 0; r < m; ++r)
    if (basis[static_cast<std::size_t>(r)] >= nv) infeas += T(r, ncol);
  if (infeas > 1e-9) return out;

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(ncol);
  phase2.head(nv) = c;
  if (!run(phase2, nv)) return out;
  out.optimal = true;
  out.x = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd cb(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index j = basis[static_cast<std::size_t>(r)];
    cb[r] = phase2[j];
    if (j < nv) out.x[j] = T(r, ncol);
  }
  out.value = c.dot(out.x);
  // The artificial block of the final tableau holds B^{-1}.
  out.y = (cb.transpose() * T.block(0, nv, m, m)).transpose();
  return out;
}

// Exact interior test: maximize t with lambda_i >= t, sum lambda_i g_i = 0,
// sum lambda_i = 1. The duals of the moment rows give a separating direction
// when the optimum is 0.
Feasibility lp_feasibility(const Eigen::MatrixXd& G) {
  const Eigen::Index n = G.rows(), q = G.cols();
  Eigen::VectorXd scale = G.cwiseAbs().colwise().maxCoeff().transpose();
  for (Eigen::Index j = 0; j < q; ++j)
    if (scale[j] <= 0.0) scale[j] = 1.0;
  Eigen::MatrixXd A(q + 1, n + 1);
  Eigen::MatrixXd Gs = G * scale.cwiseInverse().asDiagonal();
  A.block(0, 0, q, 1) = Gs.colwise().sum().transpose();
  A.block(0, 1, q, n) = Gs.transpose();
  A(q, 0) = static_cast<double>(n);
  A.block(q, 1, 1, n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(q + 1);
  b[q] = 1.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c[0] = 1.0;
  LpResult lp = simplex(A, b, c);
  Feasibility f;
  if (!lp.optimal) {
    f.feasible = false;
    f.reason = "LP check failed to reach an optimum";
    f.direction = Eigen::VectorXd::Zero(q);
    return f;
  }
  if (lp.value > 1e-9 / static_cast<double>(n)) return f;
  f.feasible = false;
  Eigen::VectorXd d = lp.y.head(q).cwiseQuotient(scale);
  if (d.norm() > 0.0) d /= d.norm();
  f.direction = d;
  f.reason = "targets lie on or outside the boundary of the convex hull";
  return f;
}

}  // namespace

double ConstraintItem::operator()(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  switch (type) {
    case ConstraintType::RawMoment:
      return z[j];
    case ConstraintType::SecondMoment:
      return z[j] * z[j];
    case ConstraintType::ConditionalMoment:
      return z[k] == value ? z[j] : 0.0;
    case ConstraintType::ConditionalSecondMoment:
      return z[k] == value ? z[j] * z[j] : 0.0;
    case ConstraintType::Indicator:
      return z[k] == value ? 1.0 : 0.0;
  }
  return 0.0;
}

std::string ConstraintItem::label(const std::vector<std::string>& names) const {
  auto nm = [&](int i) {
    return i >= 0 && i < static_cast<int>(names.size())
               ? names[static_cast<std::size_t>(i)]
               : "z" + std::to_string(i + 1);
  };
  std::ostringstream os;
  switch (type) {
    case ConstraintType::RawMoment:
      os << "E[" << nm(j) << "]";
      break;
    case ConstraintType::SecondMoment:
      os << "E[" << nm(j) << "^2]";
      break;
    case ConstraintType::ConditionalMoment:
      os << "E[" << nm(j) << " I(" << nm(k) << "=" << value << ")]";
      break;
    case ConstraintType::ConditionalSecondMoment:
      os << "E[" << nm(j) << "^2 I(" << nm(k) << "=" << value << ")]";
      break;
    case ConstraintType::Indicator:
      os << "P(" << nm(k) << "=" << value << ")";
      break;
  }
  return os.str();
}

void ConstraintSpec::validate(int p, bool require_targets) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    const bool needs_j = it.type != ConstraintType::Indicator;
    const bool needs_k = it.type == ConstraintType::ConditionalMoment ||
                         it.type == ConstraintType::ConditionalSecondMoment ||
                         it.type == ConstraintType::Indicator;
    if ((needs_j && (it.j < 0 || it.j >= p)) ||
        (needs_k && (it.k < 0 || it.k >= p)))
      throw InputError("constraint " + std::to_string(i + 1) +
                       " references a covariate index outside 1.." +
                       std::to_string(p));
  }
  if (!require_targets) return;
  const Eigen::Index q = static_cast<Eigen::Index>(items.size());
  if (targets.size() != q)
    throw InputError("constraint targets have length " +
                     std::to_string(targets.size()) + ", expected " +
                     std::to_string(q));
  if (target_variances.size() != 0 && target_variances.size() != q)
    throw InputError("target_variances length does not match constraints");
  if (target_variances.size() && (target_variances.array() < 0.0).any())
    throw InputError("target_variances must be nonnegative");
  if (target_covariance &&
      (target_covariance->rows() != q || target_covariance->cols() != q))
    throw InputError("target_covariance must be q x q");
}

Eigen::MatrixXd ConstraintSpec::mu_covariance(bool diag_approx) const {
  const Eigen::Index q = static_cast<Eigen::Index>(items.size());
  if (!diag_approx && target_covariance) return *target_covariance;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q, q);
  if (target_variances.size() == q) out.diagonal() = target_variances;
  return out;
}

Eigen::MatrixXd evaluate_constraints(const Eigen::MatrixXd& Z,
                                     const std::vector<ConstraintItem>& items) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index q = static_cast<Eigen::Index>(items.size());
  Eigen::MatrixXd H(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd z = Z.row(i).transpose();
    for (Eigen::Index c = 0; c < q; ++c)
      H(i, c) = items[static_cast<std::size_t>(c)](z);
  }
  return H;
}

Eigen::MatrixXd evaluate_constraints(const Cohort& cohort,
                                     const ConstraintSpec& spec) {
  spec.validate(cohort.dim(), false);
  return evaluate_constraints(cohort.covariates(), spec.items);
}

Feasibility check_feasibility(const Eigen::MatrixXd& H,
                              const Eigen::VectorXd& targets, bool strict,
                              int random_probes, std::uint64_t seed) {
  const Eigen::Index n = H.rows(), q = H.cols();
  if (targets.size() != q)
    throw InputError("check_feasibility: targets length mismatch");
  Feasibility f;
  if (q == 0) return f;
  const Eigen::MatrixXd G = H.rowwise() - targets.transpose();

  auto probe = [&](const Eigen::VectorXd& d) {
    Eigen::VectorXd proj = G * d;
    const double lo = proj.minCoeff(), hi = proj.maxCoeff();
    const double tol = 1e-12 * std::max(1.0, d.norm() * G.cwiseAbs().maxCoeff());
    if (lo >= -tol) {
      f.feasible = false;
      f.direction = d / d.norm();
      return true;
    }
    if (hi <= tol) {
      f.feasible = false;
      f.direction = -d / d.norm();
      return true;
    }
    return false;
  };

  for (Eigen::Index j = 0; j < q; ++j) {
    if (probe(Eigen::VectorXd::Unit(q, j))) {
      f.reason = "every row lies on one side of the target along an axis";
      return f;
    }
  }
  // Rank deficiency: the rows span a proper subspace, so the hull has no
  // interior. The null direction is orthogonal to every centered row.
  if (n > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    if (sv.size() < q || sv[q - 1] <= 1e-10 * std::max(smax, 1.0)) {
      f.feasible = false;
      f.direction = svd.matrixV().col(q - 1);
      f.reason = "constraint rows are rank deficient around the target";
      return f;
    }
  }
  SplitMix64 rng(seed);
  for (int r = 0; r < random_probes; ++r) {
    Eigen::VectorXd d(q);
    for (Eigen::Index j = 0; j < q; ++j) d[j] = rng.normal();
    if (d.norm() == 0.0) continue;
    if (probe(d / d.norm())) {
      f.reason = "every row lies on one side of the target along a probe";
      return f;
    }
  }
  if (strict) return lp_feasibility(G);
  return f;
}

ELWeights solve_el_dual(const Eigen::MatrixXd& H, const Eigen::VectorXd& targets,
                        const ELOptions& options) {
  const Eigen::Index n = H.rows(), q = H.cols();
  if (targets.size() != q)
    throw InputError("solve_el_dual: targets have length " +
                     std::to_string(targets.size()) + ", H has " +
                     std::to_string(q) + " columns");
  if (n < 1) throw InputError("solve_el_dual: no rows");
  const double dn = static_cast<double>(n);
  ELWeights out;
  out.gamma_hat = Eigen::VectorXd::Zero(q);
  if (q == 0) {
    out.weights = Eigen::VectorXd::Constant(n, 1.0 / dn);
    out.converged = true;
    return out;
  }

  Feasibility feas =
      check_feasibility(H, targets, options.strict_feasibility);
  if (!feas.feasible)
    throw InfeasibleConstraint("infeasible moment constraints: " + feas.reason +
                                   "; direction " + vec_str(feas.direction),
                               feas.direction);

  const Eigen::MatrixXd G = H.rowwise() - targets.transpose();
  const double tol = options.tol * std::max(1.0, G.cwiseAbs().maxCoeff());
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  double obj = 0.0;
  int iter = 0;
  bool converged = false;
  for (; iter <= options.max_iter; ++iter) {
    Eigen::VectorXd inv = D.cwiseInverse();
    Eigen::VectorXd grad = G.transpose() * inv / dn;
    if (grad.cwiseAbs().maxCoeff() < tol) {
      converged = true;
      break;
    }
    if (iter == options.max_iter) break;
    Eigen::MatrixXd Gw = inv.asDiagonal() * G;
    Eigen::MatrixXd hess = Gw.transpose() * Gw / dn;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError("EL dual Hessian is singular; constraints are degenerate");
    Eigen::VectorXd delta = ldlt.solve(grad);
    const double slope = grad.dot(delta);
    // Once the Newton decrement is below what the mean of n logs can
    // resolve, the objective test is noise; take full steps and let the
    // gradient test decide.
    const bool pure_newton = slope < 1e-12 * (1.0 + std::abs(obj));
    double step = 1.0;
    bool moved = false;
    for (int h = 0; h < 80; ++h) {
      Eigen::VectorXd cand = gamma + step * delta;
      Eigen::VectorXd Dc = (G * cand).array() + 1.0;
      if (Dc.minCoeff() >= options.min_denominator) {
        const double oc = Dc.array().log().mean();
        if (pure_newton ||
            oc >= obj + 1e-4 * step * slope - 1e-15 * (1.0 + std::abs(obj))) {
          gamma = cand;
          D = std::move(Dc);
          obj = oc;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }

  if (!converged) {
    Feasibility strict = check_feasibility(H, targets, true);
    if (!strict.feasible)
      throw InfeasibleConstraint("infeasible moment constraints: " +
                                     strict.reason + "; direction " +
                                     vec_str(strict.direction),
                                 strict.direction);
    throw ConvergenceError("EL dual did not converge in " +
                               std::to_string(options.max_iter) +
                               " iterations; last gamma " + vec_str(gamma),
                           gamma);
  }

  out.gamma_hat = gamma;
  out.weights = (dn * D).cwiseInverse();
  out.weights /= out.weights.sum();
  out.dual_value = obj;
  out.converged = true;
  out.iterations = iter;
  if (out.weights.minCoeff() < 1e-6 / dn) {
    std::ostringstream os;
    os << "EL weights near the hull boundary (min weight "
       << out.weights.minCoeff() << " < 1e-6/n); variance estimates may be unreliable";
    out.warnings.push_back(os.str());
  }
  return out;
}

}  // namespace recal
