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
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "recal/absrisk.hpp"
#include "recal/cox.hpp"
#include "recal/simlab.hpp"

namespace recal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(r) for r in [0, count) on `threads` workers. Results must be
// written to per-index slots by the caller.
template <class F>
void parallel_for(int count, int threads, F&& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int r = 0; r < count; ++r) body(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int r = next++; r < count; r = next++) body(r);
    });
  for (auto& t : pool) t.join();
}

double round_time(double x) { return std::max(1.0, std::round(x)); }

struct EstimatorOutput {
  std::vector<double> est, se;
  std::vector<char> covered;
  double cad = kNaN;
};

struct ReplicateOutput {
  bool ok = false;
  std::string error;
  std::vector<EstimatorOutput> estimators;
  double source_censoring = 0.0;
  double target_event = 0.0;
  double target_competing = 0.0;
};

double truth_at(const ScenarioConfig& c, double t) {
  Weibull w = c.baseline_target;
  if (c.competing) w.kappa = c.competing->kappa_event;
  return w.cumhaz(t);
}

std::vector<std::string> estimator_labels(const ScenarioConfig& c) {
  std::vector<std::string> out;
  if (c.include_breslow) out.push_back("Breslow");
  if (c.include_unweighted) out.push_back("Unweighted");
  for (const auto& s : c.constraint_sets) out.push_back(s.label);
  return out;
}

ReplicateOutput run_replicate(const ScenarioConfig& c,
                              const std::vector<double>& eval_times, int r) {
  ReplicateOutput out;
  try {
    SplitMix64 rng(substream_seed(c.seed, static_cast<std::uint64_t>(r)));
    Cohort src = generate_cohort(c, Population::Source, rng);
    Cohort tgt = generate_cohort(c, Population::Target, rng);
    out.source_censoring =
        static_cast<double>(src.count(EventCode::Censored)) / src.size();
    out.target_event =
        static_cast<double>(tgt.count(EventCode::EventOfInterest)) / tgt.size();
    out.target_competing =
        static_cast<double>(tgt.count(EventCode::Competing)) / tgt.size();

    CoxFit fit = fit_cox(src);
    KaplanMeier km = kaplan_meier(tgt);
    const double z = normal_quantile_two_sided(c.ci_level);

    TargetSummary base;
    base.times = eval_times;
    const Eigen::Index s = static_cast<Eigen::Index>(eval_times.size());
    base.survival.resize(s);
    base.survival_variance.resize(s);
    for (Eigen::Index k = 0; k < s; ++k) {
      base.survival[k] = km.survival(eval_times[static_cast<std::size_t>(k)]);
      base.survival_variance[k] = km.variance(eval_times[static_cast<std::size_t>(k)]);
    }
    base.survival_covariance = km.covariance(eval_times);
    base.m = tgt.size();

    std::vector<double> cad_S;
    for (int t = 1; t <= c.cad_horizon; ++t) cad_S.push_back(km.survival(t));
    Eigen::VectorXd risk = (src.covariates() * fit.beta_hat).array().exp().matrix();

    auto covered = [&](double est, double se, double truth) {
      const double lo = std::max(0.0, est - z * se), hi = est + z * se;
      return static_cast<char>(lo <= truth && truth <= hi);
    };
    auto cad_of = [&](const Eigen::VectorXd* w) {
      if (c.cad_horizon <= 0) return kNaN;
      double acc = 0.0;
      for (int t = 1; t <= c.cad_horizon; ++t)
        acc += std::abs(solve_equation(risk, w, cad_S[static_cast<std::size_t>(t - 1)]) -
                        truth_at(c, t));
      return acc;
    };

    if (c.include_breslow) {
      EstimatorOutput e;
      for (double t : eval_times) {
        const double est = fit.breslow_baseline(t);
        const double se = std::sqrt(std::max(0.0, fit.breslow_variance(t)));
        e.est.push_back(est);
        e.se.push_back(se);
        e.covered.push_back(covered(est, se, truth_at(c, t)));
      }
      if (c.cad_horizon > 0) {
        double acc = 0.0;
        for (int t = 1; t <= c.cad_horizon; ++t)
          acc += std::abs(fit.breslow_baseline(t) - truth_at(c, t));
        e.cad = acc;
      }
      out.estimators.push_back(std::move(e));
    }

    RecalOptions opt;
    opt.ci_level = c.ci_level;
    opt.diag_approx = c.diag_approx;
    opt.compute_covariance = false;
    auto collect = [&](const RecalResult& res, const Eigen::VectorXd* w) {
      EstimatorOutput e;
      for (Eigen::Index k = 0; k < s; ++k) {
        e.est.push_back(res.lambda0[k]);
        e.se.push_back(res.se[k]);
        e.covered.push_back(covered(res.lambda0[k], res.se[k],
                                    truth_at(c, eval_times[static_cast<std::size_t>(k)])));
      }
      e.cad = cad_of(w);
      return e;
    };

    if (c.include_unweighted) {
      RecalResult res = recalibrate(src, fit, base, Method::Unweighted, opt);
      out.estimators.push_back(collect(res, nullptr));
    }
    for (const auto& set : c.constraint_sets) {
      TargetSummary sm = base;
      TargetSummary moments = summarize_target(tgt, {}, set.items);
      sm.constraints = moments.constraints;
      RecalResult res = recalibrate(src, fit, sm, Method::Weighted, opt);
      out.estimators.push_back(collect(res, &*res.weights));
    }
    out.ok = true;
  } catch (const std::exception& ex) {
    out.ok = false;
    out.error = "replicate " + std::to_string(r) + ": " + ex.what();
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double Weibull::cumhaz(double t) const {
  return t <= 0.0 ? 0.0 : kappa * std::pow(theta * t, nu);
}

double Weibull::inverse(double H) const {
  if (kappa <= 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(H / kappa, 1.0 / nu) / theta;
}

CovariateDesign CovariateDesign::preset(const std::string& name) {
  if (name == "C1") return {0.5, 0.0, 1.0, 0.0, 1.0};
  if (name == "C2") return {0.8, 0.0, 1.0, 0.0, 1.0};
  if (name == "C3") return {0.5, 0.5, 1.2, -0.5, 0.8};
  if (name == "C4") return {0.8, 0.5, 1.2, -0.5, 0.8};
  throw InputError("unknown covariate configuration '" + name + "' (expected C1..C4)");
}

Eigen::Vector2d CovariateDesign::draw(SplitMix64& rng) const {
  const double z1 = rng.bernoulli(p_z1) ? 1.0 : 0.0;
  const double z2 = z1 == 1.0 ? rng.normal(mean1, sd1) : rng.normal(mean0, sd0);
  return {z1, z2};
}

double CovariateDesign::moment(const ConstraintItem& it) const {
  // Expectations of Z1^a, Z2^a within each Z1 stratum.
  auto stratum = [&](int v, int j, int power) -> double {
    if (j == 0) return power == 0 ? 1.0 : static_cast<double>(v);
    const double m = v ? mean1 : mean0, s = v ? sd1 : sd0;
    if (power == 0) return 1.0;
    return power == 1 ? m : m * m + s * s;
  };
  auto prob = [&](int v) { return v ? p_z1 : 1.0 - p_z1; };
  auto marginal = [&](int j, int power) {
    return prob(1) * stratum(1, j, power) + prob(0) * stratum(0, j, power);
  };
  auto conditional = [&](int j, int power) -> double {
    if (it.k != 0 || (it.value != 0.0 && it.value != 1.0)) return 0.0;
    const int v = static_cast<int>(it.value);
    return prob(v) * stratum(v, j, power);
  };
  switch (it.type) {
    case ConstraintType::RawMoment:
      return marginal(it.j, 1);
    case ConstraintType::SecondMoment:
      return marginal(it.j, 2);
    case ConstraintType::ConditionalMoment:
      return conditional(it.j, 1);
    case ConstraintType::ConditionalSecondMoment:
      return conditional(it.j, 2);
    case ConstraintType::Indicator:
      return conditional(0, 0);
  }
  return kNaN;
}

std::vector<ConstraintSet> default_constraint_sets() {
  using CI = ConstraintItem;
  return {
      {"Weighted-1", {CI::raw(0)}},
      {"Weighted-2", {CI::raw(0), CI::raw(1)}},
      {"Weighted-3", {CI::raw(0), CI::raw(1), CI::second(1)}},
      {"Weighted-4",
       {CI::raw(0), CI::conditional(1, 0, 1.0), CI::conditional_second(1, 0, 1.0),
        CI::conditional(1, 0, 0.0), CI::conditional_second(1, 0, 0.0)}},
  };
}

ScenarioConfig scenario_preset(const std::string& baseline,
                               const std::string& covariates) {
  ScenarioConfig c;
  c.baseline_label = baseline;
  c.covariate_label = covariates;
  if (baseline == "A1")
    c.baseline_source = {0.01, 2.0, 1.0};
  else if (baseline == "A2")
    c.baseline_source = {0.01, 1.5, 1.0};
  else if (baseline == "A3")
    c.baseline_source = {0.008, 2.0, 1.0};
  else if (baseline == "A4")
    c.baseline_source = {0.008, 1.5, 1.0};
  else
    throw InputError("unknown baseline scenario '" + baseline + "' (expected A1..A4)");
  c.baseline_target = {0.01, 2.0, 1.0};
  c.source_covariates = CovariateDesign::preset("C1");
  c.target_covariates = CovariateDesign::preset(covariates);
  return c;
}

Cohort generate_cohort(const ScenarioConfig& c, Population which, SplitMix64& rng,
                       long size) {
  const bool src = which == Population::Source;
  const long n = size > 0 ? size : (src ? c.n_source : c.m_target);
  if (n < 1) throw InputError("cohort size must be positive");
  const CovariateDesign& design = src ? c.source_covariates : c.target_covariates;
  Weibull base = src ? c.baseline_source : c.baseline_target;
  Weibull comp = base;
  if (c.competing) {
    base.kappa = c.competing->kappa_event;
    comp.kappa = c.competing->kappa_competing;
  }
  const int p = static_cast<int>(c.beta0.size());
  if (p != 2) throw InputError("simulation designs use two covariates");

  Eigen::VectorXd entry = Eigen::VectorXd::Zero(n), exit(n);
  Eigen::MatrixXd Z(n, 2);
  std::vector<EventCode> ev(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    Eigen::Vector2d z = design.draw(rng);
    Z.row(i) = z.transpose();
    const double T = base.inverse(-std::log(rng.uniform()) * std::exp(-c.beta0.dot(z)));
    double Tc = std::numeric_limits<double>::infinity();
    if (c.competing)
      Tc = comp.inverse(-std::log(rng.uniform()) *
                        std::exp(-c.competing->beta_c.dot(z)));
    double C = rng.normal(c.censor_mean + c.censor_zeta * z[0], c.censor_sd);
    C = std::clamp(C, c.censor_min, c.censor_max);
    double X = C;
    EventCode code = EventCode::Censored;
    if (T <= X && T <= Tc) {
      X = T;
      code = EventCode::EventOfInterest;
    } else if (Tc < X) {
      X = Tc;
      code = EventCode::Competing;
    }
    exit[i] = c.round_times ? round_time(X) : X;
    ev[static_cast<std::size_t>(i)] = code;
  }
  return Cohort(std::move(entry), std::move(exit), std::move(ev), std::move(Z),
                {"z1", "z2"});
}

TargetSummary summarize_target(const Cohort& cohort, const std::vector<double>& times,
                               const std::vector<ConstraintItem>& items,
                               SurvivalSource source) {
  TargetSummary sm;
  sm.times = times;
  sm.m = cohort.size();
  const Eigen::Index s = static_cast<Eigen::Index>(times.size());
  sm.survival.resize(s);
  sm.survival_variance.resize(s);
  if (s) {
    KaplanMeier km;
    NelsonAalen na;
    if (source == SurvivalSource::KaplanMeier)
      km = kaplan_meier(cohort);
    else
      na = nelson_aalen(cohort);
    for (Eigen::Index k = 0; k < s; ++k) {
      const double t = times[static_cast<std::size_t>(k)];
      const bool at_risk = ((cohort.entry().array() < t) &&
                            (cohort.exit().array() >= t)).any();
      if (!at_risk) {
        std::ostringstream os;
        os << "no subjects at risk at t = " << t;
        throw InputError(os.str());
      }
      if (source == SurvivalSource::KaplanMeier) {
        sm.survival[k] = km.survival(t);
        sm.survival_variance[k] = km.variance(t);
      } else {
        sm.survival[k] = std::exp(-na.cumhaz(t));
        sm.survival_variance[k] = sm.survival[k] * sm.survival[k] * na.variance(t);
      }
    }
    if (source == SurvivalSource::KaplanMeier) {
      sm.survival_covariance = km.covariance(times);
    } else {
      Eigen::MatrixXd cov(s, s);
      for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index b = 0; b < s; ++b)
          cov(a, b) = sm.survival[a] * sm.survival[b] *
                      na.variance(std::min(times[static_cast<std::size_t>(a)],
                                           times[static_cast<std::size_t>(b)]));
      sm.survival_covariance = cov;
    }
  }
  if (!items.empty()) {
    Eigen::MatrixXd H = evaluate_constraints(cohort.covariates(), items);
    ConstraintSpec spec;
    spec.items = items;
    spec.targets = H.colwise().mean().transpose();
    const double m = static_cast<double>(H.rows());
    Eigen::MatrixXd Hc = H.rowwise() - spec.targets.transpose();
    Eigen::MatrixXd cov = m > 1 ? Eigen::MatrixXd(Hc.transpose() * Hc / (m - 1.0))
                                : Eigen::MatrixXd::Zero(H.cols(), H.cols());
    spec.target_covariance = cov / m;
    spec.target_variances = cov.diagonal() / m;
    spec.m = cohort.size();
    sm.constraints = std::move(spec);
  }
  return sm;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RECAL_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

ScenarioReport run_scenario(const ScenarioConfig& c,
                            const std::vector<double>& eval_times) {
  if (c.replicates < 1) throw InputError("replicates must be at least 1");
  if (eval_times.empty()) throw InputError("no evaluation times");
  const int R = c.replicates;
  std::vector<ReplicateOutput> reps(static_cast<std::size_t>(R));
  parallel_for(R, resolve_threads(c.threads), [&](int r) {
    reps[static_cast<std::size_t>(r)] = run_replicate(c, eval_times, r);
  });

  ScenarioReport rep;
  rep.replicates_requested = R;
  for (const auto& o : reps) {
    if (o.ok) {
      ++rep.replicates_used;
      rep.source_censoring += o.source_censoring;
      rep.target_event_fraction += o.target_event;
      rep.target_competing_fraction += o.target_competing;
    } else {
      ++rep.failures;
      rep.failure_messages.push_back(o.error);
    }
  }
  if (rep.failures * 100 >= R && rep.failures > 0) {
    std::ostringstream os;
    os << rep.failures << " of " << R << " replicates failed (limit is under 1%)";
    if (!rep.failure_messages.empty()) os << "; first: " << rep.failure_messages.front();
    throw NumericalError(os.str());
  }
  if (rep.replicates_used) {
    rep.source_censoring /= rep.replicates_used;
    rep.target_event_fraction /= rep.replicates_used;
    rep.target_competing_fraction /= rep.replicates_used;
  }
  for (const auto& set : c.constraint_sets) {
    Eigen::VectorXd mom(static_cast<Eigen::Index>(set.items.size()));
    for (std::size_t j = 0; j < set.items.size(); ++j)
      mom[static_cast<Eigen::Index>(j)] = c.target_covariates.moment(set.items[j]);
    rep.target_moments.emplace_back(set.label, mom);
  }

  const auto labels = estimator_labels(c);
  for (std::size_t e = 0; e < labels.size(); ++e) {
    std::vector<double> cads;
    for (const auto& o : reps)
      if (o.ok) cads.push_back(o.estimators[e].cad);
    const double cad = mean_of(cads);
    for (std::size_t k = 0; k < eval_times.size(); ++k) {
      const double truth = truth_at(c, eval_times[k]);
      std::vector<double> est, se;
      double cov = 0.0, sq = 0.0;
      for (const auto& o : reps) {
        if (!o.ok) continue;
        const auto& eo = o.estimators[e];
        est.push_back(eo.est[k]);
        se.push_back(eo.se[k]);
        cov += eo.covered[k];
        sq += (eo.est[k] - truth) * (eo.est[k] - truth);
      }
      MetricsRow row;
      row.estimator = labels[e];
      row.time = eval_times[k];
      row.truth = truth;
      row.mean = mean_of(est);
      row.pbias = (row.mean - truth) / truth * 100.0;
      row.esd = sd_of(est);
      row.ase = mean_of(se);
      row.smse = std::sqrt(sq / static_cast<double>(est.size()));
      row.cp = 100.0 * cov / static_cast<double>(est.size());
      row.cad = cad;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

std::vector<ContourCell> run_competing_contour(
    const ScenarioConfig& base, const std::vector<double>& kappa_event,
    const std::vector<double>& kappa_competing,
    const std::vector<Eigen::VectorXd>& beta_c, const std::vector<double>& eval_times) {
  if (base.constraint_sets.empty())
    throw InputError("contour needs at least one constraint set");
  std::vector<ContourCell> cells;
  std::uint64_t cell_index = 0;
  for (const auto& bc : beta_c) {
    for (double kc : kappa_competing) {
      for (double ke : kappa_event) {
        ScenarioConfig c = base;
        c.competing = CompetingDesign{ke, kc, bc};
        c.constraint_sets = {base.constraint_sets.back()};
        c.include_breslow = false;
        c.include_unweighted = false;
        c.cad_horizon = 0;
        c.seed = substream_seed(base.seed, 0x100000ULL + cell_index);
        ScenarioReport rep = run_scenario(c, eval_times);
        ContourCell cell;
        cell.kappa_event = ke;
        cell.kappa_competing = kc;
        cell.beta_c = bc;
        cell.p_event = rep.target_event_fraction;
        cell.ratio = rep.target_event_fraction > 0.0
                         ? rep.target_competing_fraction / rep.target_event_fraction
                         : kNaN;
        cell.failures = rep.failures;
        cell.min_cp = 100.0;
        for (const auto& row : rep.rows) {
          cell.max_pbias = std::max(cell.max_pbias, std::abs(row.pbias));
          cell.min_cp = std::min(cell.min_cp, row.cp);
        }
        // Correlation of the risk score with the latent competing time.
        SplitMix64 rng(substream_seed(c.seed, 0xC022ULL));
        Weibull comp = c.baseline_target;
        comp.kappa = kc;
        const int N = 100000;
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        int used = 0;
        for (int i = 0; i < N; ++i) {
          Eigen::Vector2d z = c.target_covariates.draw(rng);
          const double x = c.beta0.dot(z);
          const double y = comp.inverse(-std::log(rng.uniform()) * std::exp(-bc.dot(z)));
          if (!std::isfinite(y)) continue;
          sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
          ++used;
        }
        if (used > 1) {
          const double nn = used;
          const double cxy = sxy / nn - (sx / nn) * (sy / nn);
          const double vx = sxx / nn - (sx / nn) * (sx / nn);
          const double vy = syy / nn - (sy / nn) * (sy / nn);
          cell.corr = cxy / std::sqrt(vx * vy);
        } else {
          cell.corr = kNaN;
        }
        cells.push_back(std::move(cell));
        ++cell_index;
      }
    }
  }
  return cells;
}

StepFunction aalen_johansen(const Cohort& cohort, EventCode cause) {
  const int n = cohort.size();
  std::vector<double> t_any;
  for (int i = 0; i < n; ++i)
    if (cohort.event(i) != EventCode::Censored) t_any.push_back(cohort.exit()[i]);
  std::sort(t_any.begin(), t_any.end());
  t_any.erase(std::unique(t_any.begin(), t_any.end()), t_any.end());
  std::vector<double> exits(cohort.exit().data(), cohort.exit().data() + n);
  std::vector<double> entries(cohort.entry().data(), cohort.entry().data() + n);
  std::sort(exits.begin(), exits.end());
  std::sort(entries.begin(), entries.end());
  std::vector<double> d_all(t_any.size(), 0.0), d_c(t_any.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    if (cohort.event(i) == EventCode::Censored) continue;
    auto it = std::lower_bound(t_any.begin(), t_any.end(), cohort.exit()[i]);
    const std::size_t k = static_cast<std::size_t>(it - t_any.begin());
    d_all[k] += 1.0;
    if (cohort.event(i) == cause) d_c[k] += 1.0;
  }
  std::vector<double> cif(t_any.size());
  double surv = 1.0, acc = 0.0;
  for (std::size_t k = 0; k < t_any.size(); ++k) {
    const double u = t_any[k];
    const double nu =
        static_cast<double>(exits.end() - std::lower_bound(exits.begin(), exits.end(), u)) -
        static_cast<double>(entries.end() - std::lower_bound(entries.begin(), entries.end(), u));
    if (nu <= 0.0) throw NumericalError("risk set is empty at an event time");
    acc += surv * d_c[k] / nu;
    surv *= 1.0 - d_all[k] / nu;
    cif[k] = acc;
  }
  return StepFunction(std::move(t_any), std::move(cif), 0.0);
}

RealLikeConfig real_like_preset() {
  RealLikeConfig c;
  c.names = {"endoscopy", "relatives", "exercise_0_2", "exercise_gt2",
             "nsaid",     "vegetable", "bmi_ge30",     "estrogen"};
  c.source_prevalence.resize(8);
  c.source_prevalence << 0.562, 0.147, 0.149, 0.121, 0.850, 0.530, 0.228, 0.449;
  c.target_prevalence.resize(8);
  c.target_prevalence << 0.377, 0.119, 0.339, 0.145, 0.246, 0.464, 0.241, 0.083;
  Eigen::VectorXd hr(8), hr_death(8);
  hr << 0.79, 1.24, 0.99, 0.83, 0.76, 0.94, 1.39, 0.87;
  hr_death << 1.0, 1.0, 0.9, 0.8, 1.3, 0.95, 1.5, 0.9;
  c.beta = hr.array().log().matrix();
  c.beta_death = hr_death.array().log().matrix();
  // Time is years since age 50.
  c.target_baseline = {0.00315, 1.62, 1.0};
  c.source_baseline = {0.00946, 2.41, 1.0};
  c.source_death = {0.0220, 3.0, 1.0};
  c.target_death = {0.0216, 3.0, 1.0};
  for (int j = 0; j < 8; ++j) c.constraints.push_back(ConstraintItem::raw(j));
  for (int t = 1; t <= 10; ++t) c.times.push_back(t);
  c.profile = Eigen::VectorXd::Zero(8);
  c.profile[1] = 1.0;
  c.profile[6] = 1.0;
  return c;
}

Cohort generate_real_like(const RealLikeConfig& c, Population which, SplitMix64& rng) {
  const bool src = which == Population::Source;
  const long n = src ? c.n_source : c.m_target;
  const Eigen::VectorXd& prev = src ? c.source_prevalence : c.target_prevalence;
  const Weibull& base = src ? c.source_baseline : c.target_baseline;
  const Weibull& death = src ? c.source_death : c.target_death;
  const double entry_max = src ? c.source_entry_max : c.target_entry_max;
  const double f_lo = src ? c.source_followup_min : c.target_followup_min;
  const double f_hi = src ? c.source_followup_max : c.target_followup_max;
  const Eigen::Index p = prev.size();
  const int a = c.exclusive_pair.first, b = c.exclusive_pair.second;

  Eigen::VectorXd entry(n), exit(n);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, p);
  std::vector<EventCode> ev(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (j == a || j == b) continue;
      Z(i, j) = rng.bernoulli(prev[j]) ? 1.0 : 0.0;
    }
    if (a >= 0 && b >= 0) {
      const double u = rng.uniform();
      if (u < prev[a])
        Z(i, a) = 1.0;
      else if (u < prev[a] + prev[b])
        Z(i, b) = 1.0;
    }
    const double L = entry_max * rng.uniform();
    const double r = std::exp(Z.row(i).dot(c.beta));
    const double rd = std::exp(Z.row(i).dot(c.beta_death));
    // Event-free at entry: draw residual times given survival to L.
    const double T = base.inverse(base.cumhaz(L) - std::log(rng.uniform()) / r);
    const double D = death.inverse(death.cumhaz(L) - std::log(rng.uniform()) / rd);
    const double C = L + f_lo + (f_hi - f_lo) * rng.uniform();
    double X = C;
    EventCode code = EventCode::Censored;
    if (T <= X && T <= D) {
      X = T;
      code = EventCode::EventOfInterest;
    } else if (D < X) {
      X = D;
      code = EventCode::Competing;
    }
    entry[i] = L;
    exit[i] = X;
    ev[static_cast<std::size_t>(i)] = code;
  }
  return Cohort(std::move(entry), std::move(exit), std::move(ev), std::move(Z), c.names);
}

RealLikeReport run_real_like(const RealLikeConfig& c) {
  const int R = c.replicates;
  std::vector<double> risk(static_cast<std::size_t>(R), kNaN), se(static_cast<std::size_t>(R), kNaN);
  std::vector<char> ok(static_cast<std::size_t>(R), 0);
  parallel_for(R, resolve_threads(c.threads), [&](int r) {
    try {
      SplitMix64 rng(substream_seed(c.seed, static_cast<std::uint64_t>(r)));
      Cohort src = generate_real_like(c, Population::Source, rng);
      Cohort tgt = generate_real_like(c, Population::Target, rng);
      CoxFit fit = fit_cox(src);
      TargetSummary sm = summarize_target(tgt, c.times, c.constraints);
      RecalOptions opt;
      opt.diag_approx = true;
      RecalResult res = recalibrate(src, fit, sm, Method::Weighted, opt);
      NelsonAalen na = nelson_aalen(tgt, EventCode::Competing);
      CompetingHazard comp{na.cumhaz, na.variance, std::nullopt};
      AbsoluteRiskInput in = make_risk_input(fit, res, comp, c.profile, c.t0, c.t1);
      risk[static_cast<std::size_t>(r)] = absolute_risk(in);
      se[static_cast<std::size_t>(r)] =
          std::sqrt(absolute_risk_variance(in, GradientMode::Analytic));
      ok[static_cast<std::size_t>(r)] = 1;
    } catch (const std::exception&) {
      ok[static_cast<std::size_t>(r)] = 0;
    }
  });
  RealLikeReport rep;
  rep.truth_lambda_t1 = c.target_baseline.cumhaz(c.t1);
  for (int r = 0; r < R; ++r) {
    if (!ok[static_cast<std::size_t>(r)]) {
      ++rep.failures;
      continue;
    }
    rep.risk.push_back(risk[static_cast<std::size_t>(r)]);
    rep.risk_se.push_back(se[static_cast<std::size_t>(r)]);
  }
  rep.mc_sd = sd_of(rep.risk);
  rep.mean_se = mean_of(rep.risk_se);
  return rep;
}

}  // namespace recal
