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

#include "recal_cli/cli.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "recal/absrisk.hpp"
#include "recal/cox.hpp"
#include "recal/errors.hpp"
#include "recal/recalib.hpp"
#include "recal/serialize.hpp"
#include "recal/simlab.hpp"

namespace recal::cli {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration: CLI flags > --config JSON > built-in defaults.

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw InputError("config: unsupported value " + v.dump());
}

void apply_config(CLI::App* sub, const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw InputError("config '" + path + "' must be a JSON object");
  for (const auto& [key, val] : doc.items()) {
    if (key == "command" || key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw InputError("config '" + path + "': unknown option '" + key + "'");
    if (opt->count() > 0 || val.is_null()) continue;
    if (val.is_array()) {
      for (const auto& x : val) opt->add_result(scalar_text(x));
    } else {
      opt->add_result(scalar_text(val));
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw InputError("config '" + path + "': option '" + key + "': " + e.what());
    }
  }
}

void require(const std::string& value, const char* name) {
  if (value.empty()) throw InputError(std::string("missing required option --") + name);
}

std::string comment_line(const json& config) { return "# " + config.dump() + "\n"; }

std::string csv_number(double x) { return std::isfinite(x) ? format_double(x) : "NA"; }

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text_file(path, text);
}

void check_names(const std::vector<std::string>& model, const std::vector<std::string>& data,
                 const std::string& what) {
  if (model == data) return;
  std::ostringstream os;
  os << "covariate names in " << what << " do not match the model (model:";
  for (const auto& n : model) os << ' ' << n;
  os << "; " << what << ':';
  for (const auto& n : data) os << ' ' << n;
  os << ')';
  throw InputError(os.str());
}

void print_warnings(const Warnings& w, std::ostream& err) {
  for (const auto& s : w) err << "warning: " << s << '\n';
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string cohort, out, config;
  double tol = 1e-8;
  int max_iter = 50;
};

void setup_fit(CLI::App& app, FitArgs& a) {
  auto* s = app.add_subcommand("fit", "Fit a Cox model to a cohort CSV");
  s->add_option("--cohort", a.cohort, "Cohort CSV (entry_age,exit_age,event,covariates...)");
  s->add_option("--out", a.out, "Model JSON output path");
  s->add_option("--tol", a.tol, "Convergence tolerance on max |score|")->check(CLI::PositiveNumber);
  s->add_option("--max-iter", a.max_iter, "Newton iteration limit")->check(CLI::NonNegativeNumber);
  s->add_option("--config", a.config, "JSON file with option defaults");
}

int cmd_fit(const FitArgs& a, const json& config, std::ostream& out) {
  require(a.cohort, "cohort");
  Cohort cohort = read_cohort_csv_file(a.cohort);
  CoxOptions opt;
  opt.tol = a.tol;
  opt.max_iter = a.max_iter;
  CoxFit fit = fit_cox(cohort, opt);
  if (!a.out.empty()) write_text_file(a.out, cox_fit_to_json(fit, config.dump()));

  out << "Cox model: n = " << cohort.size()
      << ", events = " << cohort.count(EventCode::EventOfInterest)
      << ", iterations = " << fit.iterations
      << ", log partial likelihood = " << format_double(fit.log_partial_likelihood) << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %12s %12s %10s %10s %10s\n", "covariate", "beta",
                "se", "HR", "HR_lo", "HR_hi");
  out << line;
  const double z = normal_quantile_two_sided(0.95);
  for (int j = 0; j < cohort.dim(); ++j) {
    const double b = fit.beta_hat[j], se = std::sqrt(fit.sigma_beta(j, j));
    std::snprintf(line, sizeof line, "%-20s %12.6f %12.6f %10.3f %10.3f %10.3f\n",
                  fit.covariate_names[static_cast<std::size_t>(j)].c_str(), b, se,
                  std::exp(b), std::exp(b - z * se), std::exp(b + z * se));
    out << line;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeArgs {
  std::string cohort, constraints, out, config;
  std::string survival = "km";
  std::vector<double> times;
};

void setup_summarize(CLI::App& app, SummarizeArgs& a) {
  auto* s = app.add_subcommand(
      "summarize", "Build target summary statistics (survival and moments) from a cohort CSV");
  s->add_option("--cohort", a.cohort, "Target cohort CSV");
  s->add_option("--times", a.times, "Comma-separated evaluation times")->delimiter(',');
  s->add_option("--constraints", a.constraints, "Constraint JSON (items only are needed)");
  s->add_option("--survival", a.survival, "km (Kaplan-Meier) or na (exp of Nelson-Aalen)")
      ->check(CLI::IsMember({"km", "na"}));
  s->add_option("--out", a.out, "Summary JSON output path (default: stdout)");
  s->add_option("--config", a.config, "JSON file with option defaults");
}

int cmd_summarize(const SummarizeArgs& a, const json& config, std::ostream& out) {
  require(a.cohort, "cohort");
  if (a.times.empty()) throw InputError("missing required option --times");
  Cohort cohort = read_cohort_csv_file(a.cohort);
  std::vector<ConstraintItem> items;
  if (!a.constraints.empty()) {
    items = constraint_spec_from_json(read_text_file(a.constraints)).items;
    ConstraintSpec probe;
    probe.items = items;
    probe.validate(cohort.dim(), false);
  }
  TargetSummary s = summarize_target(
      cohort, a.times, items,
      a.survival == "na" ? SurvivalSource::NelsonAalen : SurvivalSource::KaplanMeier);
  json doc = json::parse(target_summary_to_json(s));
  doc["config"] = config;
  write_or_print(a.out, doc.dump(2) + "\n", out);
  return kOk;
}

// ---------------------------------------------------------------------------
// recalibrate

struct RecalArgs {
  std::string cohort, model, summary, constraints, out, csv, config;
  std::string mode = "auto";
  double ci_level = 0.95;
  bool diag_approx = false;
  bool isotonic = false;
  bool strict = false;
  double root_tol = 1e-12;
  double el_tol = 1e-10;
};

void setup_recal(CLI::App& app, RecalArgs& a) {
  auto* s = app.add_subcommand("recalibrate",
                               "Recalibrate the baseline cumulative hazard to a target");
  s->add_option("--cohort", a.cohort, "Source cohort CSV used to fit the model");
  s->add_option("--model", a.model, "Model JSON from `recal fit`");
  s->add_option("--summary", a.summary, "Target summary JSON");
  s->add_option("--constraints", a.constraints, "Constraint JSON overriding the summary's");
  s->add_option("--mode", a.mode, "auto, unweighted, weighted or both")
      ->check(CLI::IsMember({"auto", "unweighted", "weighted", "both"}));
  s->add_option("--ci-level", a.ci_level, "Confidence level")
      ->check(CLI::Range(0.0, 1.0));
  s->add_flag("--diag-approx", a.diag_approx,
              "Use only the diagonal of var(mu_hat) and ignore cov(mu_hat, S_hat)");
  s->add_flag("--isotonic", a.isotonic, "Project estimates onto nondecreasing sequences");
  s->add_flag("--strict-feasibility", a.strict, "Exact LP feasibility check");
  s->add_option("--root-tol", a.root_tol, "Root-finding tolerance")->check(CLI::PositiveNumber);
  s->add_option("--el-tol", a.el_tol, "Weight solver tolerance")->check(CLI::PositiveNumber);
  s->add_option("--out", a.out, "Result JSON output path");
  s->add_option("--csv", a.csv, "Tidy CSV output path");
  s->add_option("--config", a.config, "JSON file with option defaults");
}

int cmd_recal(const RecalArgs& a, const json& config, std::ostream& out, std::ostream& err) {
  require(a.cohort, "cohort");
  require(a.model, "model");
  require(a.summary, "summary");
  if (!(a.ci_level > 0.0 && a.ci_level < 1.0)) throw InputError("--ci-level must lie in (0, 1)");
  Cohort cohort = read_cohort_csv_file(a.cohort);
  CoxFit fit = cox_fit_from_json(read_text_file(a.model));
  check_names(fit.covariate_names, cohort.covariate_names(), "the cohort");
  TargetSummary summary = target_summary_from_json(read_text_file(a.summary));
  if (!a.constraints.empty())
    summary.constraints = constraint_spec_from_json(read_text_file(a.constraints));

  std::vector<Method> methods;
  if (a.mode == "unweighted") {
    methods = {Method::Unweighted};
  } else if (a.mode == "weighted") {
    methods = {Method::Weighted};
  } else if (a.mode == "both") {
    methods = {Method::Unweighted, Method::Weighted};
  } else {
    methods = {Method::Unweighted};
    if (summary.constraints) methods.push_back(Method::Weighted);
  }

  RecalOptions opt;
  opt.ci_level = a.ci_level;
  opt.diag_approx = a.diag_approx;
  opt.isotonic = a.isotonic;
  opt.root_tol = a.root_tol;
  opt.el.tol = a.el_tol;
  opt.el.strict_feasibility = a.strict;

  std::vector<RecalResult> results;
  for (Method m : methods) {
    RecalResult r = recalibrate(cohort, fit, summary, m, opt);
    if (m == Method::Weighted && a.diag_approx)
      r.warnings.push_back(
          "diagonal approximation: off-diagonal var(mu_hat) and cov(mu_hat, S_hat) set to 0");
    print_warnings(r.warnings, err);
    results.push_back(std::move(r));
  }
  if (!a.out.empty()) write_text_file(a.out, recal_results_to_json(results, config.dump()));
  if (!a.csv.empty()) {
    std::ostringstream os;
    os << comment_line(config);
    write_recal_csv(os, results);
    write_text_file(a.csv, os.str());
  }
  if (a.out.empty() && a.csv.empty()) {
    write_recal_csv(out, results);
  } else {
    for (const auto& r : results)
      out << to_string(r.method) << ": " << r.times.size() << " time points\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model, recal, competing, competing_cohort, subjects, out, config;
  std::string method = "auto";
  std::string gradient = "fd";
  double ci_level = 0.95;
  bool annual = false;
  int threads = 0;
};

void setup_predict(CLI::App& app, PredictArgs& a) {
  auto* s = app.add_subcommand("predict", "Absolute risk for each subject in a CSV");
  s->add_option("--model", a.model, "Model JSON from `recal fit`");
  s->add_option("--recal", a.recal, "Result JSON from `recal recalibrate`");
  s->add_option("--method", a.method, "auto, weighted or unweighted")
      ->check(CLI::IsMember({"auto", "weighted", "unweighted"}));
  s->add_option("--competing", a.competing,
                "Competing cumulative hazard JSON (knots, values, optional variance)");
  s->add_option("--competing-cohort", a.competing_cohort,
                "Cohort CSV whose event-2 Nelson-Aalen estimate is the competing hazard");
  s->add_option("--subjects", a.subjects, "Subjects CSV: model covariates plus t0,t1");
  s->add_option("--out", a.out, "Output CSV path (default: stdout)");
  s->add_option("--ci-level", a.ci_level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  s->add_flag("--annual", a.annual, "Interpolate the baseline onto an annual grid");
  s->add_option("--gradient", a.gradient, "fd (finite differences) or analytic")
      ->check(CLI::IsMember({"fd", "analytic"}));
  s->add_option("--threads", a.threads, "Worker threads (0: RECAL_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--config", a.config, "JSON file with option defaults");
}

CompetingHazard load_competing(const PredictArgs& a) {
  if (!a.competing.empty() && !a.competing_cohort.empty())
    throw InputError("give at most one of --competing and --competing-cohort");
  CompetingHazard c;
  if (!a.competing_cohort.empty()) {
    NelsonAalen na = nelson_aalen(read_cohort_csv_file(a.competing_cohort), EventCode::Competing);
    c.cumhaz = na.cumhaz;
    c.variance = na.variance;
    return c;
  }
  if (a.competing.empty()) return c;  // no competing risk
  const std::string text = read_text_file(a.competing);
  c.cumhaz = step_function_from_json(text);
  json doc = json::parse(text);
  if (doc.contains("variance")) {
    auto v = doc.at("variance").get<std::vector<double>>();
    if (v.size() != c.cumhaz.size())
      throw InputError("competing hazard: variance length must match knots");
    c.variance = StepFunction(c.cumhaz.knots(), std::move(v), 0.0);
  }
  if (doc.contains("beta_c")) {
    auto b = doc.at("beta_c").get<std::vector<double>>();
    c.beta_c = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  return c;
}

struct SubjectRow {
  Eigen::VectorXd z;
  double t0 = 0.0, t1 = 0.0;
};

std::vector<SubjectRow> read_subjects(const std::string& path,
                                      const std::vector<std::string>& names) {
  std::istringstream in(read_text_file(path));
  std::string line;
  long lineno = 0;
  std::vector<std::string> header;
  std::vector<int> col_of;  // model covariate -> column
  int c_t0 = -1, c_t1 = -1;
  std::vector<SubjectRow> rows;
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (!l.empty() && l.back() == ',') f.emplace_back();
    return f;
  };
  auto number = [&](const std::string& s, const std::string& col) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw InputError(path + ":" + std::to_string(lineno) + ": column '" + col +
                       "' is not a finite number");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line);
    if (header.empty()) {
      header = f;
      std::vector<std::string> covs;
      for (std::size_t k = 0; k < f.size(); ++k) {
        if (f[k] == "t0")
          c_t0 = static_cast<int>(k);
        else if (f[k] == "t1")
          c_t1 = static_cast<int>(k);
        else
          covs.push_back(f[k]);
      }
      if (c_t0 < 0 || c_t1 < 0)
        throw InputError(path + ":" + std::to_string(lineno) +
                         ": header must contain columns 't0' and 't1'");
      std::vector<std::string> sorted_model = names, sorted_data = covs;
      std::sort(sorted_model.begin(), sorted_model.end());
      std::sort(sorted_data.begin(), sorted_data.end());
      check_names(sorted_model, sorted_data, "the subjects file");
      for (const auto& n : names)
        col_of.push_back(static_cast<int>(std::find(f.begin(), f.end(), n) - f.begin()));
      continue;
    }
    if (f.size() != header.size())
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(f.size()));
    SubjectRow r;
    r.z.resize(static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j)
      r.z[static_cast<Eigen::Index>(j)] =
          number(f[static_cast<std::size_t>(col_of[j])], names[j]);
    r.t0 = number(f[static_cast<std::size_t>(c_t0)], "t0");
    r.t1 = number(f[static_cast<std::size_t>(c_t1)], "t1");
    if (!(r.t1 > r.t0) || r.t0 < 0.0)
      throw InputError(path + ":" + std::to_string(lineno) + ": need 0 <= t0 < t1");
    rows.push_back(std::move(r));
  }
  if (header.empty()) throw InputError(path + ": missing header");
  return rows;
}

int cmd_predict(const PredictArgs& a, const json& config, std::ostream& out,
                std::ostream& err) {
  require(a.model, "model");
  require(a.recal, "recal");
  require(a.subjects, "subjects");
  if (!(a.ci_level > 0.0 && a.ci_level < 1.0)) throw InputError("--ci-level must lie in (0, 1)");
  CoxFit fit = cox_fit_from_json(read_text_file(a.model));
  auto results = recal_results_from_json(read_text_file(a.recal));
  const RecalResult* chosen = nullptr;
  for (const auto& r : results) {
    const bool want_w = a.method == "weighted" || a.method == "auto";
    if (a.method == "unweighted" && r.method == Method::Unweighted) chosen = &r;
    if (want_w && r.method == Method::Weighted) chosen = &r;
  }
  if (!chosen && a.method == "auto" && !results.empty()) chosen = &results.front();
  if (!chosen) throw InputError("no " + a.method + " result in '" + a.recal + "'");
  if (chosen->cov_beta_lambda.rows() != fit.beta_hat.size())
    throw InputError("recalibration result does not match the model dimension");

  CompetingHazard comp = load_competing(a);
  auto rows = read_subjects(a.subjects, fit.covariate_names);
  const GradientMode mode =
      a.gradient == "analytic" ? GradientMode::Analytic : GradientMode::FiniteDifference;
  const double z = normal_quantile_two_sided(a.ci_level);

  const std::size_t n = rows.size();
  std::vector<double> risk(n), se(n);
  std::vector<std::string> errors(n);
  std::vector<Warnings> warns(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        AbsoluteRiskInput in =
            make_risk_input(fit, *chosen, comp, rows[i].z, rows[i].t0, rows[i].t1, a.annual);
        risk[i] = absolute_risk(in, &warns[i]);
        se[i] = std::sqrt(std::max(0.0, absolute_risk_variance(in, mode)));
      } catch (const NumericalError&) {
        // Usually a discrete sum above 1 on a coarse grid. The row is
        // reported as NA; the rest of the batch is still valid.
        risk[i] = se[i] = std::numeric_limits<double>::quiet_NaN();
        warns[i].push_back(
            "absolute risk is not a valid probability on this grid; written as NA "
            "(--annual gives a finer grid)");
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(resolve_threads(a.threads),
                                                static_cast<int>(std::max<std::size_t>(n, 1))));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty())
      throw InputError("subject " + std::to_string(i + 1) + ": " + errors[i]);
  std::map<std::string, int> seen;
  for (const auto& w : warns)
    for (const auto& s : w) seen[s]++;
  for (const auto& [s, count] : seen) err << "warning: " << s << " (" << count << " subjects)\n";

  std::ostringstream os;
  os << comment_line(config) << "risk,se,ci_lo,ci_hi\n";
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(risk[i])) {
      os << "NA,NA,NA,NA\n";
      continue;
    }
    os << format_double(risk[i]) << ',' << format_double(se[i]) << ','
       << format_double(std::clamp(risk[i] - z * se[i], 0.0, 1.0)) << ','
       << format_double(std::clamp(risk[i] + z * se[i], 0.0, 1.0)) << '\n';
  }
  write_or_print(a.out, os.str(), out);
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string scenario = "A1", covariates = "C1", out, report, config;
  int n = 1000;
  long m = 100000;
  int reps = 500;
  std::uint64_t seed = 42;
  double zeta = -5.0;
  double censor_sd = 15.0;
  std::vector<double> times{20.0, 40.0, 60.0};
  int threads = 0;
  int cad_horizon = 60;
  bool full_covariance = false;
  bool no_round = false;
  // Contour mode.
  bool contour = false;
  std::vector<double> kappa_event{0.25, 1.0, 4.0};
  std::vector<double> kappa_competing{0.25, 1.0, 4.0};
  std::vector<double> beta_c{0.13976194237515863};
  // Replicate dump.
  int dump_replicate = -1;
  std::string dump_dir = ".";
  std::string dump_set = "Weighted-2";
};

void setup_simulate(CLI::App& app, SimulateArgs& a) {
  auto* s = app.add_subcommand("simulate", "Monte-Carlo evaluation of the estimators");
  s->add_option("--scenario", a.scenario, "Source baseline A1..A4")
      ->check(CLI::IsMember({"A1", "A2", "A3", "A4"}));
  s->add_option("--covariates", a.covariates, "Target covariate design C1..C4")
      ->check(CLI::IsMember({"C1", "C2", "C3", "C4"}));
  s->add_option("--n", a.n, "Source cohort size")->check(CLI::PositiveNumber);
  s->add_option("--m", a.m, "Target cohort size")->check(CLI::PositiveNumber);
  s->add_option("--reps", a.reps, "Replicates")->check(CLI::PositiveNumber);
  s->add_option("--seed", a.seed, "Master seed");
  s->add_option("--zeta", a.zeta, "Censoring shift for Z1");
  s->add_option("--censor-sd", a.censor_sd, "Standard deviation of latent censoring")
      ->check(CLI::PositiveNumber);
  s->add_option("--times", a.times, "Evaluation times")->delimiter(',');
  s->add_option("--threads", a.threads, "Worker threads (0: RECAL_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--cad-horizon", a.cad_horizon, "Upper time of the CAD sum (0 disables)")
      ->check(CLI::NonNegativeNumber);
  s->add_flag("--full-covariance", a.full_covariance,
              "Use the full var(mu_hat) instead of its diagonal");
  s->add_flag("--no-round", a.no_round, "Keep continuous observed times");
  s->add_option("--out", a.out, "Metrics (or contour) CSV output path (default: stdout)");
  s->add_option("--report", a.report, "JSON run report path");
  s->add_flag("--contour", a.contour, "Competing-risk grid instead of a single scenario");
  s->add_option("--kappa-event", a.kappa_event, "Contour grid for the event scale")
      ->delimiter(',');
  s->add_option("--kappa-competing", a.kappa_competing, "Contour grid for the competing scale")
      ->delimiter(',');
  s->add_option("--beta-c", a.beta_c,
                "Contour values of the common competing log hazard ratio")
      ->delimiter(',');
  s->add_option("--dump-replicate", a.dump_replicate,
                "Write one replicate's source cohort and target summary, then exit");
  s->add_option("--dump-dir", a.dump_dir, "Directory for --dump-replicate files");
  s->add_option("--dump-set", a.dump_set, "Constraint set used in the dumped summary");
  s->add_option("--config", a.config, "JSON file with option defaults");
}

ScenarioConfig scenario_from(const SimulateArgs& a) {
  ScenarioConfig c = scenario_preset(a.scenario, a.covariates);
  c.n_source = a.n;
  c.m_target = a.m;
  c.replicates = a.reps;
  c.seed = a.seed;
  c.censor_zeta = a.zeta;
  c.censor_sd = a.censor_sd;
  c.threads = a.threads;
  c.cad_horizon = a.cad_horizon;
  c.diag_approx = !a.full_covariance;
  c.round_times = !a.no_round;
  return c;
}

int cmd_simulate(const SimulateArgs& a, const json& config, std::ostream& out,
                 std::ostream& err) {
  ScenarioConfig c = scenario_from(a);
  if (a.times.empty()) throw InputError("--times is empty");

  if (a.dump_replicate >= 0) {
    const ConstraintSet* set = nullptr;
    for (const auto& s : c.constraint_sets)
      if (s.label == a.dump_set) set = &s;
    if (!set) throw InputError("unknown constraint set '" + a.dump_set + "'");
    SplitMix64 rng(substream_seed(c.seed, static_cast<std::uint64_t>(a.dump_replicate)));
    Cohort src = generate_cohort(c, Population::Source, rng);
    Cohort tgt = generate_cohort(c, Population::Target, rng);
    std::filesystem::create_directories(a.dump_dir);
    std::ostringstream os;
    os << comment_line(config);
    write_cohort_csv(os, src);
    write_text_file(a.dump_dir + "/source.csv", os.str());
    write_text_file(a.dump_dir + "/target_summary.json",
                    target_summary_to_json(summarize_target(tgt, a.times, set->items)));
    out << "wrote " << a.dump_dir << "/source.csv and " << a.dump_dir
        << "/target_summary.json\n";
    return kOk;
  }

  std::ostringstream os;
  os << comment_line(config);
  json report = {{"config", config}};
  if (a.contour) {
    std::vector<Eigen::VectorXd> bc;
    for (double b : a.beta_c) bc.push_back(Eigen::VectorXd::Constant(2, b));
    auto cells = run_competing_contour(c, a.kappa_event, a.kappa_competing, bc, a.times);
    os << "kappa_event,kappa_competing,beta_c,p_event,ratio,corr,max_pbias,min_cp\n";
    json jc = json::array();
    for (const auto& cell : cells) {
      os << csv_number(cell.kappa_event) << ',' << csv_number(cell.kappa_competing) << ','
         << csv_number(cell.beta_c[0]) << ',' << csv_number(cell.p_event) << ','
         << csv_number(cell.ratio) << ',' << csv_number(cell.corr) << ','
         << csv_number(cell.max_pbias) << ',' << csv_number(cell.min_cp) << '\n';
      jc.push_back({{"kappa_event", cell.kappa_event}, {"failures", cell.failures}});
    }
    report["cells"] = jc;
  } else {
    ScenarioReport rep = run_scenario(c, a.times);
    for (const auto& m : rep.failure_messages) err << "warning: " << m << '\n';
    os << "estimator,time,truth,pbias,esd,ase,smse,cp,cad\n";
    for (const auto& r : rep.rows)
      os << r.estimator << ',' << csv_number(r.time) << ',' << csv_number(r.truth) << ','
         << csv_number(r.pbias) << ',' << csv_number(r.esd) << ',' << csv_number(r.ase)
         << ',' << csv_number(r.smse) << ',' << csv_number(r.cp) << ','
         << csv_number(r.cad) << '\n';
    report["replicates_requested"] = rep.replicates_requested;
    report["replicates_used"] = rep.replicates_used;
    report["failures"] = rep.failures;
    report["failure_messages"] = rep.failure_messages;
    report["source_censoring"] = rep.source_censoring;
    json moments = json::object();
    for (const auto& [label, v] : rep.target_moments)
      moments[label] = std::vector<double>(v.data(), v.data() + v.size());
    report["target_moments"] = moments;
  }
  write_or_print(a.out, os.str(), out);
  if (!a.report.empty()) write_text_file(a.report, report.dump(2) + "\n");
  return kOk;
}


json echo(const FitArgs& a) {
  return {{"command", "fit"}, {"cohort", a.cohort}, {"out", a.out}, {"tol", a.tol},
          {"max-iter", a.max_iter}};
}

json echo(const SummarizeArgs& a) {
  return {{"command", "summarize"}, {"cohort", a.cohort}, {"times", a.times},
          {"constraints", a.constraints}, {"survival", a.survival}, {"out", a.out}};
}

json echo(const RecalArgs& a) {
  return {{"command", "recalibrate"}, {"cohort", a.cohort}, {"model", a.model},
          {"summary", a.summary}, {"constraints", a.constraints}, {"mode", a.mode},
          {"ci-level", a.ci_level}, {"diag-approx", a.diag_approx},
          {"isotonic", a.isotonic}, {"strict-feasibility", a.strict},
          {"root-tol", a.root_tol}, {"el-tol", a.el_tol}, {"out", a.out}, {"csv", a.csv}};
}

json echo(const PredictArgs& a) {
  return {{"command", "predict"}, {"model", a.model}, {"recal", a.recal},
          {"method", a.method}, {"competing", a.competing},
          {"competing-cohort", a.competing_cohort}, {"subjects", a.subjects},
          {"out", a.out}, {"ci-level", a.ci_level}, {"annual", a.annual},
          {"gradient", a.gradient}, {"threads", a.threads}};
}

json echo(const SimulateArgs& a) {
  return {{"command", "simulate"}, {"scenario", a.scenario}, {"covariates", a.covariates},
          {"n", a.n}, {"m", a.m}, {"reps", a.reps}, {"seed", a.seed}, {"zeta", a.zeta},
          {"censor-sd", a.censor_sd}, {"times", a.times}, {"threads", a.threads},
          {"cad-horizon", a.cad_horizon}, {"full-covariance", a.full_covariance},
          {"no-round", a.no_round}, {"out", a.out}, {"report", a.report},
          {"contour", a.contour}, {"kappa-event", a.kappa_event},
          {"kappa-competing", a.kappa_competing}, {"beta-c", a.beta_c},
          {"dump-replicate", a.dump_replicate}, {"dump-dir", a.dump_dir},
          {"dump-set", a.dump_set}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recalibrate Cox-model baseline hazards to a target population"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitArgs fit;
  SummarizeArgs summ;
  RecalArgs rec;
  PredictArgs pred;
  SimulateArgs sim;
  setup_fit(app, fit);
  setup_summarize(app, summ);
  setup_recal(app, rec);
  setup_predict(app, pred);
  setup_simulate(app, sim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInput;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    const auto cfg_opt = sub->get_option("--config");
    if (cfg_opt->count() > 0) apply_config(sub, cfg_opt->as<std::string>());
    if (name == "fit") return cmd_fit(fit, echo(fit), out);
    if (name == "summarize") return cmd_summarize(summ, echo(summ), out);
    if (name == "recalibrate") return cmd_recal(rec, echo(rec), out, err);
    if (name == "predict") return cmd_predict(pred, echo(pred), out, err);
    if (name == "simulate") return cmd_simulate(sim, echo(sim), out, err);
    err << "error: unknown command " << name << '\n';
    return kInternal;
  } catch (const InfeasibleConstraint& e) {
    err << "error: " << e.what() << '\n';
    if (e.direction().size()) {
      err << "separating direction:";
      for (Eigen::Index j = 0; j < e.direction().size(); ++j)
        err << ' ' << format_double(e.direction()[j]);
      err << '\n';
    }
    return kInfeasible;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace recal::cli
