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

#include "recal/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "recal/errors.hpp"

namespace recal {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed ") + what + " JSON: " + e.what());
  }
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

// Row-major flattening.
json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(num(m(i, j)));
  return a;
}

const json& field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key))
    throw InputError(std::string(what) + ": missing field '" + key + "'");
  return j.at(key);
}

double get_num(const json& j, const char* what) {
  if (j.is_null()) return kNaN;
  if (!j.is_number()) throw InputError(std::string(what) + ": expected a number");
  return j.get<double>();
}

std::vector<double> get_std_vec(const json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string(what) + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(get_num(x, what));
  return out;
}

Eigen::VectorXd get_vec(const json& j, const char* what) {
  auto v = get_std_vec(j, what);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd get_mat(const json& j, Eigen::Index rows, Eigen::Index cols,
                        const char* what) {
  auto v = get_std_vec(j, what);
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw InputError(std::string(what) + ": expected " + std::to_string(rows * cols) +
                     " entries, found " + std::to_string(v.size()));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = v[static_cast<std::size_t>(i * cols + c)];
  return m;
}

json step_json(const StepFunction& f) {
  return {{"knots", vec_json(f.knots())}, {"values", vec_json(f.values())},
          {"pre", num(f.pre_value())}};
}

StepFunction step_from(const json& j, const char* what) {
  auto k = get_std_vec(field(j, "knots", what), what);
  auto v = get_std_vec(field(j, "values", what), what);
  const double pre = j.contains("pre") ? get_num(j.at("pre"), what) : 0.0;
  if (k.size() != v.size()) throw InputError(std::string(what) + ": knots/values length mismatch");
  return StepFunction(std::move(k), std::move(v), pre);
}

void attach_config(json& doc, const std::string& config_json) {
  if (config_json.empty()) return;
  json c = parse_json(config_json, "config");
  if (!c.is_object()) throw InputError("config must be a JSON object");
  doc["config"] = std::move(c);
}

const char* type_name(ConstraintType t) {
  switch (t) {
    case ConstraintType::RawMoment: return "raw_moment";
    case ConstraintType::SecondMoment: return "second_moment";
    case ConstraintType::ConditionalMoment: return "conditional_moment";
    case ConstraintType::ConditionalSecondMoment: return "conditional_second_moment";
    case ConstraintType::Indicator: return "indicator";
  }
  return "?";
}

ConstraintType type_from(const std::string& s) {
  if (s == "raw_moment") return ConstraintType::RawMoment;
  if (s == "second_moment") return ConstraintType::SecondMoment;
  if (s == "conditional_moment") return ConstraintType::ConditionalMoment;
  if (s == "conditional_second_moment") return ConstraintType::ConditionalSecondMoment;
  if (s == "indicator") return ConstraintType::Indicator;
  throw InputError("unknown constraint type '" + s + "'");
}

bool has_given(ConstraintType t) {
  return t == ConstraintType::ConditionalMoment ||
         t == ConstraintType::ConditionalSecondMoment || t == ConstraintType::Indicator;
}

json constraint_json(const ConstraintSpec& s) {
  json items = json::array();
  for (const auto& it : s.items) {
    json o = {{"type", type_name(it.type)}};
    if (it.type != ConstraintType::Indicator) o["j"] = it.j + 1;
    if (has_given(it.type)) o["given"] = {{"k", it.k + 1}, {"value", num(it.value)}};
    items.push_back(std::move(o));
  }
  json doc = {{"items", std::move(items)}};
  if (s.targets.size()) doc["targets"] = vec_json(s.targets);
  if (s.target_variances.size()) doc["target_variances"] = vec_json(s.target_variances);
  if (s.target_covariance) doc["target_covariance"] = mat_json(*s.target_covariance);
  doc["m"] = s.m;
  return doc;
}

int index_from(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw InputError(std::string("constraint item: '") + key + "' must be an integer");
  const int v = j.at(key).get<int>();
  if (v < 1) throw InputError(std::string("constraint item: '") + key + "' is 1-based");
  return v - 1;
}

ConstraintSpec constraint_from(const json& doc) {
  const char* what = "constraints";
  ConstraintSpec s;
  const json& items = field(doc, "items", what);
  if (!items.is_array()) throw InputError("constraints: 'items' must be an array");
  for (const auto& o : items) {
    if (!o.contains("type") || !o.at("type").is_string())
      throw InputError("constraint item: missing 'type'");
    ConstraintItem it;
    it.type = type_from(o.at("type").get<std::string>());
    it.j = it.type == ConstraintType::Indicator ? -1 : index_from(o, "j");
    if (has_given(it.type)) {
      const json& g = field(o, "given", "constraint item");
      it.k = index_from(g, "k");
      it.value = get_num(field(g, "value", "constraint item"), "value");
    }
    s.items.push_back(it);
  }
  const Eigen::Index q = static_cast<Eigen::Index>(s.items.size());
  if (doc.contains("targets")) s.targets = get_vec(doc.at("targets"), "targets");
  if (doc.contains("target_variances"))
    s.target_variances = get_vec(doc.at("target_variances"), "target_variances");
  else if (s.targets.size())
    s.target_variances = Eigen::VectorXd::Zero(s.targets.size());
  if (doc.contains("target_covariance"))
    s.target_covariance = get_mat(doc.at("target_covariance"), q, q, "target_covariance");
  if (doc.contains("m")) s.m = doc.at("m").get<long>();
  return s;
}

json summary_json(const TargetSummary& s) {
  json doc = {{"times", vec_json(s.times)},
              {"survival", vec_json(s.survival)},
              {"survival_variance", vec_json(s.survival_variance)},
              {"m", s.m}};
  if (s.survival_covariance) doc["survival_covariance"] = mat_json(*s.survival_covariance);
  if (s.mu_s_covariance) doc["mu_s_covariance"] = mat_json(*s.mu_s_covariance);
  if (s.constraints) doc["constraints"] = constraint_json(*s.constraints);
  return doc;
}

json result_json(const RecalResult& r) {
  json doc = {{"method", to_string(r.method)},
              {"times", vec_json(r.times)},
              {"lambda0", vec_json(r.lambda0)},
              {"se", vec_json(r.se)},
              {"ci_lower", vec_json(r.ci_lower)},
              {"ci_upper", vec_json(r.ci_upper)},
              {"ci_level", num(r.ci_level)},
              {"isotonic", r.isotonic},
              {"cov_lambda", mat_json(r.cov_lambda)},
              {"cov_beta_lambda", mat_json(r.cov_beta_lambda)},
              {"warnings", r.warnings}};
  if (r.gamma_hat) doc["gamma_hat"] = vec_json(*r.gamma_hat);
  return doc;
}

RecalResult result_from(const json& o) {
  const char* what = "recalibration result";
  RecalResult r;
  const std::string m = field(o, "method", what).get<std::string>();
  if (m == to_string(Method::Unweighted))
    r.method = Method::Unweighted;
  else if (m == to_string(Method::Weighted))
    r.method = Method::Weighted;
  else
    throw InputError("unknown method '" + m + "'");
  r.times = get_std_vec(field(o, "times", what), "times");
  const Eigen::Index s = static_cast<Eigen::Index>(r.times.size());
  r.lambda0 = get_vec(field(o, "lambda0", what), "lambda0");
  r.se = get_vec(field(o, "se", what), "se");
  if (r.lambda0.size() != s || r.se.size() != s)
    throw InputError("recalibration result: lambda0/se length must match times");
  r.ci_lower = o.contains("ci_lower") ? get_vec(o.at("ci_lower"), "ci_lower")
                                      : Eigen::VectorXd::Constant(s, kNaN);
  r.ci_upper = o.contains("ci_upper") ? get_vec(o.at("ci_upper"), "ci_upper")
                                      : Eigen::VectorXd::Constant(s, kNaN);
  if (o.contains("ci_level")) r.ci_level = get_num(o.at("ci_level"), "ci_level");
  if (o.contains("isotonic")) r.isotonic = o.at("isotonic").get<bool>();
  if (o.contains("cov_lambda") && !o.at("cov_lambda").empty())
    r.cov_lambda = get_mat(o.at("cov_lambda"), s, s, "cov_lambda");
  if (o.contains("cov_beta_lambda") && !o.at("cov_beta_lambda").empty() && s > 0) {
    const auto n = static_cast<Eigen::Index>(o.at("cov_beta_lambda").size());
    if (n % s) throw InputError("cov_beta_lambda: size is not a multiple of the time count");
    r.cov_beta_lambda = get_mat(o.at("cov_beta_lambda"), n / s, s, "cov_beta_lambda");
  }
  if (o.contains("gamma_hat")) r.gamma_hat = get_vec(o.at("gamma_hat"), "gamma_hat");
  if (o.contains("warnings")) r.warnings = o.at("warnings").get<std::vector<std::string>>();
  return r;
}

// Splits one CSV record; no quoting (see docs/formats.md).
std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* b = s.data();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(v);
}

std::string line_error(const std::string& origin, long line, const std::string& msg) {
  return origin + ":" + std::to_string(line) + ": " + msg;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path + "'");
}

Cohort read_cohort_csv(std::istream& in, const std::string& origin) {
  std::string line;
  long lineno = 0;
  std::vector<std::string> header;
  std::vector<SubjectRecord> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty() || line[0] == '#') continue;
    auto f = split_fields(line);
    if (header.empty()) {
      static const char* required[] = {"entry_age", "exit_age", "event"};
      for (std::size_t k = 0; k < 3; ++k)
        if (f.size() <= k || f[k] != required[k])
          throw InputError(line_error(origin, lineno,
                                      std::string("header is missing column '") +
                                          required[k] + "' (expected in position " +
                                          std::to_string(k + 1) + ")"));
      for (std::size_t k = 3; k < f.size(); ++k)
        if (f[k].empty())
          throw InputError(line_error(origin, lineno, "empty covariate name"));
      header = f;
      continue;
    }
    if (f.size() != header.size())
      throw InputError(line_error(origin, lineno,
                                  "expected " + std::to_string(header.size()) +
                                      " fields, found " + std::to_string(f.size())));
    SubjectRecord r;
    double ev = 0.0;
    if (!parse_number(f[0], r.entry_age) || r.entry_age < 0.0)
      throw InputError(line_error(origin, lineno, "entry_age must be a nonnegative number"));
    if (!parse_number(f[1], r.exit_age) || r.exit_age < 0.0)
      throw InputError(line_error(origin, lineno, "exit_age must be a nonnegative number"));
    if (r.exit_age <= r.entry_age)
      throw InputError(line_error(origin, lineno, "exit_age must exceed entry_age"));
    if (f[2] != "0" && f[2] != "1" && f[2] != "2")
      throw InputError(line_error(origin, lineno, "event must be 0, 1 or 2"));
    ev = f[2][0] - '0';
    r.event = static_cast<EventCode>(static_cast<int>(ev));
    r.covariates.resize(static_cast<Eigen::Index>(header.size() - 3));
    for (std::size_t k = 3; k < f.size(); ++k) {
      double v = 0.0;
      if (!parse_number(f[k], v))
        throw InputError(line_error(origin, lineno, "covariate '" + header[k] +
                                                        "' is not a finite number"));
      r.covariates[static_cast<Eigen::Index>(k - 3)] = v;
    }
    rows.push_back(std::move(r));
  }
  if (header.empty()) throw InputError(origin + ": missing header");
  if (rows.empty()) throw InputError(origin + ": no data rows");
  return Cohort::from_records(rows, {header.begin() + 3, header.end()});
}

Cohort read_cohort_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_cohort_csv(in, path);
}

void write_cohort_csv(std::ostream& out, const Cohort& c) {
  out << "entry_age,exit_age,event";
  for (const auto& n : c.covariate_names()) out << ',' << n;
  out << '\n';
  for (int i = 0; i < c.size(); ++i) {
    out << format_double(c.entry()[i]) << ',' << format_double(c.exit()[i]) << ','
        << static_cast<int>(c.event(i));
    for (int j = 0; j < c.dim(); ++j) out << ',' << format_double(c.covariates()(i, j));
    out << '\n';
  }
}

std::string cox_fit_to_json(const CoxFit& fit, const std::string& config_json) {
  Eigen::VectorXd se = fit.sigma_beta.diagonal().array().sqrt();
  Eigen::VectorXd hr = fit.beta_hat.array().exp();
  json doc = {{"beta", vec_json(fit.beta_hat)},
              {"sigma_beta", mat_json(fit.sigma_beta)},
              {"se", vec_json(se)},
              {"hazard_ratio", vec_json(hr)},
              {"covariate_names", fit.covariate_names},
              {"baseline", step_json(fit.breslow_baseline)},
              {"baseline_variance", step_json(fit.breslow_variance)},
              {"log_partial_likelihood", num(fit.log_partial_likelihood)},
              {"iterations", fit.iterations},
              {"converged", fit.converged}};
  attach_config(doc, config_json);
  return doc.dump(2) + "\n";
}

CoxFit cox_fit_from_json(const std::string& text) {
  const char* what = "model";
  json doc = parse_json(text, what);
  CoxFit fit;
  fit.beta_hat = get_vec(field(doc, "beta", what), "beta");
  const Eigen::Index p = fit.beta_hat.size();
  fit.sigma_beta = get_mat(field(doc, "sigma_beta", what), p, p, "sigma_beta");
  fit.covariate_names = field(doc, "covariate_names", what).get<std::vector<std::string>>();
  if (static_cast<Eigen::Index>(fit.covariate_names.size()) != p)
    throw InputError("model: covariate_names length must match beta");
  fit.breslow_baseline = step_from(field(doc, "baseline", what), "baseline");
  if (doc.contains("baseline_variance"))
    fit.breslow_variance = step_from(doc.at("baseline_variance"), "baseline_variance");
  if (doc.contains("log_partial_likelihood"))
    fit.log_partial_likelihood = get_num(doc.at("log_partial_likelihood"), what);
  if (doc.contains("iterations")) fit.iterations = doc.at("iterations").get<int>();
  if (doc.contains("converged")) fit.converged = doc.at("converged").get<bool>();
  return fit;
}

std::string constraint_spec_to_json(const ConstraintSpec& spec) {
  return constraint_json(spec).dump(2) + "\n";
}

ConstraintSpec constraint_spec_from_json(const std::string& text) {
  return constraint_from(parse_json(text, "constraints"));
}

std::string target_summary_to_json(const TargetSummary& summary) {
  return summary_json(summary).dump(2) + "\n";
}

TargetSummary target_summary_from_json(const std::string& text) {
  const char* what = "summary";
  json doc = parse_json(text, what);
  TargetSummary s;
  s.times = get_std_vec(field(doc, "times", what), "times");
  s.survival = get_vec(field(doc, "survival", what), "survival");
  s.survival_variance = get_vec(field(doc, "survival_variance", what), "survival_variance");
  const Eigen::Index n = static_cast<Eigen::Index>(s.times.size());
  if (doc.contains("m")) s.m = doc.at("m").get<long>();
  if (doc.contains("survival_covariance"))
    s.survival_covariance = get_mat(doc.at("survival_covariance"), n, n, "survival_covariance");
  if (doc.contains("constraints")) {
    s.constraints = constraint_from(doc.at("constraints"));
    if (doc.contains("mu_s_covariance"))
      s.mu_s_covariance = get_mat(doc.at("mu_s_covariance"), s.constraints->size(), n,
                                  "mu_s_covariance");
  }
  return s;
}

std::string recal_results_to_json(const std::vector<RecalResult>& results,
                                  const std::string& config_json) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(result_json(r));
  json doc = {{"results", std::move(arr)}};
  attach_config(doc, config_json);
  return doc.dump(2) + "\n";
}

std::vector<RecalResult> recal_results_from_json(const std::string& text) {
  json doc = parse_json(text, "recalibration");
  const json& arr = field(doc, "results", "recalibration");
  if (!arr.is_array()) throw InputError("recalibration: 'results' must be an array");
  std::vector<RecalResult> out;
  for (const auto& o : arr) out.push_back(result_from(o));
  return out;
}

void write_recal_csv(std::ostream& out, const std::vector<RecalResult>& results) {
  out << "time,estimate,se,ci_lo,ci_hi,method\n";
  for (const auto& r : results)
    for (std::size_t k = 0; k < r.times.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      out << format_double(r.times[k]) << ',' << format_double(r.lambda0[i]) << ','
          << format_double(r.se[i]) << ',' << format_double(r.ci_lower[i]) << ','
          << format_double(r.ci_upper[i]) << ',' << to_string(r.method) << '\n';
    }
}

std::string step_function_to_json(const StepFunction& f) {
  return step_json(f).dump(2) + "\n";
}

StepFunction step_function_from_json(const std::string& text) {
  return step_from(parse_json(text, "step function"), "step function");
}

}  // namespace recal
