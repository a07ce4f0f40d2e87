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

#include <iosfwd>
#include <string>
#include <vector>

#include "recal/cox.hpp"
#include "recal/el_weights.hpp"
#include "recal/recalib.hpp"
#include "recal/survival.hpp"

// Text formats. Grammar and field lists are in docs/formats.md. Covariate
// indices are 1-based in every file format and 0-based in the C++ API.
namespace recal {

// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Cohort CSV: entry_age,exit_age,event,<covariates...>. Lines starting with
// '#' are skipped. Errors carry 1-based line numbers.
Cohort read_cohort_csv(std::istream& in, const std::string& origin = "<input>");
Cohort read_cohort_csv_file(const std::string& path);
void write_cohort_csv(std::ostream& out, const Cohort& cohort);

// JSON documents. `config_json`, when non-empty, must be a JSON object and
// is embedded under "config".
std::string cox_fit_to_json(const CoxFit& fit, const std::string& config_json = "");
CoxFit cox_fit_from_json(const std::string& text);

std::string constraint_spec_to_json(const ConstraintSpec& spec);
ConstraintSpec constraint_spec_from_json(const std::string& text);

std::string target_summary_to_json(const TargetSummary& summary);
TargetSummary target_summary_from_json(const std::string& text);

std::string recal_results_to_json(const std::vector<RecalResult>& results,
                                  const std::string& config_json = "");
std::vector<RecalResult> recal_results_from_json(const std::string& text);

// time,estimate,se,ci_lo,ci_hi,method
void write_recal_csv(std::ostream& out, const std::vector<RecalResult>& results);

// {"knots":[...],"values":[...],"pre":0}
std::string step_function_to_json(const StepFunction& f);
StepFunction step_function_from_json(const std::string& text);

}  // namespace recal
