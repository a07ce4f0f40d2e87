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

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace recal {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input (dimension mismatch, bad CSV, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Moment targets outside the convex hull of the constraint rows.
class InfeasibleConstraint : public Error {
 public:
  InfeasibleConstraint(const std::string& what, Eigen::VectorXd direction)
      : Error(what), direction_(std::move(direction)) {}
  const Eigen::VectorXd& direction() const { return direction_; }

 private:
  Eigen::VectorXd direction_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate)
      : Error(what), last_(std::move(last_iterate)) {}
  const Eigen::VectorXd& last_iterate() const { return last_; }

 private:
  Eigen::VectorXd last_;
};

// Singular or ill-conditioned linear algebra, empty risk sets and the like.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Non-fatal diagnostics collected by solvers and surfaced by the CLI.
using Warnings = std::vector<std::string>;

}  // namespace recal
