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
#include <string>

#include "recal/errors.hpp"
#include "recal/survival.hpp"

namespace recal {

StepFunction::StepFunction(std::vector<double> knots,
                           std::vector<double> values, double pre_value)
    : knots_(std::move(knots)), values_(std::move(values)), pre_(pre_value) {
  if (knots_.size() != values_.size())
    throw InputError("StepFunction: knots and values differ in length");
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    if (!(knots_[k] > knots_[k - 1]))
      throw InputError("StepFunction: knots must be strictly increasing");
  }
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return pre_;
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

bool StepFunction::is_nondecreasing() const {
  double prev = pre_;
  for (double v : values_) {
    if (v < prev) return false;
    prev = v;
  }
  return true;
}

bool StepFunction::is_nonincreasing() const {
  double prev = pre_;
  for (double v : values_) {
    if (v > prev) return false;
    prev = v;
  }
  return true;
}

}  // namespace recal
