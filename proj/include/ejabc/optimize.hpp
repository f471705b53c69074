/*
 * Copyright 2026 The ejabc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EJABC_OPTIMIZE_HPP_
#define EJABC_OPTIMIZE_HPP_

#include <functional>

#include "ejabc/types.hpp"

namespace ejabc {

struct NelderMeadOptions {
  int max_evaluations = 400;
  double f_tolerance = 1e-8;  // spread of simplex values
  double x_tolerance = 1e-6;  // simplex diameter
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value;
  int evaluations;
};

// Derivative-free minimization with the standard reflection/expansion/
// contraction/shrink coefficients (1, 2, 0.5, 0.5). Non-finite objective
// values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& initial_step, const NelderMeadOptions& options = {});

}  // namespace ejabc

#endif  // EJABC_OPTIMIZE_HPP_
