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

#ifndef EJABC_TYPES_HPP_
#define EJABC_TYPES_HPP_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ejabc {

// A point in the p-dimensional parameter space.
using ParamVector = Eigen::VectorXd;

// Observed or simulated data, d rows (data dimension) by T columns (time points).
using Dataset = Eigen::MatrixXd;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Raised when a factorization fails even after jitter escalation.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by simulators on blow-up, singularities or non-finite states.
// Samplers translate it into an infinite discrepancy.
class SimulationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Particle population collapsed (too few alive or unique particles).
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No admissible starting state was found within the retry cap.
class InitializationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed data file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic is undefined for the given input (e.g. zero variance).
class UndefinedStatistic : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ejabc

#endif  // EJABC_TYPES_HPP_
