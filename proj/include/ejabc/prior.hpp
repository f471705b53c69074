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

#ifndef EJABC_PRIOR_HPP_
#define EJABC_PRIOR_HPP_

#include <variant>
#include <vector>

#include "ejabc/rng.hpp"
#include "ejabc/types.hpp"

namespace ejabc {

struct UniformMarginal {
  double lo;
  double hi;
};

struct NormalMarginal {
  double mean;
  double sd;
};

// log(theta) ~ N(mean, sd^2)
struct LogNormalMarginal {
  double mean;
  double sd;
};

using Marginal = std::variant<UniformMarginal, NormalMarginal, LogNormalMarginal>;

/// Product of independent per-coordinate marginals.
class PriorSpec {
 public:
  PriorSpec() = default;
  explicit PriorSpec(std::vector<Marginal> marginals);

  Eigen::Index dim() const { return static_cast<Eigen::Index>(marginals_.size()); }
  const std::vector<Marginal>& marginals() const { return marginals_; }

  /// Sum of coordinate log-densities; -inf outside the support.
  double log_density(const ParamVector& theta) const;
  bool in_support(const ParamVector& theta) const;
  ParamVector sample(RngStream& rng) const;

 private:
  std::vector<Marginal> marginals_;
};

double marginal_log_density(const Marginal& m, double x);

}  // namespace ejabc

#endif  // EJABC_PRIOR_HPP_
