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

#ifndef EJABC_PROPOSAL_HPP_
#define EJABC_PROPOSAL_HPP_

#include "ejabc/rng.hpp"
#include "ejabc/types.hpp"

namespace ejabc {

/// Transition proposal q(to | from) for the Metropolis-Hastings samplers.
class Proposal {
 public:
  virtual ~Proposal() = default;
  virtual ParamVector draw(const ParamVector& from, RngStream& rng) const = 0;
  virtual double log_density(const ParamVector& to, const ParamVector& from) const = 0;
  /// True when q(a | b) = q(b | a) for all a, b, letting samplers skip the ratio.
  virtual bool symmetric() const { return false; }

  /// log q(from | to) - log q(to | from)
  double log_ratio(const ParamVector& to, const ParamVector& from) const {
    if (symmetric()) return 0.0;
    return log_density(from, to) - log_density(to, from);
  }
};

/// Gaussian random walk theta* ~ N(theta, covariance).
class GaussianRandomWalk final : public Proposal {
 public:
  explicit GaussianRandomWalk(const Eigen::MatrixXd& covariance);

  ParamVector draw(const ParamVector& from, RngStream& rng) const override;
  double log_density(const ParamVector& to, const ParamVector& from) const override;
  bool symmetric() const override { return true; }

  const Eigen::MatrixXd& covariance() const { return covariance_; }

 private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;  // lower factor
  double log_norm_;
};

}  // namespace ejabc

#endif  // EJABC_PROPOSAL_HPP_
