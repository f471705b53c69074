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

#ifndef EJABC_TESTS_TEST_SUPPORT_HPP_
#define EJABC_TESTS_TEST_SUPPORT_HPP_

#include <cmath>
#include <memory>

#include "ejabc/mcmc.hpp"
#include "ejabc/simulators.hpp"

namespace ejabc::testing {

inline ParamVector scalar(double x) {
  ParamVector t(1);
  t << x;
  return t;
}

/// Observed y0 = 1 with |x - y0| for the toy mixture.
inline DistanceFn toy_distance() {
  Dataset y(1, 1);
  y(0, 0) = 1.0;
  return make_distance(std::make_shared<ToyMixture>(), y, make_discrepancy(DiscrepancyKind::abs, y));
}

inline PriorSpec toy_prior() { return PriorSpec({UniformMarginal{-6.0, 6.0}}); }

inline SamplerConfig toy_config(SamplerKind kind, std::size_t iterations, double proposal_sd = 0.3) {
  SamplerConfig c;
  c.sampler = kind;
  c.eps = 0.6;
  c.prior = toy_prior();
  c.proposal = std::make_shared<GaussianRandomWalk>(Eigen::MatrixXd::Constant(1, 1, proposal_sd * proposal_sd));
  c.iterations = iterations;
  return c;
}

/// Symmetric random walk on the grid lo + spacing * k: steps -2, -1, +1, +2
/// with probability 1/4 each.
class GridWalk final : public Proposal {
 public:
  GridWalk(double lo, double spacing) : lo_(lo), spacing_(spacing) {}
  ParamVector draw(const ParamVector& from, RngStream& rng) const override {
    static constexpr int kSteps[] = {-2, -1, 1, 2};
    const long k = index(from(0)) + kSteps[static_cast<int>(rng.uniform() * 4.0)];
    return scalar(lo_ + spacing_ * static_cast<double>(k));
  }
  double log_density(const ParamVector& to, const ParamVector& from) const override {
    const long d = std::labs(index(to(0)) - index(from(0)));
    return d == 1 || d == 2 ? std::log(0.25) : -std::numeric_limits<double>::infinity();
  }
  bool symmetric() const override { return true; }
  long index(double x) const { return std::lround((x - lo_) / spacing_); }

 private:
  double lo_;
  double spacing_;
};

}  // namespace ejabc::testing

#endif  // EJABC_TESTS_TEST_SUPPORT_HPP_
