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

#ifndef EJABC_DIAGNOSTICS_HPP_
#define EJABC_DIAGNOSTICS_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "ejabc/mcmc.hpp"
#include "ejabc/types.hpp"

namespace ejabc {

struct DensityOnGrid {
  Eigen::VectorXd grid;  // strictly increasing
  Eigen::VectorXd values;
};

/// n equally spaced points on [lo, hi].
Eigen::VectorXd uniform_grid(double lo, double hi, Eigen::Index n = 512);
double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values);

double silverman_bandwidth(const Eigen::VectorXd& samples);

struct KdeResult {
  DensityOnGrid density;
  double bandwidth = 0.0;
  bool point_mass = false;  // all samples equal; density is a single-cell spike
};

/// Gaussian kernel density estimate on `grid`, renormalized to unit trapezoid
/// mass. Large samples are linearly binned before smoothing.
KdeResult kde_density(const Eigen::VectorXd& samples, const Eigen::VectorXd& grid,
                      std::optional<double> bandwidth = std::nullopt);

/// Trapezoid integral of |f - g|. Throws std::invalid_argument on grid mismatch.
double l1_distance(const DensityOnGrid& f, const DensityOnGrid& g);

struct SampleL1 {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  Eigen::Index points = 0;
  double bandwidth_a = 0.0;
  double bandwidth_b = 0.0;
};

/// L1 between the KDEs of two sample sets on a common grid spanning both
/// ranges plus three bandwidths.
SampleL1 l1_between_samples(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Eigen::Index points = 512);
/// L1 between the KDE of samples and a reference density evaluated on the same grid.
double l1_to_density(const Eigen::VectorXd& samples, const DensityOnGrid& reference);

struct EffSummary {
  std::size_t n_ite = 0;
  std::size_t n_early1 = 0;
  std::size_t n_early2 = 0;
  std::size_t n_early = 0;
  std::size_t n_sim_reject = 0;
  std::size_t n_accept = 0;
  std::size_t n_sim = 0;
  std::size_t n_pre = 0;
  std::size_t n_failed = 0;

  /// Early rejections over all rejections; 0 when nothing was rejected.
  double efficiency() const;
};

EffSummary summarize(const std::vector<IterationRecord>& trace);
double efficiency(const std::vector<IterationRecord>& trace);

/// Potential scale reduction factor sqrt(V / W) with
/// V = (n - 1) / n W + B / n. Not clamped at 1.
/// Throws UndefinedStatistic when W = 0.
double gelman_rubin(const std::vector<Eigen::VectorXd>& chains);
/// Per-column statistic for chains stored as iterations x p matrices.
Eigen::VectorXd gelman_rubin(const std::vector<Eigen::MatrixXd>& chains);

/// Exact ABC posterior of the toy mixture under the uniform kernel with
/// |x - y0| discrepancy and a U(lo, hi) prior, normalized on the grid.
DensityOnGrid toy_posterior_oracle(const Eigen::VectorXd& grid, double eps, double y0 = 1.0, double prior_lo = -6.0,
                                   double prior_hi = 6.0);

}  // namespace ejabc

#endif  // EJABC_DIAGNOSTICS_HPP_
