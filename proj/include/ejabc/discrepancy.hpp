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

#ifndef EJABC_DISCREPANCY_HPP_
#define EJABC_DISCREPANCY_HPP_

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ejabc/types.hpp"

namespace ejabc {

/// Root mean squared difference over all d*T entries.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar rmse_discrepancy(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("rmse_discrepancy: shape mismatch");
  if (x.size() == 0) throw std::invalid_argument("rmse_discrepancy: empty data");
  using std::sqrt;
  return sqrt((x - y).squaredNorm() / static_cast<typename DerivedX::Scalar>(x.size()));
}

/// |x - y| for scalar (1x1) data.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar abs_discrepancy(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != 1 || y.size() != 1) throw std::invalid_argument("abs_discrepancy: data must be scalar");
  using std::abs;
  return abs(x(0, 0) - y(0, 0));
}

/// Discrepancy between simulated x and observed y.
using DiscrepancyFn = std::function<double(const Dataset& x, const Dataset& y)>;

/// Summary-statistic map S applied to both data sets before the distance.
using SummaryFn = std::function<Dataset(const Dataset&)>;

/// rho(S(x), S(y)).
DiscrepancyFn with_summary(SummaryFn summary, DiscrepancyFn rho);

/// RMSE after scaling each row to [0, 1] using the observed row's min and max.
/// Constant observed rows are left unscaled.
DiscrepancyFn minmax_rmse(const Dataset& observed);

enum class DiscrepancyKind { abs, rmse, minmax_rmse };

std::string_view to_string(DiscrepancyKind kind);
DiscrepancyKind discrepancy_from_string(std::string_view name);

DiscrepancyFn make_discrepancy(DiscrepancyKind kind, const Dataset& observed);

}  // namespace ejabc

#endif  // EJABC_DISCREPANCY_HPP_
