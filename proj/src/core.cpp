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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ejabc/discrepancy.hpp"
#include "ejabc/kernel.hpp"
#include "ejabc/prior.hpp"
#include "ejabc/proposal.hpp"

namespace ejabc {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::uniform: return "uniform";
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::triangle: return "triangle";
    case KernelFamily::quartic: return "quartic";
    case KernelFamily::triweight: return "triweight";
    case KernelFamily::tricube: return "tricube";
  }
  return "unknown";
}

std::optional<KernelFamily> kernel_from_string(std::string_view name) {
  for (auto f : {KernelFamily::uniform, KernelFamily::epanechnikov, KernelFamily::triangle, KernelFamily::quartic,
                 KernelFamily::triweight, KernelFamily::tricube}) {
    if (to_string(f) == name) return f;
  }
  if (name == "biweight") return KernelFamily::quartic;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// discrepancies

DiscrepancyFn with_summary(SummaryFn summary, DiscrepancyFn rho) {
  return [summary = std::move(summary), rho = std::move(rho)](const Dataset& x, const Dataset& y) {
    return rho(summary(x), summary(y));
  };
}

DiscrepancyFn minmax_rmse(const Dataset& observed) {
  const Eigen::VectorXd lo = observed.rowwise().minCoeff();
  Eigen::VectorXd range = observed.rowwise().maxCoeff() - lo;
  for (Eigen::Index i = 0; i < range.size(); ++i)
    if (!(range(i) > 0.0)) range(i) = 1.0;
  const Eigen::VectorXd inv = range.cwiseInverse();
  return [lo, inv](const Dataset& x, const Dataset& y) {
    if (x.rows() != lo.size() || y.rows() != lo.size())
      throw std::invalid_argument("minmax_rmse: data dimension does not match the observed data");
    // the offset cancels in the difference
    return rmse_discrepancy(inv.asDiagonal() * x, inv.asDiagonal() * y);
  };
}

std::string_view to_string(DiscrepancyKind kind) {
  switch (kind) {
    case DiscrepancyKind::abs: return "abs";
    case DiscrepancyKind::rmse: return "rmse";
    case DiscrepancyKind::minmax_rmse: return "minmax_rmse";
  }
  return "unknown";
}

DiscrepancyKind discrepancy_from_string(std::string_view name) {
  if (name == "abs") return DiscrepancyKind::abs;
  if (name == "rmse") return DiscrepancyKind::rmse;
  if (name == "minmax_rmse") return DiscrepancyKind::minmax_rmse;
  throw std::invalid_argument("unknown discrepancy '" + std::string(name) + "'");
}

DiscrepancyFn make_discrepancy(DiscrepancyKind kind, const Dataset& observed) {
  switch (kind) {
    case DiscrepancyKind::abs:
      return [](const Dataset& x, const Dataset& y) { return abs_discrepancy(x, y); };
    case DiscrepancyKind::rmse:
      return [](const Dataset& x, const Dataset& y) { return rmse_discrepancy(x, y); };
    case DiscrepancyKind::minmax_rmse:
      return minmax_rmse(observed);
  }
  throw std::invalid_argument("unknown discrepancy kind");
}

// ---------------------------------------------------------------------------
// prior

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void validate(const Marginal& m) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformMarginal>) {
          if (!(d.lo < d.hi) || !std::isfinite(d.lo) || !std::isfinite(d.hi))
            throw std::invalid_argument("uniform prior requires finite lo < hi");
        } else {
          if (!(d.sd > 0.0) || !std::isfinite(d.mean)) throw std::invalid_argument("prior requires sd > 0");
        }
      },
      m);
}

}  // namespace

double marginal_log_density(const Marginal& m, double x) {
  return std::visit(
      [x](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformMarginal>) {
          if (x < d.lo || x > d.hi) return kNegInf;
          return -std::log(d.hi - d.lo);
        } else if constexpr (std::is_same_v<T, NormalMarginal>) {
          const double z = (x - d.mean) / d.sd;
          return -0.5 * z * z - std::log(d.sd) - kLogSqrt2Pi;
        } else {
          if (!(x > 0.0)) return kNegInf;
          const double lx = std::log(x);
          const double z = (lx - d.mean) / d.sd;
          return -0.5 * z * z - std::log(d.sd) - kLogSqrt2Pi - lx;
        }
      },
      m);
}

PriorSpec::PriorSpec(std::vector<Marginal> marginals) : marginals_(std::move(marginals)) {
  for (const auto& m : marginals_) validate(m);
}

double PriorSpec::log_density(const ParamVector& theta) const {
  if (theta.size() != dim()) throw std::invalid_argument("prior log density: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < dim(); ++i) {
    if (!std::isfinite(theta(i))) return kNegInf;
    total += marginal_log_density(marginals_[static_cast<std::size_t>(i)], theta(i));
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

bool PriorSpec::in_support(const ParamVector& theta) const { return log_density(theta) > kNegInf; }

ParamVector PriorSpec::sample(RngStream& rng) const {
  ParamVector theta(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    theta(i) = std::visit(
        [&rng](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, UniformMarginal>) {
            return rng.uniform(d.lo, d.hi);
          } else if constexpr (std::is_same_v<T, NormalMarginal>) {
            return rng.normal(d.mean, d.sd);
          } else {
            return std::exp(rng.normal(d.mean, d.sd));
          }
        },
        marginals_[static_cast<std::size_t>(i)]);
  }
  return theta;
}

// ---------------------------------------------------------------------------
// proposal

GaussianRandomWalk::GaussianRandomWalk(const Eigen::MatrixXd& covariance) : covariance_(covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw std::invalid_argument("proposal covariance must be square and nonempty");
  if (!covariance.isApprox(covariance.transpose(), 1e-12))
    throw std::invalid_argument("proposal covariance must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("proposal covariance must be positive definite");
  chol_ = llt.matrixL();
  log_norm_ = -static_cast<double>(covariance.rows()) * kLogSqrt2Pi - chol_.diagonal().array().log().sum();
}

ParamVector GaussianRandomWalk::draw(const ParamVector& from, RngStream& rng) const {
  if (from.size() != covariance_.rows()) throw std::invalid_argument("proposal: dimension mismatch");
  return from + chol_ * rng.normal_vector(from.size());
}

double GaussianRandomWalk::log_density(const ParamVector& to, const ParamVector& from) const {
  const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(to - from);
  return log_norm_ - 0.5 * z.squaredNorm();
}

}  // namespace ejabc
