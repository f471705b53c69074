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

#ifndef EJABC_KERNEL_HPP_
#define EJABC_KERNEL_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ejabc {

// Compact-support smoothing kernels. Early rejection needs K(u) = 0 for u > eps,
// so the Gaussian kernel is deliberately absent.
enum class KernelFamily { uniform, epanechnikov, triangle, quartic, triweight, tricube };

std::string_view to_string(KernelFamily family);
std::optional<KernelFamily> kernel_from_string(std::string_view name);

/// Normalized ABC kernel K_eps(u) = K(u / eps) / K(0).
///
/// Returns exactly 1 at u = 0 and exactly 0 for u > eps. The uniform kernel
/// includes the boundary u = eps; the others vanish there. An infinite eps
/// (the prior stage of an SMC run) gives 1 for every finite u.
template <typename Scalar>
Scalar kernel_eval(KernelFamily family, Scalar u, Scalar eps) {
  if (!std::isfinite(u) || u < Scalar(0)) throw std::invalid_argument("kernel_eval: u must be finite and nonnegative");
  if (!(eps > Scalar(0))) throw std::invalid_argument("kernel_eval: eps must be positive");
  if (std::isinf(eps)) return Scalar(1);
  if (u > eps) return Scalar(0);
  const Scalar z = u / eps;
  switch (family) {
    case KernelFamily::uniform:
      return Scalar(1);
    case KernelFamily::epanechnikov:
      return Scalar(1) - z * z;
    case KernelFamily::triangle:
      return Scalar(1) - z;
    case KernelFamily::quartic: {
      const Scalar t = Scalar(1) - z * z;
      return t * t;
    }
    case KernelFamily::triweight: {
      const Scalar t = Scalar(1) - z * z;
      return t * t * t;
    }
    case KernelFamily::tricube: {
      const Scalar t = Scalar(1) - z * z * z;
      return t * t * t;
    }
  }
  return Scalar(0);
}

inline double kernel_eval(KernelFamily family, double u, double eps) { return kernel_eval<double>(family, u, eps); }

/// Kernel weight of a discrepancy as used by the samplers: an infinite
/// discrepancy (failed simulation) and any value below zero map to 0 and 1
/// respectively instead of raising. Surrogate predictions h can be negative.
inline double kernel_weight(KernelFamily family, double delta, double eps) {
  if (std::isnan(delta)) return 0.0;
  if (delta == std::numeric_limits<double>::infinity()) return 0.0;
  return kernel_eval(family, delta < 0.0 ? 0.0 : delta, eps);
}

}  // namespace ejabc

#endif  // EJABC_KERNEL_HPP_
