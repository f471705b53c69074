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

#ifndef EJABC_RNG_HPP_
#define EJABC_RNG_HPP_

#include <cstdint>
#include <random>

#include "ejabc/types.hpp"

namespace ejabc {

/// Seedable random stream identified by a (seed, stream id) pair.
///
/// Two streams constructed from the same pair produce identical draws for
/// the same call sequence. Child streams derived with split() are keyed by
/// the parent identity and the child index only, so per-particle or
/// per-chain streams are reproducible regardless of scheduling order.
class RngStream {
 public:
  using Engine = std::mt19937_64;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent child stream; does not advance this stream.
  RngStream split(std::uint64_t child) const;

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal.
  double normal();
  double normal(double mean, double sd);
  /// Vector of iid standard normals.
  Eigen::VectorXd normal_vector(Eigen::Index n);

  Engine& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer, used for deriving stream keys.
std::uint64_t mix64(std::uint64_t x);

}  // namespace ejabc

#endif  // EJABC_RNG_HPP_
