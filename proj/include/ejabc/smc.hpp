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

#ifndef EJABC_SMC_HPP_
#define EJABC_SMC_HPP_

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ejabc/gp.hpp"
#include "ejabc/kernel.hpp"
#include "ejabc/mcmc.hpp"
#include "ejabc/prior.hpp"
#include "ejabc/rng.hpp"
#include "ejabc/types.hpp"

namespace ejabc {

struct Particle {
  ParamVector theta;
  double delta = 0.0;
  double weight = 0.0;
  double h = std::numeric_limits<double>::quiet_NaN();  // cached surrogate value, NaN until computed
};

using ParticleSet = std::vector<Particle>;

/// Number of distinct theta among particles with positive weight.
int unique_alive(const ParticleSet& particles);
double effective_sample_size(const ParticleSet& particles);

/// Smallest eps <= eps_prev keeping at least ceil(gamma N) unique particles
/// alive after reweighting. Throws DegeneracyError when even eps_prev does not.
double select_epsilon(const ParticleSet& particles, double gamma, KernelFamily kernel, double eps_prev);

/// W <- W K_new(delta) / K_old(delta), renormalized. K at eps = inf is 1.
/// Throws DegeneracyError when every weight vanishes.
ParticleSet reweight(const ParticleSet& particles, double eps_old, double eps_new, KernelFamily kernel);

/// Weighted covariance of theta over alive particles plus 1e-10 trace/p on
/// the diagonal. Throws DegeneracyError with fewer than 2 unique alive particles.
Eigen::MatrixXd adapt_proposal_cov(const ParticleSet& particles);

/// Systematic resampling to N equally weighted particles.
ParticleSet systematic_resample(const ParticleSet& particles, RngStream& rng);
/// Resamples in place when ESS < ess_fraction * N; returns whether it did.
bool resample(ParticleSet& particles, RngStream& rng, double ess_fraction = 0.5);

enum class SmcMove { oej, ej };

struct SmcConfig {
  int n_particles = 512;
  double gamma = 0.5;
  KernelFamily kernel = KernelFamily::uniform;
  PriorSpec prior;
  SmcMove move = SmcMove::oej;
  int moves_per_round = 1;
  /// Resampling trigger ESS < ess_fraction * N; the default resamples every
  /// round in which any particle lost weight.
  double ess_fraction = 1.0;
  /// Multiplier on the weighted particle covariance used as the move proposal.
  double proposal_scale = 1.0;
  /// Stopping rules; at least one must be set. The run stops after the round
  /// in which any of them triggers.
  std::optional<std::size_t> sim_budget;
  std::optional<double> target_eps;
  std::optional<int> max_rounds;
  /// Also stops after a round whose move acceptance rate falls below this
  /// floor; 0 disables. Rounds without moves never trigger it.
  double min_accept_rate = 0.01;
  Surrogate h;  // required by ej moves
  int workers = 1;

  void validate() const;
};

struct RoundReport {
  int round = 0;
  double eps = 0.0;
  int unique_alive = 0;
  double accept_rate = 0.0;
  std::size_t n_sim = 0;
  std::size_t n_early1 = 0;
  std::size_t n_early2 = 0;
  std::size_t n_moves = 0;
  std::size_t n_accept = 0;
  std::size_t n_pre = 0;
  bool resampled = false;
};

struct SmcResult {
  ParticleSet particles;
  double eps = std::numeric_limits<double>::infinity();
  std::vector<RoundReport> rounds;
  /// Every move record, in round, particle, move order.
  std::vector<IterationRecord> moves;
  /// Every simulated (theta, delta) pair with finite delta, in simulation order.
  DiscrepancySet simulations;
  std::size_t total_sims = 0;
  /// Set when the run ended on a DegeneracyError; the report is partial.
  std::optional<std::string> failure;
  /// sim_budget, target_eps, max_rounds, min_accept_rate or degeneracy.
  std::string stop_reason;
};

/// Adaptive ABC-SMC with OejMCMC or ejMCMC moves. Round 0 samples the prior
/// with eps = inf. Results are independent of cfg.workers.
SmcResult run_ejasmc(const SmcConfig& cfg, const DistanceFn& distance, const RngStream& rng);

struct TrainingData {
  DiscrepancySet data;
  bool complete = true;  // false when the stopping rule ended the run before the budget
};

/// Pilot ABC-SMC with OejMCMC moves; returns the first `budget` simulated pairs.
TrainingData collect_training_data(SmcConfig pilot, std::size_t budget, const DistanceFn& distance,
                                   const RngStream& rng);
/// Budget pairs (theta ~ prior, delta); failed simulations are redrawn.
TrainingData prior_training_data(const PriorSpec& prior, std::size_t budget, const DistanceFn& distance,
                                 const RngStream& rng, int workers = 1);

/// round,eps,unique_alive,accept_rate,n_sim,n_early1,n_early2
void write_report_csv(std::ostream& out, const std::vector<RoundReport>& rounds);
/// theta_1..theta_p,delta,weight
void write_particles_csv(std::ostream& out, const ParticleSet& particles);

}  // namespace ejabc

#endif  // EJABC_SMC_HPP_
