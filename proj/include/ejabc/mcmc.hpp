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

#ifndef EJABC_MCMC_HPP_
#define EJABC_MCMC_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "ejabc/gp.hpp"
#include "ejabc/kernel.hpp"
#include "ejabc/prior.hpp"
#include "ejabc/proposal.hpp"
#include "ejabc/rng.hpp"
#include "ejabc/types.hpp"

namespace ejabc {

enum class SamplerKind { abc_mcmc, oej_mcmc, ej_mcmc };

std::string_view to_string(SamplerKind kind);
std::optional<SamplerKind> sampler_from_string(std::string_view name);

enum class Outcome { early_reject_stage1, early_reject_stage2, sim_reject, accept };

std::string_view to_string(Outcome outcome);
Outcome outcome_from_string(std::string_view name);

/// Discrepancy prediction function h(theta).
using Surrogate = std::function<double(const ParamVector&)>;

/// h(theta) = h_quantile(model, theta, a). The model is shared, not copied.
Surrogate gp_surrogate(std::shared_ptr<const GPModel> model, double a);

struct ChainState {
  ParamVector theta;
  double log_prior = 0.0;
  double delta = 0.0;       // +inf after a failed simulation
  double h_val = 0.0;       // 0 for samplers without a surrogate
  double kern_delta = 1.0;  // K_eps(delta)
  double kern_h = 1.0;      // K_eps(h_val)
};

struct IterationRecord {
  std::size_t iteration = 0;
  Outcome outcome = Outcome::early_reject_stage1;
  ParamVector theta;  // proposed value
  std::optional<double> h;
  std::optional<double> delta;
  int sim = 0;
  bool failed = false;  // simulation failed (delta = +inf)
};

struct SamplerConfig {
  SamplerKind sampler = SamplerKind::ej_mcmc;
  KernelFamily kernel = KernelFamily::uniform;
  double eps = 1.0;
  PriorSpec prior;
  std::shared_ptr<const Proposal> proposal;
  std::size_t iterations = 0;
  std::optional<ParamVector> init;
  Surrogate h;  // required by ej_mcmc
  int max_init_attempts = 10000;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct StepResult {
  ChainState state;
  IterationRecord record;
};

StepResult abc_mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance,
                         RngStream& rng);
StepResult oej_mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance,
                         RngStream& rng);
StepResult ej_mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance,
                        RngStream& rng);
/// Dispatches on cfg.sampler.
StepResult mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance, RngStream& rng);

/// Builds a state at theta from one simulation; the state is valid when
/// min(kern_delta, kern_h) > 0 and the prior density is positive.
ChainState make_state(const ParamVector& theta, double delta, const SamplerConfig& cfg);
bool state_valid(const ChainState& state);

struct InitResult {
  ChainState state;
  int attempts = 0;
};

/// cfg.init first (when set), then prior draws, until a valid state is found.
/// Throws InitializationFailure after cfg.max_init_attempts simulations.
InitResult initialize_chain(const SamplerConfig& cfg, const DistanceFn& distance, RngStream& rng);

struct ChainResult {
  Eigen::MatrixXd samples;  // iterations x p, post-move states
  std::vector<IterationRecord> trace;
  ChainState initial;
  int init_attempts = 0;
};

ChainResult run_chain(const SamplerConfig& cfg, const DistanceFn& distance, RngStream& rng);
/// Chains c = 0..n-1 use rng.split(c); results do not depend on `workers`.
std::vector<ChainResult> run_chains(const SamplerConfig& cfg, const DistanceFn& distance, const RngStream& rng,
                                    int n_chains, int workers = 1);

/// iteration,outcome,theta_1..theta_p,h,delta,sim
void write_trace_csv(std::ostream& out, const std::vector<IterationRecord>& trace, Eigen::Index p,
                     std::size_t first_iteration = 0);
void write_samples_csv(std::ostream& out, const Eigen::MatrixXd& samples);
/// Inverse of write_trace_csv. Throws FormatError.
std::vector<IterationRecord> read_trace_csv(const std::string& path);
/// Reads theta_1..theta_p columns into an n x p matrix.
Eigen::MatrixXd read_samples_csv(const std::string& path);

}  // namespace ejabc

#endif  // EJABC_MCMC_HPP_
