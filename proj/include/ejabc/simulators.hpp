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

#ifndef EJABC_SIMULATORS_HPP_
#define EJABC_SIMULATORS_HPP_

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ejabc/discrepancy.hpp"
#include "ejabc/gp.hpp"
#include "ejabc/rng.hpp"
#include "ejabc/types.hpp"

namespace ejabc {

/// Generative model p(x | theta). Implementations are stateless; all
/// randomness comes from the caller's stream.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::string_view id() const = 0;
  virtual Eigen::Index param_dim() const = 0;
  virtual Eigen::Index data_rows() const = 0;
  virtual Eigen::Index data_cols() const = 0;
  /// Throws SimulationFailure on blow-up.
  virtual Dataset simulate(const ParamVector& theta, RngStream& rng) const = 0;
  /// Observation times, one per data column.
  virtual std::vector<double> times() const = 0;
};

/// Simulate-and-compare closure; SimulationFailure becomes +inf.
DistanceFn make_distance(std::shared_ptr<const Simulator> simulator, Dataset observed, DiscrepancyFn discrepancy);

// ---------------------------------------------------------------------------
// toy mixture: 0.5 N(theta + 2, 0.6) + 0.5 N(theta - 1, 0.6)

inline constexpr double kToyVariance = 0.6;

Dataset simulate_toy(const ParamVector& theta, RngStream& rng);

class ToyMixture final : public Simulator {
 public:
  std::string_view id() const override { return "toy_mixture"; }
  Eigen::Index param_dim() const override { return 1; }
  Eigen::Index data_rows() const override { return 1; }
  Eigen::Index data_cols() const override { return 1; }
  Dataset simulate(const ParamVector& theta, RngStream& rng) const override { return simulate_toy(theta, rng); }
  std::vector<double> times() const override { return {0.0}; }
};

// ---------------------------------------------------------------------------
// two-state ODE
//   dx1/dt = 72 / (36 + x2) - theta1
//   dx2/dt = theta2 * x1 - 1

struct OdeSettings {
  double t_end = 60.0;
  Eigen::Index n_obs = 121;
  double step = 0.05;  // RK4
  Eigen::Vector2d x0{7.0, -10.0};
  Eigen::Vector2d noise_sd{1.0, 3.0};
};

Eigen::Vector2d ode_rhs(const Eigen::Vector2d& x, const ParamVector& theta);
/// Noiseless RK4 trajectory at the n_obs equally spaced times in [0, t_end].
Dataset ode_trajectory(const ParamVector& theta, const OdeSettings& settings);
Dataset simulate_ode(const ParamVector& theta, const OdeSettings& settings, RngStream& rng);

class OdeSystem final : public Simulator {
 public:
  explicit OdeSystem(OdeSettings settings = {});
  std::string_view id() const override { return "ode_system"; }
  Eigen::Index param_dim() const override { return 2; }
  Eigen::Index data_rows() const override { return 2; }
  Eigen::Index data_cols() const override { return settings_.n_obs; }
  Dataset simulate(const ParamVector& theta, RngStream& rng) const override {
    return simulate_ode(theta, settings_, rng);
  }
  std::vector<double> times() const override;
  const OdeSettings& settings() const { return settings_; }

 private:
  OdeSettings settings_;
};

// ---------------------------------------------------------------------------
// prokaryotic auto-regulation network, diffusion approximation
// state X = (RNA, P, P2, DNA)

enum class SdeScenario { D1, D2, D3 };

std::string_view to_string(SdeScenario s);
SdeScenario sde_scenario_from_string(std::string_view name);

struct SdeSettings {
  SdeScenario scenario = SdeScenario::D1;
  double k = 10.0;  // DNA + DNA.P2 total
  Eigen::Vector4d x0{8.0, 8.0, 8.0, 5.0};
  double dt = 0.05;
  std::vector<double> obs_times = default_obs_times();
  /// D2 measurement-noise variance; D3 takes sigma from theta(8).
  double noise_variance = 5.0;
  bool diffusion = true;  // false: Euler on the drift only

  static std::vector<double> default_obs_times();
  bool observes_dna() const { return scenario != SdeScenario::D3; }
  bool sigma_inferred() const { return scenario == SdeScenario::D3; }
};

using SdeState = Eigen::Vector4d;
using Propensities = Eigen::Matrix<double, 8, 1>;

/// 4 x 8 stoichiometric matrix (rows RNA, P, P2, DNA; columns R1..R8).
const Eigen::Matrix<double, 4, 8>& sde_stoichiometry();
/// h(X, theta); theta holds at least the 8 rate constants.
Propensities sde_propensities(const SdeState& x, const ParamVector& theta, double k);
/// X + S h dt + S sqrt(diag(h)) dW with propensities clamped at 0 before the
/// root, then the state clamped at 0. Pass dW = 0 for a drift-only step.
SdeState sde_euler_step(const SdeState& x, const ParamVector& theta, double k, double dt,
                        const Propensities& dw);
/// Latent path at the observation times (rows RNA, P, P2, DNA).
Dataset sde_path(const ParamVector& theta, const SdeSettings& settings, RngStream& rng);
/// Observed data: path plus scenario noise, DNA row dropped for D3.
Dataset simulate_sde(const ParamVector& theta, const SdeSettings& settings, RngStream& rng);

class SdeNetwork final : public Simulator {
 public:
  explicit SdeNetwork(SdeSettings settings = {});
  std::string_view id() const override { return "sde_network"; }
  Eigen::Index param_dim() const override { return settings_.sigma_inferred() ? 9 : 8; }
  Eigen::Index data_rows() const override { return settings_.observes_dna() ? 4 : 3; }
  Eigen::Index data_cols() const override { return static_cast<Eigen::Index>(settings_.obs_times.size()); }
  Dataset simulate(const ParamVector& theta, RngStream& rng) const override {
    return simulate_sde(theta, settings_, rng);
  }
  std::vector<double> times() const override { return settings_.obs_times; }
  const SdeSettings& settings() const { return settings_; }

 private:
  SdeSettings settings_;
};

// ---------------------------------------------------------------------------
// Nicholson blowfly delay equation
//   dx/dt = nu x(t) [1 - x(t - tau) / (1000 P)],  theta = (X0, nu, P, tau[, sigma])

enum class DdeNoise {
  log_location,    // log y ~ N(log x, sigma^2)
  moment_matched,  // y lognormal with mean x and variance sigma^2
};

struct DdeSettings {
  double step = 0.1;
  std::vector<double> obs_times = default_obs_times();
  double sigma = 0.1;
  bool infer_sigma = false;  // sigma taken from theta(4)
  DdeNoise noise = DdeNoise::log_location;

  static std::vector<double> default_obs_times();
};

/// Noiseless Euler path at the observation times. Throws SimulationFailure
/// when the population leaves (0, inf).
Dataset dde_trajectory(const ParamVector& theta, const DdeSettings& settings);
/// Full Euler grid x(k * step), k = 0..n_steps (for diagnostics and tests).
Eigen::VectorXd dde_euler_grid(const ParamVector& theta, double step, double t_end);
Dataset simulate_dde(const ParamVector& theta, const DdeSettings& settings, RngStream& rng);

class DdeBlowfly final : public Simulator {
 public:
  explicit DdeBlowfly(DdeSettings settings = {});
  std::string_view id() const override { return "dde_blowfly"; }
  Eigen::Index param_dim() const override { return settings_.infer_sigma ? 5 : 4; }
  Eigen::Index data_rows() const override { return 1; }
  Eigen::Index data_cols() const override { return static_cast<Eigen::Index>(settings_.obs_times.size()); }
  Dataset simulate(const ParamVector& theta, RngStream& rng) const override {
    return simulate_dde(theta, settings_, rng);
  }
  std::vector<double> times() const override { return settings_.obs_times; }
  const DdeSettings& settings() const { return settings_; }

 private:
  DdeSettings settings_;
};

// ---------------------------------------------------------------------------
// observed-data files: time,value_1..value_d

struct ObservedSeries {
  std::vector<double> times;
  Dataset values;  // d x T
};

ObservedSeries read_observed_csv(const std::string& path);
void write_observed_csv(const std::string& path, const ObservedSeries& series, const std::string& comment = {});

inline constexpr Eigen::Index kBlowflyObservations = 137;

/// Blowfly counts in CSV `time,count`; exactly 137 positive counts.
ObservedSeries load_blowfly_data(const std::string& path);

}  // namespace ejabc

#endif  // EJABC_SIMULATORS_HPP_
