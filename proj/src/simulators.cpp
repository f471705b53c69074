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

#include "ejabc/simulators.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ejabc/csv.hpp"

namespace ejabc {

DistanceFn make_distance(std::shared_ptr<const Simulator> simulator, Dataset observed, DiscrepancyFn discrepancy) {
  return [sim = std::move(simulator), y = std::move(observed), rho = std::move(discrepancy)](
             const ParamVector& theta, RngStream& rng) -> double {
    try {
      const double d = rho(sim->simulate(theta, rng), y);
      return std::isfinite(d) ? d : std::numeric_limits<double>::infinity();
    } catch (const SimulationFailure&) {
      return std::numeric_limits<double>::infinity();
    }
  };
}

namespace {

void require_dim(const ParamVector& theta, Eigen::Index p, const char* who) {
  if (theta.size() != p)
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(p) + " parameters, got " +
                                std::to_string(theta.size()));
}

Eigen::Index steps_between(double from, double to, double step) {
  const double n = (to - from) / step;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-6 * std::max(1.0, r))
    throw std::invalid_argument("observation spacing must be a multiple of the integration step");
  return static_cast<Eigen::Index>(r);
}

}  // namespace

// ---------------------------------------------------------------------------
// toy

Dataset simulate_toy(const ParamVector& theta, RngStream& rng) {
  require_dim(theta, 1, "simulate_toy");
  const double centre = rng.uniform() < 0.5 ? theta(0) + 2.0 : theta(0) - 1.0;
  Dataset x(1, 1);
  x(0, 0) = rng.normal(centre, std::sqrt(kToyVariance));
  return x;
}

// ---------------------------------------------------------------------------
// ODE

Eigen::Vector2d ode_rhs(const Eigen::Vector2d& x, const ParamVector& theta) {
  const double denom = 36.0 + x(1);
  if (std::abs(denom) < 1e-6 || !x.allFinite()) throw SimulationFailure("ode: 36 + x2 vanished");
  return {72.0 / denom - theta(0), theta(1) * x(0) - 1.0};
}

Dataset ode_trajectory(const ParamVector& theta, const OdeSettings& s) {
  require_dim(theta, 2, "simulate_ode");
  if (s.n_obs < 2 || !(s.step > 0.0) || !(s.t_end > 0.0)) throw std::invalid_argument("ode: invalid settings");
  const double spacing = s.t_end / static_cast<double>(s.n_obs - 1);
  const Eigen::Index sub = steps_between(0.0, spacing, s.step);
  const double h = spacing / static_cast<double>(sub);

  Dataset out(2, s.n_obs);
  Eigen::Vector2d x = s.x0;
  out.col(0) = x;
  for (Eigen::Index j = 1; j < s.n_obs; ++j) {
    for (Eigen::Index i = 0; i < sub; ++i) {
      const Eigen::Vector2d k1 = ode_rhs(x, theta);
      const Eigen::Vector2d k2 = ode_rhs(x + 0.5 * h * k1, theta);
      const Eigen::Vector2d k3 = ode_rhs(x + 0.5 * h * k2, theta);
      const Eigen::Vector2d k4 = ode_rhs(x + h * k3, theta);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite()) throw SimulationFailure("ode: non-finite state");
    out.col(j) = x;
  }
  return out;
}

Dataset simulate_ode(const ParamVector& theta, const OdeSettings& s, RngStream& rng) {
  Dataset x = ode_trajectory(theta, s);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < 2; ++i) x(i, j) += s.noise_sd(i) * rng.normal();
  return x;
}

OdeSystem::OdeSystem(OdeSettings settings) : settings_(std::move(settings)) {
  if (settings_.n_obs < 2 || !(settings_.step > 0.0) || (settings_.noise_sd.array() < 0.0).any())
    throw std::invalid_argument("ode: invalid settings");
}

std::vector<double> OdeSystem::times() const {
  std::vector<double> t(static_cast<std::size_t>(settings_.n_obs));
  for (std::size_t j = 0; j < t.size(); ++j)
    t[j] = settings_.t_end * static_cast<double>(j) / static_cast<double>(settings_.n_obs - 1);
  return t;
}

// ---------------------------------------------------------------------------
// SDE

std::string_view to_string(SdeScenario s) {
  switch (s) {
    case SdeScenario::D1: return "D1";
    case SdeScenario::D2: return "D2";
    case SdeScenario::D3: return "D3";
  }
  return "?";
}

SdeScenario sde_scenario_from_string(std::string_view name) {
  if (name == "D1") return SdeScenario::D1;
  if (name == "D2") return SdeScenario::D2;
  if (name == "D3") return SdeScenario::D3;
  throw std::invalid_argument("unknown SDE scenario '" + std::string(name) + "'");
}

std::vector<double> SdeSettings::default_obs_times() {
  std::vector<double> t(50);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  return t;
}

const Eigen::Matrix<double, 4, 8>& sde_stoichiometry() {
  static const Eigen::Matrix<double, 4, 8> s = [] {
    Eigen::Matrix<double, 4, 8> m;
    m << 0, 0, 1, 0, 0, 0, -1, 0,  //
        0, 0, 0, 1, -2, 2, 0, -1,  //
        -1, 1, 0, 0, 1, -1, 0, 0,  //
        -1, 1, 0, 0, 0, 0, 0, 0;
    return m;
  }();
  return s;
}

Propensities sde_propensities(const SdeState& x, const ParamVector& theta, double k) {
  const double rna = x(0), p = x(1), p2 = x(2), dna = x(3);
  Propensities h;
  h << theta(0) * dna * p2, theta(1) * (k - dna), theta(2) * dna, theta(3) * rna, theta(4) * p * (p - 1.0) / 2.0,
      theta(5) * p2, theta(6) * rna, theta(7) * p;
  return h;
}

SdeState sde_euler_step(const SdeState& x, const ParamVector& theta, double k, double dt, const Propensities& dw) {
  const Propensities h = sde_propensities(x, theta, k).cwiseMax(0.0);
  const Propensities diffusion = h.cwiseSqrt().cwiseProduct(dw);
  SdeState next = x + sde_stoichiometry() * (h * dt + diffusion);
  return next.cwiseMax(0.0);
}

Dataset sde_path(const ParamVector& theta, const SdeSettings& s, RngStream& rng) {
  if (theta.size() < 8) throw std::invalid_argument("simulate_sde: expected at least 8 rate constants");
  if ((theta.head(8).array() < 0.0).any()) throw std::invalid_argument("simulate_sde: rate constants must be >= 0");
  if (!(s.dt > 0.0) || s.obs_times.empty() || !(s.k > 0.0)) throw std::invalid_argument("simulate_sde: invalid settings");

  const auto n = static_cast<Eigen::Index>(s.obs_times.size());
  Dataset out(4, n);
  SdeState x = s.x0;
  double t = 0.0;
  const double sqdt = std::sqrt(s.dt);
  Propensities dw = Propensities::Zero();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index steps = steps_between(t, s.obs_times[static_cast<std::size_t>(j)], s.dt);
    if (steps < 0) throw std::invalid_argument("simulate_sde: observation times must be increasing");
    for (Eigen::Index i = 0; i < steps; ++i) {
      if (s.diffusion)
        for (int r = 0; r < 8; ++r) dw(r) = sqdt * rng.normal();
      x = sde_euler_step(x, theta, s.k, s.dt, dw);
    }
    if (!x.allFinite()) throw SimulationFailure("sde: non-finite state");
    t = s.obs_times[static_cast<std::size_t>(j)];
    out.col(j) = x;
  }
  return out;
}

Dataset simulate_sde(const ParamVector& theta, const SdeSettings& s, RngStream& rng) {
  const Eigen::Index p = s.sigma_inferred() ? 9 : 8;
  require_dim(theta, p, "simulate_sde");
  const Dataset path = sde_path(theta, s, rng);
  Dataset obs = s.observes_dna() ? path : Dataset(path.topRows(3));
  double sd = 0.0;
  switch (s.scenario) {
    case SdeScenario::D1: sd = 0.0; break;
    case SdeScenario::D2: sd = std::sqrt(s.noise_variance); break;
    case SdeScenario::D3:
      if (!(theta(8) >= 0.0)) throw std::invalid_argument("simulate_sde: sigma must be nonnegative");
      sd = theta(8);
      break;
  }
  if (sd > 0.0)
    for (Eigen::Index j = 0; j < obs.cols(); ++j)
      for (Eigen::Index i = 0; i < obs.rows(); ++i) obs(i, j) += sd * rng.normal();
  return obs;
}

SdeNetwork::SdeNetwork(SdeSettings settings) : settings_(std::move(settings)) {
  if (!(settings_.dt > 0.0) || settings_.obs_times.empty() || settings_.noise_variance < 0.0 || !(settings_.k > 0.0))
    throw std::invalid_argument("sde: invalid settings");
  for (std::size_t i = 1; i < settings_.obs_times.size(); ++i)
    if (!(settings_.obs_times[i] > settings_.obs_times[i - 1]))
      throw std::invalid_argument("sde: observation times must be strictly increasing");
}

// ---------------------------------------------------------------------------
// DDE

std::vector<double> DdeSettings::default_obs_times() {
  std::vector<double> t(static_cast<std::size_t>(kBlowflyObservations));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 2.0 * static_cast<double>(i + 1);
  return t;
}

namespace {

void check_dde_theta(const ParamVector& theta) {
  if (theta.size() < 4) throw std::invalid_argument("simulate_dde: expected (X0, nu, P, tau[, sigma])");
  if (!(theta(0) > 0.0) || !(theta(1) > 0.0) || !(theta(2) > 0.0) || !(theta(3) > 0.0))
    throw std::invalid_argument("simulate_dde: X0, nu, P and tau must be positive");
}

}  // namespace

Eigen::VectorXd dde_euler_grid(const ParamVector& theta, double step, double t_end) {
  check_dde_theta(theta);
  if (!(step > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("dde: invalid step or horizon");
  const double x0 = theta(0), nu = theta(1), cap = 1000.0 * theta(2), tau = theta(3);
  const auto n = static_cast<Eigen::Index>(std::ceil(t_end / step - 1e-9));
  const double lag = tau / step;  // delay in steps
  Eigen::VectorXd x(n + 1);
  x(0) = x0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double pos = static_cast<double>(k) - lag;
    double delayed;
    if (pos <= 0.0) {
      delayed = x0;
    } else {
      const double fl = std::floor(pos);
      const auto i = static_cast<Eigen::Index>(fl);
      const double frac = pos - fl;
      delayed = frac < 1e-9 ? x(i) : (1.0 - frac) * x(i) + frac * x(i + 1);
    }
    const double next = x(k) + step * nu * x(k) * (1.0 - delayed / cap);
    if (!std::isfinite(next) || !(next > 0.0)) throw SimulationFailure("dde: population left (0, inf)");
    x(k + 1) = next;
  }
  return x;
}

Dataset dde_trajectory(const ParamVector& theta, const DdeSettings& s) {
  check_dde_theta(theta);
  if (s.obs_times.empty()) throw std::invalid_argument("dde: no observation times");
  const Eigen::VectorXd grid = dde_euler_grid(theta, s.step, s.obs_times.back());
  Dataset out(1, static_cast<Eigen::Index>(s.obs_times.size()));
  for (std::size_t j = 0; j < s.obs_times.size(); ++j) {
    const double pos = s.obs_times[j] / s.step;
    const double fl = std::floor(pos + 1e-9);
    const auto i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(fl), 0, grid.size() - 1);
    const double frac = std::max(0.0, pos - fl);
    out(0, static_cast<Eigen::Index>(j)) =
        (frac < 1e-9 || i + 1 >= grid.size()) ? grid(i) : (1.0 - frac) * grid(i) + frac * grid(i + 1);
  }
  return out;
}

Dataset simulate_dde(const ParamVector& theta, const DdeSettings& s, RngStream& rng) {
  require_dim(theta, s.infer_sigma ? 5 : 4, "simulate_dde");
  const double sigma = s.infer_sigma ? theta(4) : s.sigma;
  if (!(sigma > 0.0)) throw std::invalid_argument("simulate_dde: sigma must be positive");
  Dataset y = dde_trajectory(theta, s);
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double x = y(0, j);
    if (s.noise == DdeNoise::log_location) {
      y(0, j) = std::exp(std::log(x) + sigma * rng.normal());
    } else {
      const double s2 = std::log1p(sigma * sigma / (x * x));
      y(0, j) = std::exp(std::log(x) - 0.5 * s2 + std::sqrt(s2) * rng.normal());
    }
  }
  return y;
}

DdeBlowfly::DdeBlowfly(DdeSettings settings) : settings_(std::move(settings)) {
  if (!(settings_.step > 0.0) || settings_.obs_times.empty() || !(settings_.sigma > 0.0))
    throw std::invalid_argument("dde: invalid settings");
  for (std::size_t i = 1; i < settings_.obs_times.size(); ++i)
    if (!(settings_.obs_times[i] > settings_.obs_times[i - 1]))
      throw std::invalid_argument("dde: observation times must be strictly increasing");
}

// ---------------------------------------------------------------------------
// files

ObservedSeries read_observed_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 2 || t.header.front() != "time")
    throw FormatError(path + ": expected header time,value_1..value_d");
  ObservedSeries s;
  const auto d = static_cast<Eigen::Index>(t.header.size() - 1);
  s.values.resize(d, static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    s.times.push_back(parse_double(t.rows[r][0]));
    for (Eigen::Index i = 0; i < d; ++i) {
      const double v = parse_double(t.rows[r][static_cast<std::size_t>(i + 1)]);
      if (!std::isfinite(v)) throw FormatError(path + ": non-finite value in row " + std::to_string(r + 1));
      s.values(i, static_cast<Eigen::Index>(r)) = v;
    }
    if (r > 0 && !(s.times[r] > s.times[r - 1])) throw FormatError(path + ": times must be strictly increasing");
  }
  return s;
}

void write_observed_csv(const std::string& path, const ObservedSeries& series, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  if (!comment.empty()) out << "# " << comment << '\n';
  auto header = numbered_columns("value", static_cast<std::size_t>(series.values.rows()));
  header.insert(header.begin(), "time");
  write_csv_row(out, header);
  for (Eigen::Index j = 0; j < series.values.cols(); ++j) {
    std::vector<std::string> row{format_double(series.times[static_cast<std::size_t>(j)])};
    for (Eigen::Index i = 0; i < series.values.rows(); ++i) row.push_back(format_double(series.values(i, j)));
    write_csv_row(out, row);
  }
}

ObservedSeries load_blowfly_data(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2) throw FormatError(path + ": expected two columns time,count");
  if (static_cast<Eigen::Index>(t.rows.size()) != kBlowflyObservations)
    throw FormatError(path + ": expected " + std::to_string(kBlowflyObservations) + " observations, found " +
                      std::to_string(t.rows.size()));
  ObservedSeries s;
  s.values.resize(1, kBlowflyObservations);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    s.times.push_back(parse_double(t.rows[r][0]));
    const double c = parse_double(t.rows[r][1]);
    if (!std::isfinite(c) || !(c > 0.0))
      throw FormatError(path + ": counts must be positive (row " + std::to_string(r + 1) + ")");
    if (r > 0 && !(s.times[r] > s.times[r - 1])) throw FormatError(path + ": times must be strictly increasing");
    s.values(0, static_cast<Eigen::Index>(r)) = c;
  }
  return s;
}

}  // namespace ejabc
