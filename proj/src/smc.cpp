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

#include "ejabc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ejabc/csv.hpp"
#include "ejabc/parallel.hpp"

namespace ejabc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool theta_less(const ParamVector& a, const ParamVector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// One representative index per distinct theta among particles with positive weight.
std::vector<std::size_t> unique_alive_indices(const ParticleSet& ps) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps[i].weight > 0.0) idx.push_back(i);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return theta_less(ps[a].theta, ps[b].theta); });
  idx.erase(std::unique(idx.begin(), idx.end(),
                        [&](std::size_t a, std::size_t b) { return ps[a].theta == ps[b].theta; }),
            idx.end());
  return idx;
}

double kernel_at(KernelFamily k, double delta, double eps) {
  if (std::isinf(eps)) return std::isinf(delta) || std::isnan(delta) ? 0.0 : 1.0;
  return kernel_weight(k, delta, eps);
}

int alive_count(const ParticleSet& ps, const std::vector<std::size_t>& uniq, KernelFamily k, double eps) {
  int n = 0;
  for (auto i : uniq)
    if (kernel_at(k, ps[i].delta, eps) > 0.0) ++n;
  return n;
}

}  // namespace

int unique_alive(const ParticleSet& particles) { return static_cast<int>(unique_alive_indices(particles).size()); }

double effective_sample_size(const ParticleSet& particles) {
  double s = 0.0, s2 = 0.0;
  for (const auto& p : particles) {
    s += p.weight;
    s2 += p.weight * p.weight;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

double select_epsilon(const ParticleSet& particles, double gamma, KernelFamily kernel, double eps_prev) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("select_epsilon: gamma must lie in (0, 1)");
  if (!(eps_prev > 0.0)) throw std::invalid_argument("select_epsilon: eps_prev must be positive");
  const auto n = static_cast<double>(particles.size());
  const int need = static_cast<int>(std::ceil(gamma * n - 1e-12));
  const auto uniq = unique_alive_indices(particles);
  if (alive_count(particles, uniq, kernel, eps_prev) < need)
    throw DegeneracyError("select_epsilon: fewer than " + std::to_string(need) + " unique particles alive at eps " +
                          format_double(eps_prev));

  std::vector<double> d;
  for (auto i : uniq)
    if (std::isfinite(particles[i].delta) && particles[i].delta <= eps_prev) d.push_back(particles[i].delta);
  std::sort(d.begin(), d.end());

  if (kernel == KernelFamily::uniform) return d[static_cast<std::size_t>(need - 1)];

  double lo = d.front();
  double hi = std::isinf(eps_prev) ? d.back() * (1.0 + 1e-6) + 1e-300 : eps_prev;
  if (alive_count(particles, uniq, kernel, hi) < need) hi = eps_prev;  // only reachable when eps_prev is finite
  if (alive_count(particles, uniq, kernel, lo) >= need) return lo;
  while (hi - lo > 1e-6 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (alive_count(particles, uniq, kernel, mid) >= need)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

ParticleSet reweight(const ParticleSet& particles, double eps_old, double eps_new, KernelFamily kernel) {
  if (!(eps_new > 0.0) || eps_new > eps_old) throw std::invalid_argument("reweight: need 0 < eps_new <= eps_old");
  ParticleSet out = particles;
  double total = 0.0;
  for (auto& p : out) {
    if (p.weight > 0.0) {
      const double k_old = kernel_at(kernel, p.delta, eps_old);
      const double k_new = kernel_at(kernel, p.delta, eps_new);
      p.weight = k_old > 0.0 ? p.weight * (k_new / k_old) : 0.0;
    } else {
      p.weight = 0.0;
    }
    total += p.weight;
  }
  if (!(total > 0.0)) throw DegeneracyError("reweight: all weights vanished");
  for (auto& p : out) p.weight /= total;
  return out;
}

Eigen::MatrixXd adapt_proposal_cov(const ParticleSet& particles) {
  if (unique_alive(particles) < 2) throw DegeneracyError("adapt_proposal_cov: fewer than 2 unique alive particles");
  const Eigen::Index p = particles.front().theta.size();
  double total = 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const auto& q : particles) {
    if (q.weight <= 0.0) continue;
    total += q.weight;
    mean += q.weight * q.theta;
  }
  mean /= total;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  for (const auto& q : particles) {
    if (q.weight <= 0.0) continue;
    const Eigen::VectorXd c = q.theta - mean;
    cov.noalias() += (q.weight / total) * c * c.transpose();
  }
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += 1e-10 * cov.trace() / static_cast<double>(p);
  return cov;
}

ParticleSet systematic_resample(const ParticleSet& particles, RngStream& rng) {
  const std::size_t n = particles.size();
  double total = 0.0;
  for (const auto& p : particles) total += p.weight;
  if (!(total > 0.0)) throw DegeneracyError("resample: all weights are zero");
  ParticleSet out;
  out.reserve(n);
  const double step = total / static_cast<double>(n);
  double u = rng.uniform() * step;
  double cum = particles[0].weight;
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (u >= cum && j + 1 < n) cum += particles[++j].weight;
    out.push_back(particles[j]);
    out.back().weight = 1.0 / static_cast<double>(n);
    u += step;
  }
  return out;
}

bool resample(ParticleSet& particles, RngStream& rng, double ess_fraction) {
  if (effective_sample_size(particles) >= ess_fraction * static_cast<double>(particles.size())) return false;
  particles = systematic_resample(particles, rng);
  return true;
}

void SmcConfig::validate() const {
  if (n_particles < 2) throw std::invalid_argument("smc: n_particles must be at least 2");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("smc: gamma must lie in (0, 1)");
  if (prior.dim() == 0) throw std::invalid_argument("smc: prior is required");
  if (moves_per_round < 0) throw std::invalid_argument("smc: moves_per_round must be >= 0");
  if (!(ess_fraction >= 0.0 && ess_fraction <= 1.0)) throw std::invalid_argument("smc: ess_fraction must lie in [0, 1]");
  if (!(proposal_scale > 0.0)) throw std::invalid_argument("smc: proposal_scale must be positive");
  if (!sim_budget && !target_eps && !max_rounds) throw std::invalid_argument("smc: no stopping rule");
  if (target_eps && !(*target_eps > 0.0)) throw std::invalid_argument("smc: target_eps must be positive");
  if (max_rounds && *max_rounds < 0) throw std::invalid_argument("smc: max_rounds must be >= 0");
  if (!(min_accept_rate >= 0.0 && min_accept_rate < 1.0))
    throw std::invalid_argument("smc: min_accept_rate must lie in [0, 1)");
  if (move == SmcMove::ej && !h) throw std::invalid_argument("smc: ej moves require a surrogate");
}

SmcResult run_ejasmc(const SmcConfig& cfg, const DistanceFn& distance, const RngStream& rng) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n_particles);
  SmcResult res;
  res.simulations.thetas.resize(0, cfg.prior.dim());

  // round 0: prior sampling
  {
    const RngStream round_rng = rng.split(0);
    res.particles.resize(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      RngStream s = round_rng.split(i + 1);
      Particle& p = res.particles[i];
      p.theta = cfg.prior.sample(s);
      double d = distance(p.theta, s);
      p.delta = std::isnan(d) ? kInf : d;
      p.weight = 1.0 / static_cast<double>(n);
    });
    RoundReport r0;
    r0.round = 0;
    r0.eps = kInf;
    r0.n_sim = n;
    std::size_t ok = 0;
    for (const auto& p : res.particles)
      if (std::isfinite(p.delta)) {
        res.simulations.add(p.theta, p.delta);
        ++ok;
      }
    if (ok == 0) throw DegeneracyError("smc: every prior simulation failed");
    for (auto& p : res.particles) p.weight = std::isfinite(p.delta) ? 1.0 / static_cast<double>(ok) : 0.0;
    res.total_sims = n;
    r0.unique_alive = unique_alive(res.particles);
    res.rounds.push_back(r0);
  }

  auto stop = [&](int round) {
    const RoundReport& last = res.rounds.back();
    if (cfg.sim_budget && res.total_sims >= *cfg.sim_budget) res.stop_reason = "sim_budget";
    else if (cfg.target_eps && res.eps <= *cfg.target_eps) res.stop_reason = "target_eps";
    else if (cfg.max_rounds && round >= *cfg.max_rounds) res.stop_reason = "max_rounds";
    else if (last.n_moves > 0 && last.accept_rate < cfg.min_accept_rate) res.stop_reason = "min_accept_rate";
    return !res.stop_reason.empty();
  };

  try {
    for (int round = 1; !stop(round - 1); ++round) {
      const RngStream round_rng = rng.split(static_cast<std::uint64_t>(round));
      double eps_new = select_epsilon(res.particles, cfg.gamma, cfg.kernel, res.eps);
      if (cfg.target_eps) eps_new = std::min(std::max(eps_new, *cfg.target_eps), res.eps);
      res.particles = reweight(res.particles, res.eps, eps_new, cfg.kernel);
      res.eps = eps_new;

      RoundReport rep;
      rep.round = round;
      rep.eps = eps_new;
      RngStream resample_rng = round_rng.split(0);
      rep.resampled = resample(res.particles, resample_rng, cfg.ess_fraction);

      if (cfg.moves_per_round > 0) {
        SamplerConfig sc;
        sc.sampler = cfg.move == SmcMove::ej ? SamplerKind::ej_mcmc : SamplerKind::oej_mcmc;
        sc.kernel = cfg.kernel;
        sc.eps = eps_new;
        sc.prior = cfg.prior;
        sc.proposal = std::make_shared<GaussianRandomWalk>(cfg.proposal_scale * adapt_proposal_cov(res.particles));
        sc.h = cfg.h;

        std::vector<std::vector<IterationRecord>> recs(n);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
          Particle& p = res.particles[i];
          if (!(p.weight > 0.0)) return;
          RngStream s = round_rng.split(i + 1);
          ChainState st;
          st.theta = p.theta;
          st.log_prior = cfg.prior.log_density(p.theta);
          st.delta = p.delta;
          st.kern_delta = kernel_weight(cfg.kernel, p.delta, eps_new);
          if (sc.sampler == SamplerKind::ej_mcmc) {
            if (std::isnan(p.h)) p.h = cfg.h(p.theta);
            st.h_val = p.h;
            st.kern_h = kernel_weight(cfg.kernel, p.h, eps_new);
          }
          for (int m = 0; m < cfg.moves_per_round; ++m) {
            StepResult step = mcmc_step(st, sc, distance, s);
            st = std::move(step.state);
            recs[i].push_back(std::move(step.record));
          }
          p.theta = st.theta;
          p.delta = st.delta;
          if (sc.sampler == SamplerKind::ej_mcmc) p.h = st.h_val;
        });

        for (std::size_t i = 0; i < n; ++i) {
          for (auto& r : recs[i]) {
            r.iteration = res.moves.size();
            ++rep.n_moves;
            switch (r.outcome) {
              case Outcome::early_reject_stage1: ++rep.n_early1; break;
              case Outcome::early_reject_stage2: ++rep.n_early2; break;
              case Outcome::accept: ++rep.n_accept; break;
              case Outcome::sim_reject: break;
            }
            if (r.h) ++rep.n_pre;
            if (r.sim) {
              ++rep.n_sim;
              if (r.delta && std::isfinite(*r.delta)) res.simulations.add(r.theta, *r.delta);
            }
            res.moves.push_back(std::move(r));
          }
        }
      }
      rep.accept_rate = rep.n_moves ? static_cast<double>(rep.n_accept) / static_cast<double>(rep.n_moves) : 0.0;
      rep.unique_alive = unique_alive(res.particles);
      res.total_sims += rep.n_sim;
      res.rounds.push_back(rep);
    }
  } catch (const DegeneracyError& e) {
    res.failure = e.what();
    res.stop_reason = "degeneracy";
  }
  return res;
}

TrainingData collect_training_data(SmcConfig pilot, std::size_t budget, const DistanceFn& distance,
                                   const RngStream& rng) {
  if (budget < 5) throw std::invalid_argument("collect_training_data: budget must be at least 5");
  pilot.move = SmcMove::oej;
  pilot.sim_budget = pilot.sim_budget ? std::min(*pilot.sim_budget, budget) : budget;
  SmcResult r = run_ejasmc(pilot, distance, rng);
  TrainingData out;
  const auto have = r.simulations.size();
  out.complete = have >= static_cast<Eigen::Index>(budget);
  out.data = out.complete ? r.simulations.head(static_cast<Eigen::Index>(budget)) : std::move(r.simulations);
  return out;
}

TrainingData prior_training_data(const PriorSpec& prior, std::size_t budget, const DistanceFn& distance,
                                 const RngStream& rng, int workers) {
  if (budget < 1) throw std::invalid_argument("prior_training_data: budget must be positive");
  std::vector<ParamVector> thetas(budget);
  std::vector<double> deltas(budget, kInf);
  parallel_for(budget, workers, [&](std::size_t i) {
    RngStream s = rng.split(i);
    for (int attempt = 0; attempt < 100 && !std::isfinite(deltas[i]); ++attempt) {
      thetas[i] = prior.sample(s);
      deltas[i] = distance(thetas[i], s);
    }
  });
  TrainingData out;
  out.data.thetas.resize(0, prior.dim());
  for (std::size_t i = 0; i < budget; ++i) {
    if (std::isfinite(deltas[i])) out.data.add(thetas[i], deltas[i]);
    else out.complete = false;
  }
  return out;
}

void write_report_csv(std::ostream& out, const std::vector<RoundReport>& rounds) {
  write_csv_row(out, {"round", "eps", "unique_alive", "accept_rate", "n_sim", "n_early1", "n_early2"});
  for (const auto& r : rounds)
    write_csv_row(out, {std::to_string(r.round), format_double(r.eps), std::to_string(r.unique_alive),
                        format_double(r.accept_rate), std::to_string(r.n_sim), std::to_string(r.n_early1),
                        std::to_string(r.n_early2)});
}

void write_particles_csv(std::ostream& out, const ParticleSet& particles) {
  const std::size_t p = particles.empty() ? 0 : static_cast<std::size_t>(particles.front().theta.size());
  auto header = numbered_columns("theta", p);
  header.push_back("delta");
  header.push_back("weight");
  write_csv_row(out, header);
  std::vector<std::string> row;
  for (const auto& q : particles) {
    row.clear();
    for (Eigen::Index i = 0; i < q.theta.size(); ++i) row.push_back(format_double(q.theta(i)));
    row.push_back(format_double(q.delta));
    row.push_back(format_double(q.weight));
    write_csv_row(out, row);
  }
}

}  // namespace ejabc
