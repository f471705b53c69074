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

#include "ejabc/mcmc.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ejabc/csv.hpp"
#include "ejabc/parallel.hpp"

namespace ejabc {

std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::abc_mcmc: return "abc_mcmc";
    case SamplerKind::oej_mcmc: return "oej_mcmc";
    case SamplerKind::ej_mcmc: return "ej_mcmc";
  }
  return "?";
}

std::optional<SamplerKind> sampler_from_string(std::string_view name) {
  if (name == "abc_mcmc") return SamplerKind::abc_mcmc;
  if (name == "oej_mcmc") return SamplerKind::oej_mcmc;
  if (name == "ej_mcmc") return SamplerKind::ej_mcmc;
  return std::nullopt;
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::early_reject_stage1: return "early_reject_stage1";
    case Outcome::early_reject_stage2: return "early_reject_stage2";
    case Outcome::sim_reject: return "sim_reject";
    case Outcome::accept: return "accept";
  }
  return "?";
}

Outcome outcome_from_string(std::string_view name) {
  if (name == "early_reject_stage1") return Outcome::early_reject_stage1;
  if (name == "early_reject_stage2") return Outcome::early_reject_stage2;
  if (name == "sim_reject") return Outcome::sim_reject;
  if (name == "accept") return Outcome::accept;
  throw FormatError("unknown outcome '" + std::string(name) + "'");
}

Surrogate gp_surrogate(std::shared_ptr<const GPModel> model, double a) {
  if (!model) throw std::invalid_argument("gp_surrogate: null model");
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("gp_surrogate: a must lie in (0, 1)");
  return [model = std::move(model), a](const ParamVector& theta) { return h_quantile(*model, theta, a); };
}

void SamplerConfig::validate() const {
  if (!(eps > 0.0)) throw std::invalid_argument("sampler: eps must be positive");
  if (!proposal) throw std::invalid_argument("sampler: proposal is required");
  if (prior.dim() == 0) throw std::invalid_argument("sampler: prior is required");
  if (sampler == SamplerKind::ej_mcmc && !h) throw std::invalid_argument("sampler: ej_mcmc requires a surrogate");
  if (init && init->size() != prior.dim()) throw std::invalid_argument("sampler: init dimension mismatch");
  if (max_init_attempts < 1) throw std::invalid_argument("sampler: max_init_attempts must be positive");
}

ChainState make_state(const ParamVector& theta, double delta, const SamplerConfig& cfg) {
  ChainState s;
  s.theta = theta;
  s.log_prior = cfg.prior.log_density(theta);
  s.delta = delta;
  s.kern_delta = kernel_weight(cfg.kernel, delta, cfg.eps);
  if (cfg.sampler == SamplerKind::ej_mcmc) {
    s.h_val = cfg.h(theta);
    s.kern_h = kernel_weight(cfg.kernel, s.h_val, cfg.eps);
  }
  return s;
}

bool state_valid(const ChainState& s) {
  return std::isfinite(s.log_prior) && std::min(s.kern_delta, s.kern_h) > 0.0;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// num / den where den >= 0; a zero denominator only arises from invalid states.
double safe_ratio(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? kInf : 0.0;
}

struct Proposed {
  ParamVector theta;
  double log_prior;
  double w;
  double prior_ratio;  // pi(t*) q(t | t*) / (pi(t) q(t* | t))
};

Proposed propose(const ChainState& s, const SamplerConfig& cfg, RngStream& rng) {
  Proposed p;
  p.theta = cfg.proposal->draw(s.theta, rng);
  p.w = rng.uniform();
  p.log_prior = cfg.prior.log_density(p.theta);
  p.prior_ratio = std::isfinite(p.log_prior)
                      ? std::exp(p.log_prior - s.log_prior + cfg.proposal->log_ratio(p.theta, s.theta))
                      : 0.0;
  return p;
}

IterationRecord early1(const Proposed& p) {
  IterationRecord r;
  r.outcome = Outcome::early_reject_stage1;
  r.theta = p.theta;
  return r;
}

double simulate(const DistanceFn& distance, const ParamVector& theta, RngStream& rng, IterationRecord& r) {
  double d = distance(theta, rng);
  if (std::isnan(d)) d = kInf;
  r.delta = d;
  r.sim = 1;
  r.failed = std::isinf(d);
  return d;
}

ChainState accepted(const Proposed& p, double delta, double h, double kd, double kh) {
  ChainState s;
  s.theta = p.theta;
  s.log_prior = p.log_prior;
  s.delta = delta;
  s.h_val = h;
  s.kern_delta = kd;
  s.kern_h = kh;
  return s;
}

}  // namespace

StepResult abc_mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance,
                         RngStream& rng) {
  const Proposed p = propose(state, cfg, rng);
  if (p.prior_ratio == 0.0) return {state, early1(p)};
  IterationRecord r;
  r.theta = p.theta;
  const double d = simulate(distance, p.theta, rng, r);
  const double kd = kernel_weight(cfg.kernel, d, cfg.eps);
  const double alpha = std::min(1.0, safe_ratio(p.prior_ratio * kd, state.kern_delta));
  if (p.w < alpha) {
    r.outcome = Outcome::accept;
    return {accepted(p, d, 0.0, kd, 1.0), r};
  }
  r.outcome = Outcome::sim_reject;
  return {state, r};
}

StepResult oej_mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance,
                         RngStream& rng) {
  const Proposed p = propose(state, cfg, rng);
  const double bound = safe_ratio(p.prior_ratio, state.kern_delta);
  if (p.prior_ratio == 0.0 || p.w >= bound) return {state, early1(p)};
  IterationRecord r;
  r.theta = p.theta;
  const double d = simulate(distance, p.theta, rng, r);
  const double kd = kernel_weight(cfg.kernel, d, cfg.eps);
  const double alpha = std::min(1.0, safe_ratio(p.prior_ratio * kd, state.kern_delta));
  if (p.w < alpha) {
    r.outcome = Outcome::accept;
    return {accepted(p, d, 0.0, kd, 1.0), r};
  }
  r.outcome = Outcome::sim_reject;
  return {state, r};
}

StepResult ej_mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance,
                        RngStream& rng) {
  const Proposed p = propose(state, cfg, rng);
  const double den = std::min(state.kern_delta, state.kern_h);
  if (p.prior_ratio == 0.0 || p.w >= safe_ratio(p.prior_ratio, den)) return {state, early1(p)};

  IterationRecord r;
  r.theta = p.theta;
  const double h = cfg.h(p.theta);
  r.h = h;
  const double kh = kernel_weight(cfg.kernel, h, cfg.eps);
  if (p.w >= safe_ratio(p.prior_ratio * kh, den)) {
    r.outcome = Outcome::early_reject_stage2;
    return {state, r};
  }

  const double d = simulate(distance, p.theta, rng, r);
  const double kd = kernel_weight(cfg.kernel, d, cfg.eps);
  const double alpha = std::min(1.0, safe_ratio(p.prior_ratio * std::min(kd, kh), den));
  if (p.w < alpha) {
    r.outcome = Outcome::accept;
    return {accepted(p, d, h, kd, kh), r};
  }
  r.outcome = Outcome::sim_reject;
  return {state, r};
}

StepResult mcmc_step(const ChainState& state, const SamplerConfig& cfg, const DistanceFn& distance, RngStream& rng) {
  switch (cfg.sampler) {
    case SamplerKind::abc_mcmc: return abc_mcmc_step(state, cfg, distance, rng);
    case SamplerKind::oej_mcmc: return oej_mcmc_step(state, cfg, distance, rng);
    case SamplerKind::ej_mcmc: return ej_mcmc_step(state, cfg, distance, rng);
  }
  throw std::logic_error("unknown sampler");
}

InitResult initialize_chain(const SamplerConfig& cfg, const DistanceFn& distance, RngStream& rng) {
  cfg.validate();
  for (int attempt = 1; attempt <= cfg.max_init_attempts; ++attempt) {
    const ParamVector theta = (attempt == 1 && cfg.init) ? *cfg.init : cfg.prior.sample(rng);
    if (!cfg.prior.in_support(theta)) continue;
    if (cfg.sampler == SamplerKind::ej_mcmc && !(kernel_weight(cfg.kernel, cfg.h(theta), cfg.eps) > 0.0)) continue;
    double d = distance(theta, rng);
    if (std::isnan(d)) d = kInf;
    ChainState s = make_state(theta, d, cfg);
    if (state_valid(s)) return {std::move(s), attempt};
  }
  throw InitializationFailure("no valid initial state within " + std::to_string(cfg.max_init_attempts) +
                              " attempts (eps = " + format_double(cfg.eps) + ")");
}

ChainResult run_chain(const SamplerConfig& cfg, const DistanceFn& distance, RngStream& rng) {
  cfg.validate();
  ChainResult out;
  const Eigen::Index p = cfg.prior.dim();
  out.samples.resize(static_cast<Eigen::Index>(cfg.iterations), p);
  if (cfg.iterations == 0) return out;
  InitResult init = initialize_chain(cfg, distance, rng);
  out.initial = init.state;
  out.init_attempts = init.attempts;
  ChainState state = std::move(init.state);
  out.trace.reserve(cfg.iterations);
  for (std::size_t n = 0; n < cfg.iterations; ++n) {
    StepResult step = mcmc_step(state, cfg, distance, rng);
    step.record.iteration = n;
    state = std::move(step.state);
    out.samples.row(static_cast<Eigen::Index>(n)) = state.theta.transpose();
    out.trace.push_back(std::move(step.record));
  }
  return out;
}

std::vector<ChainResult> run_chains(const SamplerConfig& cfg, const DistanceFn& distance, const RngStream& rng,
                                    int n_chains, int workers) {
  if (n_chains < 1) throw std::invalid_argument("run_chains: need at least one chain");
  std::vector<ChainResult> results(static_cast<std::size_t>(n_chains));
  parallel_for(results.size(), workers, [&](std::size_t c) {
    RngStream child = rng.split(c);
    results[c] = run_chain(cfg, distance, child);
  });
  return results;
}

void write_trace_csv(std::ostream& out, const std::vector<IterationRecord>& trace, Eigen::Index p,
                     std::size_t first_iteration) {
  std::vector<std::string> header{"iteration", "outcome"};
  for (auto& c : numbered_columns("theta", static_cast<std::size_t>(p))) header.push_back(c);
  header.insert(header.end(), {"h", "delta", "sim"});
  write_csv_row(out, header);
  std::vector<std::string> row;
  for (const auto& r : trace) {
    row.clear();
    row.push_back(std::to_string(first_iteration + r.iteration));
    row.emplace_back(to_string(r.outcome));
    for (Eigen::Index i = 0; i < p; ++i) row.push_back(format_double(r.theta(i)));
    row.push_back(r.h ? format_double(*r.h) : std::string());
    row.push_back(r.delta ? format_double(*r.delta) : std::string());
    row.push_back(std::to_string(r.sim));
    write_csv_row(out, row);
  }
}

void write_samples_csv(std::ostream& out, const Eigen::MatrixXd& samples) {
  write_csv_row(out, numbered_columns("theta", static_cast<std::size_t>(samples.cols())));
  std::vector<std::string> row;
  for (Eigen::Index n = 0; n < samples.rows(); ++n) {
    row.clear();
    for (Eigen::Index i = 0; i < samples.cols(); ++i) row.push_back(format_double(samples(n, i)));
    write_csv_row(out, row);
  }
}

std::vector<IterationRecord> read_trace_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t it = t.column("iteration"), oc = t.column("outcome"), hc = t.column("h"),
                    dc = t.column("delta"), sc = t.column("sim");
  std::vector<std::size_t> tc;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i].rfind("theta_", 0) == 0) tc.push_back(i);
  std::vector<IterationRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    IterationRecord r;
    r.iteration = static_cast<std::size_t>(parse_double(row[it]));
    r.outcome = outcome_from_string(row[oc]);
    r.theta.resize(static_cast<Eigen::Index>(tc.size()));
    for (std::size_t k = 0; k < tc.size(); ++k) r.theta(static_cast<Eigen::Index>(k)) = parse_double(row[tc[k]]);
    if (!row[hc].empty()) r.h = parse_double(row[hc]);
    if (!row[dc].empty()) r.delta = parse_double(row[dc]);
    r.sim = static_cast<int>(parse_double(row[sc]));
    r.failed = r.delta && std::isinf(*r.delta);
    out.push_back(std::move(r));
  }
  return out;
}

Eigen::MatrixXd read_samples_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::vector<std::size_t> tc;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i].rfind("theta_", 0) == 0) tc.push_back(i);
  if (tc.empty()) throw FormatError(path + ": no theta columns");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(tc.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t k = 0; k < tc.size(); ++k)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = parse_double(t.rows[r][tc[k]]);
  return m;
}

}  // namespace ejabc
