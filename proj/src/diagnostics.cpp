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

#include "ejabc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ejabc/normal.hpp"
#include "ejabc/simulators.hpp"

namespace ejabc {

Eigen::VectorXd uniform_grid(double lo, double hi, Eigen::Index n) {
  if (!(hi > lo) || n < 2) throw std::invalid_argument("uniform_grid: need lo < hi and n >= 2");
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values) {
  if (grid.size() != values.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.0;
  for (Eigen::Index i = 1; i < grid.size(); ++i) s += 0.5 * (grid(i) - grid(i - 1)) * (values(i) + values(i - 1));
  return s;
}

double silverman_bandwidth(const Eigen::VectorXd& samples) {
  const auto n = static_cast<double>(samples.size());
  if (n < 2) throw std::invalid_argument("silverman_bandwidth: need at least 2 samples");
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1.0));
  return 1.06 * sd * std::pow(n, -0.2);
}

namespace {

void check_grid(const Eigen::VectorXd& grid) {
  if (grid.size() < 2) throw std::invalid_argument("density grid needs at least 2 points");
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (!(grid(i) > grid(i - 1))) throw std::invalid_argument("density grid must be strictly increasing");
}

constexpr Eigen::Index kBinnedThreshold = 2000;
constexpr Eigen::Index kBins = 4096;

}  // namespace

KdeResult kde_density(const Eigen::VectorXd& samples, const Eigen::VectorXd& grid, std::optional<double> bandwidth) {
  check_grid(grid);
  if (samples.size() < 2) throw std::invalid_argument("kde_density: need at least 2 samples");
  if (!samples.allFinite()) throw std::invalid_argument("kde_density: non-finite sample");
  KdeResult out;
  out.density.grid = grid;
  out.density.values = Eigen::VectorXd::Zero(grid.size());

  const double lo = samples.minCoeff(), hi = samples.maxCoeff();
  if (lo == hi) {
    out.point_mass = true;
    Eigen::Index k = 0;
    (grid.array() - lo).abs().minCoeff(&k);
    const double left = k > 0 ? grid(k) - grid(k - 1) : 0.0;
    const double right = k + 1 < grid.size() ? grid(k + 1) - grid(k) : 0.0;
    out.density.values(k) = 2.0 / (left + right);
    return out;
  }

  const double bw = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(bw > 0.0)) throw std::invalid_argument("kde_density: bandwidth must be positive");
  out.bandwidth = bw;
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bw);

  auto smooth = [&](const Eigen::VectorXd& centres, const Eigen::VectorXd& mass) {
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < centres.size(); ++i) {
        const double z = (grid(g) - centres(i)) / bw;
        if (std::abs(z) < 8.0) s += mass(i) * std::exp(-0.5 * z * z);
      }
      out.density.values(g) = s * norm;
    }
  };

  if (samples.size() <= kBinnedThreshold) {
    smooth(samples, Eigen::VectorXd::Constant(samples.size(), 1.0 / static_cast<double>(samples.size())));
  } else {
    const Eigen::VectorXd centres = Eigen::VectorXd::LinSpaced(kBins, lo, hi);
    const double width = (hi - lo) / static_cast<double>(kBins - 1);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(kBins);
    const double w = 1.0 / static_cast<double>(samples.size());
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      const double pos = (samples(i) - lo) / width;
      const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), kBins - 2);
      const double f = pos - static_cast<double>(j);
      mass(j) += w * (1.0 - f);
      mass(j + 1) += w * f;
    }
    smooth(centres, mass);
  }

  const double total = trapezoid(grid, out.density.values);
  if (total > 0.0) out.density.values /= total;
  return out;
}

double l1_distance(const DensityOnGrid& f, const DensityOnGrid& g) {
  if (f.grid.size() != g.grid.size() || f.values.size() != f.grid.size() || g.values.size() != g.grid.size())
    throw std::invalid_argument("l1_distance: grid mismatch");
  const double scale = std::max(1.0, f.grid.cwiseAbs().maxCoeff());
  if ((f.grid - g.grid).cwiseAbs().maxCoeff() > 1e-12 * scale) throw std::invalid_argument("l1_distance: grid mismatch");
  return trapezoid(f.grid, (f.values - g.values).cwiseAbs());
}

SampleL1 l1_between_samples(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Eigen::Index points) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("l1_between_samples: need at least 2 samples each");
  SampleL1 r;
  r.points = points;
  const double ba = silverman_bandwidth(a), bb = silverman_bandwidth(b);
  const double pad = 3.0 * std::max({ba, bb, 1e-12});
  r.lo = std::min(a.minCoeff(), b.minCoeff()) - pad;
  r.hi = std::max(a.maxCoeff(), b.maxCoeff()) + pad;
  const Eigen::VectorXd grid = uniform_grid(r.lo, r.hi, points);
  const KdeResult fa = kde_density(a, grid);
  const KdeResult fb = kde_density(b, grid);
  r.bandwidth_a = fa.bandwidth;
  r.bandwidth_b = fb.bandwidth;
  r.value = l1_distance(fa.density, fb.density);
  return r;
}

double l1_to_density(const Eigen::VectorXd& samples, const DensityOnGrid& reference) {
  return l1_distance(kde_density(samples, reference.grid).density, reference);
}

double EffSummary::efficiency() const {
  const std::size_t rejected = n_early + n_sim_reject;
  return rejected == 0 ? 0.0 : static_cast<double>(n_early) / static_cast<double>(rejected);
}

EffSummary summarize(const std::vector<IterationRecord>& trace) {
  EffSummary s;
  s.n_ite = trace.size();
  for (const auto& r : trace) {
    switch (r.outcome) {
      case Outcome::early_reject_stage1: ++s.n_early1; break;
      case Outcome::early_reject_stage2: ++s.n_early2; break;
      case Outcome::sim_reject: ++s.n_sim_reject; break;
      case Outcome::accept: ++s.n_accept; break;
    }
    s.n_sim += static_cast<std::size_t>(r.sim);
    if (r.h) ++s.n_pre;
    if (r.failed) ++s.n_failed;
  }
  s.n_early = s.n_early1 + s.n_early2;
  return s;
}

double efficiency(const std::vector<IterationRecord>& trace) { return summarize(trace).efficiency(); }

double gelman_rubin(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least 2 chains");
  const Eigen::Index n = chains.front().size();
  if (n < 2) throw std::invalid_argument("gelman_rubin: chains need at least 2 draws");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains must have equal length");
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);
  Eigen::VectorXd means(chains.size());
  double w = 0.0;
  for (std::size_t j = 0; j < chains.size(); ++j) {
    means(static_cast<Eigen::Index>(j)) = chains[j].mean();
    w += (chains[j].array() - chains[j].mean()).square().sum() / (nd - 1.0);
  }
  w /= m;
  if (!(w > 0.0)) throw UndefinedStatistic("gelman_rubin: zero within-chain variance");
  const double b = nd * (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double v = (nd - 1.0) / nd * w + b / nd;
  return std::sqrt(v / w);
}

Eigen::VectorXd gelman_rubin(const std::vector<Eigen::MatrixXd>& chains) {
  if (chains.empty()) throw std::invalid_argument("gelman_rubin: no chains");
  const Eigen::Index p = chains.front().cols();
  Eigen::VectorXd r(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    std::vector<Eigen::VectorXd> col;
    for (const auto& c : chains) {
      if (c.cols() != p) throw std::invalid_argument("gelman_rubin: dimension mismatch");
      col.emplace_back(c.col(k));
    }
    r(k) = gelman_rubin(col);
  }
  return r;
}

DensityOnGrid toy_posterior_oracle(const Eigen::VectorXd& grid, double eps, double y0, double prior_lo,
                                   double prior_hi) {
  check_grid(grid);
  if (!(eps > 0.0)) throw std::invalid_argument("toy_posterior_oracle: eps must be positive");
  DensityOnGrid out{grid, Eigen::VectorXd::Zero(grid.size())};
  const double sd = std::sqrt(kToyVariance);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double t = grid(i);
    if (t < prior_lo || t > prior_hi) continue;
    double p = 0.0;
    if (std::isinf(eps)) {
      p = 1.0;
    } else {
      for (const double c : {t + 2.0, t - 1.0})
        p += 0.5 * (normal_cdf((y0 + eps - c) / sd) - normal_cdf((y0 - eps - c) / sd));
    }
    out.values(i) = p / (prior_hi - prior_lo);
  }
  const double total = trapezoid(grid, out.values);
  if (total > 0.0) out.values /= total;
  return out;
}

}  // namespace ejabc
