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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ejabc/diagnostics.hpp"
#include "ejabc/normal.hpp"
#include "ejabc/rng.hpp"
#include "ejabc/types.hpp"

using namespace ejabc;

namespace {

Eigen::VectorXd normal_samples(RngStream rng, Eigen::Index n, double mean = 0.0, double sd = 1.0) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.normal(mean, sd);
  return x;
}

DensityOnGrid normal_on(const Eigen::VectorXd& grid, double mean) {
  DensityOnGrid d{grid, Eigen::VectorXd(grid.size())};
  for (Eigen::Index i = 0; i < grid.size(); ++i) d.values(i) = normal_pdf(grid(i) - mean);
  return d;
}

DensityOnGrid uniform_on(const Eigen::VectorXd& grid, double lo, double hi) {
  DensityOnGrid d{grid, Eigen::VectorXd::Zero(grid.size())};
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (grid(i) >= lo && grid(i) <= hi) d.values(i) = 1.0;
  d.values /= trapezoid(grid, d.values);
  return d;
}

IterationRecord rec(Outcome o) {
  IterationRecord r;
  r.outcome = o;
  r.sim = (o == Outcome::sim_reject || o == Outcome::accept) ? 1 : 0;
  return r;
}

}  // namespace

TEST_CASE("trapezoid integrates linear functions exactly") {
  const Eigen::VectorXd g = uniform_grid(-1.0, 3.0, 9);
  CHECK(g.size() == 9);
  CHECK(g(0) == -1.0);
  CHECK(g(8) == 3.0);
  CHECK(trapezoid(g, (2.0 * g.array() + 1.0).matrix()) == doctest::Approx(12.0).epsilon(1e-14));
  CHECK_THROWS_AS(uniform_grid(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("kde recovers the standard normal") {
  const Eigen::VectorXd x = normal_samples(RngStream(5, 0), 1000000);
  const Eigen::VectorXd grid = uniform_grid(-6.0, 6.0, 1201);
  const KdeResult k = kde_density(x, grid);
  CHECK_FALSE(k.point_mass);
  CHECK(k.bandwidth == doctest::Approx(silverman_bandwidth(x)));
  CHECK(trapezoid(k.density.grid, k.density.values) == doctest::Approx(1.0).epsilon(1e-3));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (std::abs(grid(i)) <= 3.0) worst = std::max(worst, std::abs(k.density.values(i) - normal_pdf(grid(i))));
  CHECK(worst < 0.01);
  CHECK((k.density.values.array() >= 0.0).all());
}

TEST_CASE("silverman bandwidth") {
  Eigen::VectorXd x(4);
  x << 1.0, 2.0, 3.0, 4.0;
  const double sd = std::sqrt(5.0 / 3.0);
  CHECK(silverman_bandwidth(x) == doctest::Approx(1.06 * sd * std::pow(4.0, -0.2)));
}

TEST_CASE("kde of identical samples is a point mass") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(50, 0.25);
  const Eigen::VectorXd grid = uniform_grid(-1.0, 1.0, 201);
  const KdeResult k = kde_density(x, grid);
  CHECK(k.point_mass);
  CHECK(trapezoid(grid, k.density.values) == doctest::Approx(1.0).epsilon(1e-9));
  Eigen::Index arg = 0;
  k.density.values.maxCoeff(&arg);
  CHECK(std::abs(grid(arg) - 0.25) <= 0.01);
}

TEST_CASE("kde preconditions") {
  const Eigen::VectorXd grid = uniform_grid(-1.0, 1.0, 11);
  CHECK_THROWS_AS(kde_density(Eigen::VectorXd::Zero(1), grid), std::invalid_argument);
  Eigen::VectorXd bad(3);
  bad << 0.0, std::numeric_limits<double>::quiet_NaN(), 1.0;
  CHECK_THROWS_AS(kde_density(bad, grid), std::invalid_argument);
  CHECK_THROWS_AS(kde_density(Eigen::VectorXd::LinSpaced(5, 0, 1), grid, -1.0), std::invalid_argument);
}

TEST_CASE("l1 between shifted normals") {
  const Eigen::VectorXd grid = uniform_grid(-12.0, 13.0, 20001);
  const double expected = 2.0 * (2.0 * normal_cdf(0.5) - 1.0);
  CHECK(expected == doctest::Approx(0.76585).epsilon(1e-5));
  CHECK(l1_distance(normal_on(grid, 0.0), normal_on(grid, 1.0)) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("l1 trivial cases") {
  const Eigen::VectorXd grid = uniform_grid(0.0, 10.0, 10001);
  const DensityOnGrid f = uniform_on(grid, 1.0, 3.0);
  CHECK(l1_distance(f, f) == 0.0);
  CHECK(l1_distance(f, uniform_on(grid, 6.0, 8.0)) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("l1 is a metric on the grid") {
  const Eigen::VectorXd grid = uniform_grid(-5.0, 5.0, 257);
  RngStream rng(8, 0);
  for (int t = 0; t < 200; ++t) {
    DensityOnGrid d[3];
    for (auto& di : d) {
      di.grid = grid;
      di.values = Eigen::VectorXd(grid.size());
      for (Eigen::Index i = 0; i < grid.size(); ++i) di.values(i) = rng.uniform();
      di.values /= trapezoid(grid, di.values);
    }
    const double ab = l1_distance(d[0], d[1]);
    CHECK(ab == doctest::Approx(l1_distance(d[1], d[0])).epsilon(1e-12));
    CHECK(ab <= l1_distance(d[0], d[2]) + l1_distance(d[2], d[1]) + 1e-12);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("l1 rejects mismatched grids") {
  const DensityOnGrid f = normal_on(uniform_grid(-3.0, 3.0, 100), 0.0);
  CHECK_THROWS_AS(l1_distance(f, normal_on(uniform_grid(-3.0, 3.0, 101), 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(l1_distance(f, normal_on(uniform_grid(-3.0, 3.1, 100), 0.0)), std::invalid_argument);
}

TEST_CASE("l1 between sample sets") {
  const Eigen::VectorXd a = normal_samples(RngStream(9, 0), 20000);
  const Eigen::VectorXd b = normal_samples(RngStream(9, 1), 20000);
  const Eigen::VectorXd c = normal_samples(RngStream(9, 2), 20000, 1.0);
  const SampleL1 same = l1_between_samples(a, b);
  CHECK(same.points == 512);
  CHECK(same.value < 0.05);
  CHECK(same.lo <= a.minCoeff() - 3.0 * same.bandwidth_a + 1e-12);
  CHECK(same.hi >= a.maxCoeff() + 3.0 * same.bandwidth_a - 1e-12);
  CHECK(l1_between_samples(a, c).value == doctest::Approx(0.76585).epsilon(0.05));
}

TEST_CASE("efficiency counts") {
  using O = Outcome;
  std::vector<IterationRecord> t{rec(O::early_reject_stage1), rec(O::early_reject_stage2), rec(O::sim_reject),
                                 rec(O::accept), rec(O::accept)};
  t[1].h = 2.0;
  const EffSummary s = summarize(t);
  CHECK(s.n_ite == 5);
  CHECK(s.n_early1 == 1);
  CHECK(s.n_early2 == 1);
  CHECK(s.n_early == 2);
  CHECK(s.n_sim_reject == 1);
  CHECK(s.n_accept == 2);
  CHECK(s.n_sim == 3);
  CHECK(s.n_early + s.n_sim_reject + s.n_accept == s.n_ite);
  CHECK(s.efficiency() == doctest::Approx(2.0 / 3.0));
  CHECK(efficiency(t) == doctest::Approx(2.0 / 3.0));

  CHECK(efficiency({rec(O::early_reject_stage1), rec(O::early_reject_stage2), rec(O::accept)}) == 1.0);
  CHECK(efficiency({rec(O::accept), rec(O::accept)}) == 0.0);
  CHECK(efficiency({rec(O::sim_reject)}) == 0.0);
}

TEST_CASE("gelman-rubin hand case") {
  Eigen::VectorXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 3, 4, 5, 6;
  // W = 5/3, B = 8, V = 3/4 W + B/4
  const double w = 5.0 / 3.0;
  const double v = 0.75 * w + 2.0;
  CHECK(gelman_rubin(std::vector<Eigen::VectorXd>{a, b}) == doctest::Approx(std::sqrt(v / w)).epsilon(1e-12));
}

TEST_CASE("gelman-rubin converged and separated chains") {
  std::vector<Eigen::VectorXd> same, apart;
  for (int c = 0; c < 4; ++c) {
    same.push_back(normal_samples(RngStream(12, static_cast<std::uint64_t>(c)), 10000));
    apart.push_back(normal_samples(RngStream(13, static_cast<std::uint64_t>(c)), 10000, 10.0 * c, 0.1));
  }
  CHECK(std::abs(gelman_rubin(same) - 1.0) < 0.05);
  CHECK(gelman_rubin(apart) > 10.0);

  std::vector<Eigen::MatrixXd> mats;
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd m(10000, 2);
    m.col(0) = same[static_cast<std::size_t>(c)];
    m.col(1) = apart[static_cast<std::size_t>(c)];
    mats.push_back(m);
  }
  const Eigen::VectorXd r = gelman_rubin(mats);
  CHECK(r.size() == 2);
  CHECK(r(0) == doctest::Approx(gelman_rubin(std::vector<Eigen::VectorXd>{same[0], same[1]})));
  CHECK(r(1) > 10.0);
}

TEST_CASE("gelman-rubin errors") {
  const Eigen::VectorXd k = Eigen::VectorXd::Constant(20, 1.0);
  CHECK_THROWS_AS(gelman_rubin(std::vector<Eigen::VectorXd>{k, k}), UndefinedStatistic);
  CHECK_THROWS_AS(gelman_rubin(std::vector<Eigen::VectorXd>{k}), std::invalid_argument);
  CHECK_THROWS_AS(gelman_rubin(std::vector<Eigen::VectorXd>{k, Eigen::VectorXd::LinSpaced(19, 0, 1)}),
                  std::invalid_argument);
}

TEST_CASE("toy oracle is normalized and bimodal") {
  const Eigen::VectorXd grid = uniform_grid(-6.0, 6.0, 1201);
  const DensityOnGrid d = toy_posterior_oracle(grid, 0.6);
  CHECK(trapezoid(d.grid, d.values) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK((d.values.array() >= 0.0).all());
  const auto at = [&](double x) { return d.values(static_cast<Eigen::Index>(std::lround((x + 6.0) / 0.01))); };
  CHECK(at(-1.0) > 2.0 * at(0.5));
  CHECK(at(2.0) > 2.0 * at(0.5));
  CHECK(at(-1.0) == doctest::Approx(at(2.0)).epsilon(1e-9));
}

TEST_CASE("toy oracle reflection between modes") {
  // theta -> 1 - theta swaps the two mixture components when y0 = 1
  const Eigen::VectorXd grid = uniform_grid(-5.0, 6.0, 1101);
  const DensityOnGrid d = toy_posterior_oracle(grid, 0.8);
  const Eigen::Index n = grid.size();
  for (Eigen::Index i = 0; i < n; ++i) CHECK(d.values(i) == doctest::Approx(d.values(n - 1 - i)).epsilon(1e-9));
}

TEST_CASE("toy oracle saturates to the prior") {
  const Eigen::VectorXd grid = uniform_grid(-6.0, 6.0, 601);
  const DensityOnGrid d = toy_posterior_oracle(grid, 1e6);
  CHECK((d.values.array() - 1.0 / 12.0).abs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(toy_posterior_oracle(grid, 0.0), std::invalid_argument);
}

TEST_CASE("toy oracle matches rejection sampling") {
  RngStream rng(14, 0);
  std::vector<double> kept;
  while (kept.size() < 20000) {
    const double theta = rng.uniform(-6.0, 6.0);
    const double x = rng.uniform() < 0.5 ? rng.normal(theta + 2.0, std::sqrt(0.6)) : rng.normal(theta - 1.0, std::sqrt(0.6));
    if (std::abs(x - 1.0) <= 0.6) kept.push_back(theta);
  }
  const Eigen::VectorXd s = Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  const DensityOnGrid ref = toy_posterior_oracle(uniform_grid(-7.0, 7.0, 512), 0.6);
  CHECK(l1_to_density(s, ref) < 0.06);
}
