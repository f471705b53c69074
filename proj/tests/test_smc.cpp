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
#include <map>
#include <sstream>

#include "ejabc/diagnostics.hpp"
#include "ejabc/smc.hpp"
#include "test_support.hpp"

using namespace ejabc;
using ejabc::testing::scalar;

namespace {

ParticleSet particles_1d(std::initializer_list<double> thetas, std::initializer_list<double> deltas) {
  ParticleSet ps;
  auto d = deltas.begin();
  for (double t : thetas) ps.push_back(Particle{scalar(t), *d++, 1.0 / static_cast<double>(thetas.size())});
  return ps;
}

SmcConfig toy_smc(int n = 256) {
  SmcConfig c;
  c.n_particles = n;
  c.prior = ejabc::testing::toy_prior();
  c.max_rounds = 8;
  return c;
}

}  // namespace

TEST_CASE("select_epsilon examples") {
  CHECK(select_epsilon(particles_1d({0, 1, 2, 3}, {1, 2, 3, 4}), 0.5, KernelFamily::uniform,
                       std::numeric_limits<double>::infinity()) == 2.0);
  CHECK(select_epsilon(particles_1d({0, 1, 2, 3}, {2.5, 2.5, 2.5, 2.5}), 0.5, KernelFamily::uniform, 10.0) == 2.5);
  CHECK(select_epsilon(particles_1d({0, 1, 2, 3}, {1, 2, 3, 4}), 0.99, KernelFamily::uniform, 10.0) == 4.0);
  // Duplicated thetas count once.
  CHECK(select_epsilon(particles_1d({0, 0, 2, 3}, {1, 1, 3, 4}), 0.5, KernelFamily::uniform, 10.0) == 3.0);
  CHECK_THROWS_AS(select_epsilon(particles_1d({0, 0, 0, 3}, {1, 1, 1, 4}), 0.75, KernelFamily::uniform, 10.0),
                  DegeneracyError);
  CHECK_THROWS_AS(select_epsilon(particles_1d({0, 1}, {1, 2}), 1.0, KernelFamily::uniform, 10.0),
                  std::invalid_argument);
}

TEST_CASE("select_epsilon with a compact kernel keeps the target alive count") {
  ParticleSet ps;
  RngStream rng(1, 0);
  for (int i = 0; i < 101; ++i) ps.push_back(Particle{scalar(rng.normal()), rng.uniform(0.0, 5.0), 1.0 / 101});
  for (auto k : {KernelFamily::epanechnikov, KernelFamily::triangle}) {
    const double eps = select_epsilon(ps, 0.5, k, std::numeric_limits<double>::infinity());
    const ParticleSet rw = reweight(ps, std::numeric_limits<double>::infinity(), eps, k);
    CHECK(unique_alive(rw) >= 51);
    // slightly smaller eps loses the target
    const ParticleSet tight = reweight(ps, std::numeric_limits<double>::infinity(), eps * (1.0 - 1e-5), k);
    CHECK(unique_alive(tight) < 51);
  }
}

TEST_CASE("reweight examples and invariants") {
  const ParticleSet ps = particles_1d({0, 1, 2, 3}, {0.5, 0.9, 0.2, 0.7});
  const ParticleSet same = reweight(ps, 1.0, 1.0, KernelFamily::epanechnikov);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(same[i].weight == doctest::Approx(ps[i].weight).epsilon(1e-15));

  const ParticleSet uni = reweight(ps, 1.0, 0.8, KernelFamily::uniform);
  CHECK(uni[1].weight == 0.0);
  CHECK(uni[0].weight == doctest::Approx(1.0 / 3.0));

  ParticleSet two = particles_1d({0, 1}, {0.5, 0.0});
  const ParticleSet ep = reweight(two, 1.0, 0.8, KernelFamily::epanechnikov);
  CHECK(ep[0].weight / ep[1].weight == doctest::Approx(0.8125).epsilon(1e-12));
  double total = 0.0;
  for (const auto& p : ep) total += p.weight;
  CHECK(std::abs(total - 1.0) < 1e-12);

  CHECK_THROWS_AS(reweight(ps, 1.0, 0.1, KernelFamily::uniform), DegeneracyError);
  CHECK_THROWS_AS(reweight(ps, 1.0, 2.0, KernelFamily::uniform), std::invalid_argument);
}

TEST_CASE("adapt_proposal_cov examples") {
  ParticleSet circle;
  Eigen::MatrixXd pts(8, 2);
  for (int i = 0; i < 8; ++i) {
    const double a = 2.0 * 3.14159265358979 * i / 8.0;
    pts.row(i) << std::cos(a), std::sin(a);
    ParamVector t = pts.row(i).transpose();
    circle.push_back(Particle{t, 0.0, 1.0 / 8.0});
  }
  const Eigen::MatrixXd centered = pts.rowwise() - pts.colwise().mean();
  Eigen::MatrixXd expected = centered.transpose() * centered / 8.0;
  const Eigen::MatrixXd c = adapt_proposal_cov(circle);
  expected.diagonal().array() += 1e-10 * expected.trace() / 2.0;
  CHECK((c - expected).cwiseAbs().maxCoeff() < 1e-12);

  ParticleSet pair{Particle{scalar(0.0), 0.0, 0.75}, Particle{scalar(2.0), 0.0, 0.25}};
  CHECK(adapt_proposal_cov(pair)(0, 0) == doctest::Approx(0.75).epsilon(1e-9));

  ParticleSet single{Particle{scalar(1.0), 0.0, 1.0}, Particle{scalar(3.0), 0.0, 0.0}};
  CHECK_THROWS_AS(adapt_proposal_cov(single), DegeneracyError);
}

TEST_CASE("resampling examples") {
  ParticleSet eq = particles_1d({0, 1, 2, 3}, {0, 0, 0, 0});
  RngStream rng(2, 0);
  CHECK(effective_sample_size(eq) == doctest::Approx(4.0));
  CHECK_FALSE(resample(eq, rng));
  CHECK(eq[2].theta(0) == 2.0);

  ParticleSet one = particles_1d({0, 1, 2, 3}, {0, 0, 0, 0});
  for (auto& p : one) p.weight = 0.0;
  one[2].weight = 1.0;
  CHECK(resample(one, rng));
  for (const auto& p : one) {
    CHECK(p.theta(0) == 2.0);
    CHECK(p.weight == 0.25);
  }
}

TEST_CASE("systematic resampling reproduces expected copy counts") {
  const double w[] = {0.05, 0.3, 0.15, 0.02, 0.28, 0.2};
  ParticleSet ps;
  for (int i = 0; i < 6; ++i) ps.push_back(Particle{scalar(i), 0.0, w[i]});
  RngStream rng(3, 0);
  const int trials = 10000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6), sq = Eigen::VectorXd::Zero(6);
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(6);
    for (const auto& p : systematic_resample(ps, rng)) c(static_cast<int>(p.theta(0))) += 1.0;
    mean += c;
    sq += c.cwiseProduct(c);
  }
  mean /= trials;
  sq /= trials;
  for (int i = 0; i < 6; ++i) {
    const double var = std::max(sq(i) - mean(i) * mean(i), 1e-12);
    CHECK(std::abs(mean(i) - 6.0 * w[i]) <= 3.0 * std::sqrt(var / trials) + 1e-12);
  }
}

TEST_CASE("ejASMC on the toy model: eps nonincreasing, alive target met, weights normalized") {
  SmcConfig c = toy_smc();
  c.h = [](const ParamVector& t) { return std::min(std::abs(t(0) + 1.0), std::abs(t(0) - 2.0)) - 1.0; };
  c.move = SmcMove::ej;
  const SmcResult r = run_ejasmc(c, ejabc::testing::toy_distance(), RngStream(4, 0));
  REQUIRE_FALSE(r.failure);
  CHECK(r.rounds.size() == 9);
  for (std::size_t i = 1; i < r.rounds.size(); ++i) {
    CHECK(r.rounds[i].eps <= r.rounds[i - 1].eps);
    CHECK(r.rounds[i].n_moves > 0);
  }
  double total = 0.0, mean_delta_first = 0.0;
  for (const auto& p : r.particles) {
    total += p.weight;
    if (p.weight > 0.0) CHECK(std::isfinite(p.delta));
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
  const auto s = summarize(r.moves);
  CHECK(s.n_sim + r.rounds[0].n_sim == r.total_sims);
  CHECK(r.simulations.size() == static_cast<Eigen::Index>(r.total_sims));
  (void)mean_delta_first;
}

TEST_CASE("weighted mean discrepancy decreases over rounds") {
  SmcConfig c = toy_smc(512);
  std::vector<double> means;
  for (int rounds = 1; rounds <= 6; ++rounds) {
    c.max_rounds = rounds;
    const SmcResult r = run_ejasmc(c, ejabc::testing::toy_distance(), RngStream(5, 0));
    double m = 0.0;
    for (const auto& p : r.particles) m += p.weight * p.delta;
    means.push_back(m);
  }
  for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] <= means[i - 1] * 1.05);
  CHECK(means.back() < 0.5 * means.front());
}

TEST_CASE("without moves the particle set is the importance-weighted prior sample") {
  SmcConfig c = toy_smc();
  c.moves_per_round = 0;
  c.max_rounds = 1;
  c.ess_fraction = 0.0;
  const SmcResult r = run_ejasmc(c, ejabc::testing::toy_distance(), RngStream(6, 0));
  REQUIRE(r.rounds.size() == 2);
  const double eps = r.eps;
  int alive = 0;
  for (const auto& p : r.particles) alive += p.delta <= eps;
  CHECK(alive == 128);
  for (const auto& p : r.particles) CHECK(p.weight == doctest::Approx(p.delta <= eps ? 1.0 / alive : 0.0));

  // with resampling every particle is a copy of an alive prior draw
  c.ess_fraction = 1.0;
  const SmcResult rs = run_ejasmc(c, ejabc::testing::toy_distance(), RngStream(6, 0));
  CHECK(rs.rounds[1].resampled);
  std::map<double, int> copies;
  for (const auto& p : rs.particles) {
    CHECK(p.delta <= eps);
    CHECK(p.weight == doctest::Approx(1.0 / 256));
    ++copies[p.theta(0)];
  }
  for (const auto& [theta, k] : copies) CHECK(k == 2);
}

TEST_CASE("ej moves with h identically zero match oej moves") {
  SmcConfig a = toy_smc();
  a.move = SmcMove::ej;
  a.h = [](const ParamVector&) { return 0.0; };
  SmcConfig b = a;
  b.move = SmcMove::oej;
  const auto dist = ejabc::testing::toy_distance();
  const SmcResult ra = run_ejasmc(a, dist, RngStream(7, 0));
  const SmcResult rb = run_ejasmc(b, dist, RngStream(7, 0));
  REQUIRE(ra.particles.size() == rb.particles.size());
  for (std::size_t i = 0; i < ra.particles.size(); ++i) {
    CHECK(ra.particles[i].theta == rb.particles[i].theta);
    CHECK(ra.particles[i].weight == rb.particles[i].weight);
  }
  CHECK(ra.eps == rb.eps);
}

TEST_CASE("results do not depend on the worker count") {
  SmcConfig c = toy_smc();
  c.max_rounds = 4;
  const auto dist = ejabc::testing::toy_distance();
  const SmcResult one = run_ejasmc(c, dist, RngStream(8, 0));
  c.workers = 3;
  const SmcResult three = run_ejasmc(c, dist, RngStream(8, 0));
  for (std::size_t i = 0; i < one.particles.size(); ++i) CHECK(one.particles[i].theta == three.particles[i].theta);
}

TEST_CASE("stopping rules") {
  SmcConfig c = toy_smc();
  c.max_rounds.reset();
  c.sim_budget = 1000;
  const auto dist = ejabc::testing::toy_distance();
  const SmcResult b = run_ejasmc(c, dist, RngStream(9, 0));
  CHECK(b.total_sims >= 1000);
  CHECK(b.total_sims - b.rounds.back().n_sim < 1000);
  CHECK(b.stop_reason == "sim_budget");

  c.sim_budget.reset();
  c.target_eps = 0.5;
  const SmcResult t = run_ejasmc(c, dist, RngStream(9, 0));
  CHECK(t.eps == 0.5);
  for (std::size_t i = 0; i + 1 < t.rounds.size(); ++i) CHECK(t.rounds[i].eps > 0.5);
  CHECK(t.stop_reason == "target_eps");

  c.target_eps.reset();
  c.sim_budget = 1000000;
  c.min_accept_rate = 0.2;
  const SmcResult a = run_ejasmc(c, dist, RngStream(9, 0));
  CHECK(a.stop_reason == "min_accept_rate");
  CHECK(a.rounds.back().accept_rate < 0.2);
  for (std::size_t i = 1; i + 1 < a.rounds.size(); ++i) CHECK(a.rounds[i].accept_rate >= 0.2);
  c.min_accept_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  SmcConfig none = toy_smc();
  none.max_rounds.reset();
  CHECK_THROWS_AS(none.validate(), std::invalid_argument);
}

TEST_CASE("degeneracy is reported with a partial history") {
  SmcConfig c = toy_smc(64);
  c.max_rounds = 5;
  DistanceFn sparse = [](const ParamVector& t, RngStream&) {
    return t(0) > 5.0 ? 1.0 : std::numeric_limits<double>::infinity();
  };
  const SmcResult r = run_ejasmc(c, sparse, RngStream(10, 0));
  REQUIRE(r.failure);
  CHECK(r.stop_reason == "degeneracy");
  CHECK(r.rounds.size() >= 1);
}

TEST_CASE("training data collection") {
  SmcConfig c = toy_smc();
  const auto dist = ejabc::testing::toy_distance();
  const TrainingData five = collect_training_data(c, 5, dist, RngStream(11, 0));
  CHECK(five.complete);
  CHECK(five.data.size() == 5);
  CHECK_THROWS_AS(collect_training_data(c, 4, dist, RngStream(11, 0)), std::invalid_argument);

  c.max_rounds.reset();
  const TrainingData pilot = collect_training_data(c, 2000, dist, RngStream(12, 0));
  const TrainingData prior = prior_training_data(c.prior, 2000, dist, RngStream(12, 1));
  CHECK(pilot.data.size() == 2000);
  CHECK(prior.data.size() == 2000);
  std::vector<double> a(pilot.data.deltas.data(), pilot.data.deltas.data() + 2000);
  std::vector<double> b(prior.data.deltas.data(), prior.data.deltas.data() + 2000);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (int q : {500, 1000, 1500}) CHECK(a[q] < b[q]);
}

TEST_CASE("report and particle CSV output") {
  SmcConfig c = toy_smc(32);
  c.max_rounds = 2;
  const SmcResult r = run_ejasmc(c, ejabc::testing::toy_distance(), RngStream(13, 0));
  std::ostringstream rep, parts;
  write_report_csv(rep, r.rounds);
  write_particles_csv(parts, r.particles);
  const std::string rs = rep.str(), ps = parts.str();
  CHECK(rs.rfind("round,eps,unique_alive", 0) == 0);
  CHECK(std::count(rs.begin(), rs.end(), '\n') == 4);
  CHECK(std::count(ps.begin(), ps.end(), '\n') == 33);
}
