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

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ejabc/csv.hpp"
#include "ejabc/experiment.hpp"
#include "ejabc/mcmc.hpp"

using namespace ejabc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("ejabc_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation cli(const std::string& args, const fs::path& dir, const std::string& env = {}) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + std::string(EJABC_CLI_PATH) + "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Invocation r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json toy_config(std::size_t iterations = 3000) {
  return {{"schema_version", 1},
          {"name", "toy_small"},
          {"seed", 7},
          {"model", {{"id", "toy_mixture"}}},
          {"observed", {{"value", {{1.0}}}}},
          {"discrepancy", "abs"},
          {"prior", {{{"uniform", {-6, 6}}}}},
          {"pilot", {{"kind", "prior"}, {"budget", 60}}},
          {"gp", {{"a", 0.05}, {"restarts", 2}}},
          {"sampler",
           {{"mcmc",
             {{"kind", "ej_mcmc"}, {"kernel", "uniform"}, {"eps", 0.6}, {"iterations", iterations}, {"proposal_sd", {0.3}}}}}},
          {"metrics", {{"toy_oracle", true}}}};
}

fs::path write_config(const fs::path& dir, const json& cfg, const std::string& name = "config.json") {
  const fs::path p = dir / name;
  spit(p, cfg.dump(2));
  return p;
}

double num(const CsvTable& t, std::size_t r, std::size_t c) { return parse_double(t.rows[r][c]); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

json manifest(const fs::path& run) { return json::parse(slurp(run / "manifest.json")); }

}  // namespace

TEST_CASE("invalid kernel is a validation error naming the field and line") {
  const fs::path d = scratch("kernel");
  json c = toy_config();
  c["sampler"]["mcmc"]["kernel"] = "boxcar";
  const fs::path p = write_config(d, c);
  const Invocation r = cli("run --config " + q(p), d);
  CHECK(r.code == 1);
  CHECK(r.err.find("sampler.mcmc.kernel") != std::string::npos);
  CHECK(r.err.find("boxcar") != std::string::npos);

  std::size_t line = 0;
  std::istringstream lines(slurp(p));
  std::string l;
  for (std::size_t n = 1; std::getline(lines, l); ++n)
    if (l.find("\"kernel\"") != std::string::npos) line = n;
  REQUIRE(line > 0);
  CHECK(r.err.find(p.string() + ":" + std::to_string(line) + ":") != std::string::npos);
}

TEST_CASE("config validation failures exit with code 1") {
  const fs::path d = scratch("validation");
  auto expect = [&](json c, const std::string& needle) {
    const Invocation r = cli("run --config " + q(write_config(d, c)), d);
    CHECK(r.code == 1);
    CHECK_MESSAGE(r.err.find(needle) != std::string::npos, r.err);
  };
  json c = toy_config();
  c["sampler"]["mcmc"]["iteratons"] = 5;
  expect(c, "unknown key 'iteratons'");

  c = toy_config();
  c["schema_version"] = 2;
  expect(c, "schema_version");

  c = toy_config();
  c.erase("pilot");
  expect(c, "pilot");

  c = toy_config();
  c["sampler"]["smc"] = {{"max_rounds", 3}};
  expect(c, "exactly one");

  c = toy_config();
  c["prior"].push_back({{"uniform", {0, 1}}});
  expect(c, "marginals");

  spit(d / "broken.json", "{\n  \"schema_version\": 1,\n  \"name\": \n}\n");
  const Invocation r = cli("run --config " + q(d / "broken.json"), d);
  CHECK(r.code == 1);
  CHECK(r.err.find("broken.json:4") != std::string::npos);

  CHECK(cli("run", d).code == 1);
  CHECK(cli("frobnicate --config " + q(d / "broken.json"), d).code == 1);
}

TEST_CASE("parse_config resolves paths and defaults") {
  const fs::path d = scratch("parse");
  ExperimentConfig cfg = parse_config(toy_config().dump(2), d);
  CHECK(cfg.output_dir == d / "runs" / "toy_small");
  CHECK(cfg.seed == 7);
  REQUIRE(cfg.mcmc);
  CHECK(cfg.mcmc->proposal_cov(0, 0) == doctest::Approx(0.09));
  CHECK(cfg.uses_surrogate());
  CHECK_THROWS_AS(parse_config("[1, 2]", d), ConfigError);
}

TEST_CASE("toy run produces artifacts, counters and the oracle metric") {
  const fs::path d = scratch("toy");
  const fs::path run = d / "run";
  const Invocation r = cli("run --config " + q(write_config(d, toy_config())) + " --out " + q(run), d);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"training.csv", "gp.json", "trace.csv", "samples.csv", "metrics.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(run / f), f);

  const json m = manifest(run);
  CHECK(m["status"] == "ok");
  CHECK(m["seed"] == 7);
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  const json& c = m["counters"];
  const auto n_ite = c["N_ite"].get<std::size_t>();
  CHECK(n_ite == 3000);
  CHECK(c["n_early1"].get<std::size_t>() + c["n_early2"].get<std::size_t>() + c["n_sim_reject"].get<std::size_t>() +
            c["N_acc"].get<std::size_t>() ==
        n_ite);
  CHECK(c["N_sim"].get<std::size_t>() <= n_ite);
  CHECK(c["N_pre"].get<std::size_t>() <= n_ite);
  std::vector<std::string> phases;
  for (const auto& ph : m["phases"]) phases.push_back(ph["name"]);
  CHECK(phases == std::vector<std::string>{"pilot", "fit-gp", "sample", "metrics"});

  const json metrics = json::parse(slurp(run / "metrics.json"));
  bool found = false;
  for (const auto& x : metrics["metrics"])
    if (x["name"] == "l1_oracle_theta_1") {
      found = true;
      CHECK(x["value"].get<double>() >= 0.0);
      CHECK(x["value"].get<double>() <= 2.0);
      CHECK(x["config"]["points"] == 512);
    }
  CHECK(found);
  CHECK(read_samples_csv((run / "samples.csv").string()).rows() == static_cast<Eigen::Index>(n_ite));
}

TEST_CASE("identical config and seed reproduce identical output") {
  const fs::path d = scratch("determinism");
  const fs::path p = write_config(d, toy_config(1500));
  REQUIRE(cli("run --config " + q(p) + " --out " + q(d / "a"), d).code == 0);
  REQUIRE(cli("run --config " + q(p) + " --out " + q(d / "b") + " --workers 3", d).code == 0);
  for (const char* f : {"training.csv", "trace.csv", "samples.csv", "gp.json", "metrics.json"})
    CHECK_MESSAGE(slurp(d / "a" / f) == slurp(d / "b" / f), f);
  json ma = manifest(d / "a"), mb = manifest(d / "b");
  for (json* m : {&ma, &mb}) {
    m->erase("phases");
    m->erase("workers");
  }
  CHECK(ma == mb);

  REQUIRE(cli("run --config " + q(p) + " --out " + q(d / "c") + " --seed 8", d).code == 0);
  CHECK(slurp(d / "a" / "trace.csv") != slurp(d / "c" / "trace.csv"));
}

TEST_CASE("phases run standalone and resume from artifacts") {
  const fs::path d = scratch("phases");
  const fs::path p = write_config(d, toy_config(1000));
  REQUIRE(cli("run --config " + q(p) + " --out " + q(d / "full"), d).code == 0);
  const fs::path s = d / "staged";
  for (const char* ph : {"pilot", "fit-gp", "sample", "metrics"}) {
    const Invocation r = cli(std::string(ph) + " --config " + q(p) + " --out " + q(s), d);
    CHECK_MESSAGE(r.code == 0, ph << ": " << r.err);
  }
  CHECK(slurp(d / "full" / "samples.csv") == slurp(s / "samples.csv"));
  CHECK(slurp(d / "full" / "gp.json") == slurp(s / "gp.json"));
}

TEST_CASE("missing artifacts fail at runtime with an error manifest") {
  const fs::path d = scratch("missing");
  const fs::path p = write_config(d, toy_config(100));
  const fs::path run = d / "empty";
  const Invocation r = cli("sample --config " + q(p) + " --out " + q(run), d);
  CHECK(r.code == 2);
  CHECK(r.err.find("gp.json") != std::string::npos);
  REQUIRE(fs::exists(run / "manifest.json"));
  CHECK(manifest(run)["status"] == "error");

  const Invocation plot = cli("plotdata --config " + q(p) + " --out " + q(d / "nothing"), d);
  CHECK(plot.code == 2);
  CHECK_THROWS_AS(emit_plotdata(d / "nothing", PlotKind::trace), NotFound);
}

TEST_CASE("EJABC_OUT overrides the config output but not --out") {
  const fs::path d = scratch("env");
  const fs::path p = write_config(d, toy_config(200));
  REQUIRE(cli("run --config " + q(p), d, "EJABC_OUT=" + q(d / "from_env")).code == 0);
  CHECK(fs::exists(d / "from_env" / "manifest.json"));
  CHECK_FALSE(fs::exists(d / "runs"));
  REQUIRE(cli("run --config " + q(p) + " --out " + q(d / "flag"), d, "EJABC_OUT=" + q(d / "ignored")).code == 0);
  CHECK(fs::exists(d / "flag" / "manifest.json"));
  CHECK_FALSE(fs::exists(d / "ignored"));
}

TEST_CASE("plot data") {
  const fs::path d = scratch("plot");
  const fs::path p = write_config(d, toy_config(2000));
  const fs::path run = d / "run";
  REQUIRE(cli("run --config " + q(p) + " --out " + q(run), d).code == 0);

  SUBCASE("marginal density integrates to one") {
    REQUIRE(cli("plotdata --kind marginal_density --config " + q(p) + " --out " + q(run), d).code == 0);
    const CsvTable t = read_csv((run / "plot_marginal_density_theta_1.csv").string());
    REQUIRE(t.rows.size() == 512);
    double area = 0.0;
    for (std::size_t i = 1; i < t.rows.size(); ++i)
      area += 0.5 * (num(t, i, 1) + num(t, i - 1, 1)) * (num(t, i, 0) - num(t, i - 1, 0));
    CHECK(area == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("gp fit band is symmetric about the mean") {
    REQUIRE(cli("plotdata --kind gp_fit_1d --grid 64 --config " + q(p) + " --out " + q(run), d).code == 0);
    const CsvTable t = read_csv((run / "plot_gp_fit_1d_theta_1.csv").string());
    REQUIRE(t.rows.size() == 64);
    CHECK(t.header == std::vector<std::string>{"theta", "mean", "lower", "upper"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double mean = num(t, i, 1), lo = num(t, i, 2), hi = num(t, i, 3);
      CHECK(mean - lo == doctest::Approx(hi - mean).epsilon(1e-12));
      CHECK(hi > lo);
    }
  }
  SUBCASE("scatter rows match the accepted count") {
    REQUIRE(cli("plotdata --kind scatter2d --config " + q(p) + " --out " + q(run), d).code == 0);
    const CsvTable t = read_csv((run / "plot_scatter2d.csv").string());
    CHECK(t.rows.size() == manifest(run)["counters"]["N_acc"].get<std::size_t>());
  }
  SUBCASE("trace has one row per iteration") {
    REQUIRE(cli("plotdata --kind trace --config " + q(p) + " --out " + q(run), d).code == 0);
    CHECK(read_csv((run / "plot_trace.csv").string()).rows.size() == 2000);
  }
  SUBCASE("unknown kind") {
    CHECK(cli("plotdata --kind histogram --config " + q(p) + " --out " + q(run), d).code == 1);
  }
}

TEST_CASE("smc run writes the round report and particles") {
  const fs::path d = scratch("smc");
  json c = toy_config();
  c["sampler"] = {{"smc", {{"n_particles", 128}, {"move", "ej"}, {"sim_budget", 1500}}}};
  const fs::path p = write_config(d, c);
  const Invocation r = cli("run --config " + q(p) + " --out " + q(d / "run"), d);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const CsvTable rep = read_csv((d / "run" / "report.csv").string());
  CHECK(rep.header ==
        std::vector<std::string>{"round", "eps", "unique_alive", "accept_rate", "n_sim", "n_early1", "n_early2"});
  for (std::size_t i = 2; i < rep.rows.size(); ++i) CHECK(num(rep, i, 1) <= num(rep, i - 1, 1));
  CHECK(read_csv((d / "run" / "particles.csv").string()).rows.size() == 128);
  const json m = manifest(d / "run");
  CHECK(m["smc"]["rounds"].get<std::size_t>() == rep.rows.size());
  CHECK(!m["smc"]["stop_reason"].get<std::string>().empty());
}

TEST_CASE("shipped configs validate") {
  for (const auto& e : fs::directory_iterator(fs::path(EJABC_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(parse_config(slurp(e.path()), scratch("shipped"), e.path().string()));
  }
}
