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

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ejabc/experiment.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ejabc: early-rejection ABC samplers with Gaussian-process discrepancy surrogates"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::string plot_kind = "marginal_density";
  int grid_points = 512;

  const char* commands[][2] = {
      {"run", "pilot, GP fit, sampler and metrics"},
      {"pilot", "collect GP training data"},
      {"fit-gp", "fit the GP surrogate to training.csv"},
      {"sample", "run the MCMC sampler"},
      {"smc", "run the adaptive SMC sampler"},
      {"metrics", "compute metrics from run artifacts"},
      {"plotdata", "write plot-ready CSV files"},
  };
  for (auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides EJABC_OUT and the config)");
    if (std::string(name) == "plotdata") {
      sub->add_option("--kind", plot_kind, "marginal_density | trace | scatter2d | gp_fit_1d");
      sub->add_option("--grid", grid_points, "grid points")->check(CLI::Range(2, 1 << 20));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    ejabc::ExperimentConfig cfg = ejabc::load_config(config_path);
    ejabc::RunOverrides ov;
    ov.seed = seed;
    ov.workers = workers;
    if (out) ov.out = *out;
    ejabc::apply_overrides(cfg, ov);

    if (cmd == "plotdata") {
      const auto kind = ejabc::plot_kind_from_string(plot_kind);
      if (!kind) {
        std::cerr << "error: unknown plot kind '" << plot_kind << "'\n";
        return kExitValidation;
      }
      for (const auto& p : ejabc::emit_plotdata(cfg.output_dir, *kind, grid_points)) std::cout << p.string() << '\n';
      return 0;
    }

    std::string manifest;
    if (cmd == "run") {
      manifest = ejabc::run_experiment(cfg);
    } else {
      ejabc::Phase ph = ejabc::Phase::metrics;
      if (cmd == "pilot") ph = ejabc::Phase::pilot;
      else if (cmd == "fit-gp") ph = ejabc::Phase::fit_gp;
      else if (cmd == "sample") ph = ejabc::Phase::sample;
      else if (cmd == "smc") ph = ejabc::Phase::smc;
      manifest = ejabc::run_phases(cfg, {ph});
    }
    std::cout << manifest << '\n';
    return 0;
  } catch (const ejabc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
