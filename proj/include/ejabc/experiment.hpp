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

#ifndef EJABC_EXPERIMENT_HPP_
#define EJABC_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ejabc/discrepancy.hpp"
#include "ejabc/gp.hpp"
#include "ejabc/mcmc.hpp"
#include "ejabc/simulators.hpp"
#include "ejabc/smc.hpp"

namespace ejabc {

/// Invalid experiment configuration. Messages carry the config path and line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing run artifact.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

struct ObservedSource {
  std::optional<std::filesystem::path> file;  // CSV time,value_1..value_d
  std::optional<ParamVector> generate_theta;  // generate into `file` when it is absent
  std::uint64_t generate_seed = 0;
  std::optional<Dataset> value;  // inline data
};

struct McmcBlock {
  SamplerKind kind = SamplerKind::ej_mcmc;
  KernelFamily kernel = KernelFamily::uniform;
  double eps = 1.0;
  std::size_t iterations = 0;
  Eigen::MatrixXd proposal_cov;
  std::optional<ParamVector> init;
  int chains = 1;
  int max_init_attempts = 10000;
};

enum class PilotKind { prior, smc };

struct PilotBlock {
  PilotKind kind = PilotKind::prior;
  std::size_t budget = 500;
  SmcConfig smc;  // prior filled from the experiment
};

struct GpBlock {
  GPConfig gp;
  double a = 0.05;
  std::optional<std::filesystem::path> model_file;
  std::optional<std::filesystem::path> training_file;
};

struct MetricsBlock {
  bool toy_oracle = false;
  std::optional<std::filesystem::path> reference_samples;  // CSV theta_1..theta_p
  Eigen::Index grid_points = 512;
};

struct ExperimentConfig {
  std::filesystem::path path;
  std::string raw_text;
  std::string name;
  std::uint64_t seed = 1;
  int workers = 1;
  std::filesystem::path output_dir;

  std::string model_id;
  std::shared_ptr<const Simulator> simulator;
  ObservedSource observed;
  DiscrepancyKind discrepancy = DiscrepancyKind::rmse;
  PriorSpec prior;

  std::optional<GpBlock> gp;
  std::optional<PilotBlock> pilot;
  std::optional<McmcBlock> mcmc;
  std::optional<SmcConfig> smc;
  MetricsBlock metrics;

  bool uses_surrogate() const;
};

/// Parses and validates a config document. Relative paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& label = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::filesystem::path> out;
};

/// Seed, worker and output overrides; EJABC_OUT beats the config but not --out.
void apply_overrides(ExperimentConfig& cfg, const RunOverrides& overrides);

/// Loads the observed data, generating and persisting it first when the
/// config asks for generation and the file does not exist yet.
Dataset observed_data(const ExperimentConfig& cfg);
DistanceFn build_distance(const ExperimentConfig& cfg, const Dataset& observed);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string content_hash(const std::string& text);

enum class Phase { pilot, fit_gp, sample, smc, metrics };

/// Runs the named phases in order, writing artifacts and manifest.json into
/// cfg.output_dir. On failure an error manifest is written before rethrowing.
/// Returns the manifest as JSON text.
std::string run_phases(const ExperimentConfig& cfg, const std::vector<Phase>& phases);
/// pilot (when needed), fit-gp (when needed), sampler, metrics.
std::string run_experiment(const ExperimentConfig& cfg);

enum class PlotKind { marginal_density, trace, scatter2d, gp_fit_1d };
std::optional<PlotKind> plot_kind_from_string(std::string_view name);

/// Writes plot_<kind>*.csv files into run_dir; returns the written paths.
/// Throws NotFound when the required artifacts are missing.
std::vector<std::filesystem::path> emit_plotdata(const std::filesystem::path& run_dir, PlotKind kind,
                                                 Eigen::Index grid_points = 512);

}  // namespace ejabc

#endif  // EJABC_EXPERIMENT_HPP_
