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

#include "ejabc/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ejabc/csv.hpp"
#include "ejabc/diagnostics.hpp"

namespace ejabc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

bool ExperimentConfig::uses_surrogate() const {
  return (mcmc && mcmc->kind == SamplerKind::ej_mcmc) || (smc && smc->move == SmcMove::ej);
}

// ---------------------------------------------------------------------------
// config parsing

namespace {

class Reader {
 public:
  Reader(const std::string& text, std::string label) : text_(text), label_(std::move(label)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(label_ + ":" + std::to_string(line_of(key)) + ": " + msg);
  }

  // Line of the first occurrence of "key" in the raw text; 1 when not found.
  std::size_t line_of(const std::string& key) const {
    const std::string leaf = key.substr(key.find_last_of('.') + 1);
    const auto pos = text_.find('"' + leaf + '"');
    if (pos == std::string::npos) return 1;
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n'));
  }

  void allow(const json& obj, const std::string& where, std::initializer_list<std::string_view> keys) const {
    if (!obj.is_object()) fail(where, "'" + where + "' must be an object");
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (auto a : keys) ok = ok || a == k;
      if (!ok) fail(where + "." + k, "unknown key '" + k + "' in '" + where + "'");
    }
  }

  const json* find(const json& obj, const std::string& key) const {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  const json& need(const json& obj, const std::string& where, const std::string& key) const {
    const json* v = find(obj, key);
    if (!v) fail(where, "missing required key '" + where + "." + key + "'");
    return *v;
  }

  double number(const json& v, const std::string& key) const {
    if (!v.is_number()) fail(key, "'" + key + "' must be a number");
    return v.get<double>();
  }
  double positive(const json& v, const std::string& key) const {
    const double x = number(v, key);
    if (!(x > 0.0)) fail(key, "'" + key + "' must be positive");
    return x;
  }
  long long integer(const json& v, const std::string& key, long long lo) const {
    if (!v.is_number_integer()) fail(key, "'" + key + "' must be an integer");
    const auto x = v.get<long long>();
    if (x < lo) fail(key, "'" + key + "' must be >= " + std::to_string(lo));
    return x;
  }
  std::uint64_t unsigned64(const json& v, const std::string& key) const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(key, "'" + key + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const json& v, const std::string& key) const {
    if (!v.is_boolean()) fail(key, "'" + key + "' must be true or false");
    return v.get<bool>();
  }
  std::string string(const json& v, const std::string& key) const {
    if (!v.is_string()) fail(key, "'" + key + "' must be a string");
    return v.get<std::string>();
  }
  Eigen::VectorXd vector(const json& v, const std::string& key, Eigen::Index n = -1) const {
    if (!v.is_array()) fail(key, "'" + key + "' must be an array of numbers");
    if (n >= 0 && static_cast<Eigen::Index>(v.size()) != n)
      fail(key, "'" + key + "' must have " + std::to_string(n) + " entries");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], key);
    return out;
  }
  Eigen::MatrixXd matrix(const json& v, const std::string& key) const {
    if (!v.is_array() || v.empty() || !v[0].is_array()) fail(key, "'" + key + "' must be an array of rows");
    const auto cols = static_cast<Eigen::Index>(v[0].size());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), cols);
    for (std::size_t r = 0; r < v.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = vector(v[r], key, cols);
    return m;
  }
  std::vector<double> times(const json& obj, const std::string& where, std::vector<double> fallback) const {
    if (const json* t = find(obj, "obs_times")) {
      const Eigen::VectorXd v = vector(*t, where + ".obs_times");
      if (find(obj, "obs_step") || find(obj, "obs_count"))
        fail(where + ".obs_times", "give either obs_times or obs_step/obs_count, not both");
      return {v.data(), v.data() + v.size()};
    }
    if (find(obj, "obs_step") || find(obj, "obs_count")) {
      const double step = positive(need(obj, where, "obs_step"), where + ".obs_step");
      const auto count = integer(need(obj, where, "obs_count"), where + ".obs_count", 1);
      const double start = find(obj, "obs_start") ? number(obj["obs_start"], where + ".obs_start") : step;
      std::vector<double> t(static_cast<std::size_t>(count));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = start + step * static_cast<double>(i);
      return t;
    }
    return fallback;
  }

 private:
  const std::string& text_;
  std::string label_;
};

KernelFamily parse_kernel(const Reader& rd, const json& v, const std::string& key) {
  const auto k = kernel_from_string(rd.string(v, key));
  if (!k) rd.fail(key, "'" + key + "': unknown kernel '" + v.get<std::string>() + "'");
  return *k;
}

void parse_model(const Reader& rd, const json& m, ExperimentConfig& cfg) {
  const std::string id = rd.string(rd.need(m, "model", "id"), "model.id");
  cfg.model_id = id;
  auto num = [&](const char* key, double& dst) {
    if (const json* v = rd.find(m, key)) dst = rd.positive(*v, std::string("model.") + key);
  };
  if (id == "toy_mixture") {
    rd.allow(m, "model", {"id"});
    cfg.simulator = std::make_shared<ToyMixture>();
  } else if (id == "ode_system") {
    rd.allow(m, "model", {"id", "t_end", "n_obs", "step", "x0", "noise_sd"});
    OdeSettings s;
    num("t_end", s.t_end);
    num("step", s.step);
    if (const json* v = rd.find(m, "n_obs")) s.n_obs = rd.integer(*v, "model.n_obs", 2);
    if (const json* v = rd.find(m, "x0")) s.x0 = rd.vector(*v, "model.x0", 2);
    if (const json* v = rd.find(m, "noise_sd")) s.noise_sd = rd.vector(*v, "model.noise_sd", 2);
    try {
      cfg.simulator = std::make_shared<OdeSystem>(s);
    } catch (const std::invalid_argument& e) {
      rd.fail("model", e.what());
    }
  } else if (id == "sde_network") {
    rd.allow(m, "model",
             {"id", "scenario", "k", "x0", "dt", "obs_times", "obs_step", "obs_count", "obs_start", "noise_variance",
              "diffusion"});
    SdeSettings s;
    if (const json* v = rd.find(m, "scenario")) {
      try {
        s.scenario = sde_scenario_from_string(rd.string(*v, "model.scenario"));
      } catch (const std::invalid_argument& e) {
        rd.fail("model.scenario", e.what());
      }
    }
    num("k", s.k);
    num("dt", s.dt);
    if (const json* v = rd.find(m, "noise_variance")) s.noise_variance = rd.number(*v, "model.noise_variance");
    if (const json* v = rd.find(m, "x0")) s.x0 = rd.vector(*v, "model.x0", 4);
    if (const json* v = rd.find(m, "diffusion")) s.diffusion = rd.boolean(*v, "model.diffusion");
    s.obs_times = rd.times(m, "model", SdeSettings::default_obs_times());
    try {
      cfg.simulator = std::make_shared<SdeNetwork>(s);
    } catch (const std::invalid_argument& e) {
      rd.fail("model", e.what());
    }
  } else if (id == "dde_blowfly") {
    rd.allow(m, "model",
             {"id", "step", "obs_times", "obs_step", "obs_count", "obs_start", "sigma", "infer_sigma", "noise"});
    DdeSettings s;
    num("step", s.step);
    num("sigma", s.sigma);
    if (const json* v = rd.find(m, "infer_sigma")) s.infer_sigma = rd.boolean(*v, "model.infer_sigma");
    if (const json* v = rd.find(m, "noise")) {
      const std::string n = rd.string(*v, "model.noise");
      if (n == "log_location") s.noise = DdeNoise::log_location;
      else if (n == "moment_matched") s.noise = DdeNoise::moment_matched;
      else rd.fail("model.noise", "'model.noise' must be log_location or moment_matched");
    }
    s.obs_times = rd.times(m, "model", DdeSettings::default_obs_times());
    try {
      cfg.simulator = std::make_shared<DdeBlowfly>(s);
    } catch (const std::invalid_argument& e) {
      rd.fail("model", e.what());
    }
  } else {
    rd.fail("model.id", "unknown model id '" + id + "'");
  }
}

PriorSpec parse_prior(const Reader& rd, const json& v) {
  if (!v.is_array() || v.empty()) rd.fail("prior", "'prior' must be a nonempty array of marginals");
  std::vector<Marginal> ms;
  for (const auto& e : v) {
    if (!e.is_object() || e.size() != 1) rd.fail("prior", "each prior entry must be {\"uniform\"|\"normal\"|\"lognormal\": [a, b]}");
    const auto& [kind, args] = *e.items().begin();
    const Eigen::VectorXd a = rd.vector(args, "prior." + kind, 2);
    if (kind == "uniform") {
      if (!(a(0) < a(1))) rd.fail("prior.uniform", "uniform prior needs lo < hi");
      ms.emplace_back(UniformMarginal{a(0), a(1)});
    } else if (kind == "normal" || kind == "lognormal") {
      if (!(a(1) > 0.0)) rd.fail("prior." + kind, kind + " prior needs sd > 0");
      if (kind == "normal") ms.emplace_back(NormalMarginal{a(0), a(1)});
      else ms.emplace_back(LogNormalMarginal{a(0), a(1)});
    } else {
      rd.fail("prior." + kind, "unknown prior family '" + kind + "'");
    }
  }
  return PriorSpec(std::move(ms));
}

void parse_smc(const Reader& rd, const json& s, const std::string& where, SmcConfig& out, bool main_run) {
  if (main_run)
    rd.allow(s, where,
             {"n_particles", "gamma", "kernel", "move", "moves_per_round", "ess_fraction", "proposal_scale", "sim_budget",
              "target_eps", "max_rounds", "min_accept_rate"});
  else
    rd.allow(s, where,
             {"n_particles", "gamma", "kernel", "moves_per_round", "ess_fraction", "proposal_scale", "max_rounds",
              "min_accept_rate"});
  if (const json* v = rd.find(s, "n_particles")) out.n_particles = static_cast<int>(rd.integer(*v, where + ".n_particles", 2));
  if (const json* v = rd.find(s, "gamma")) {
    out.gamma = rd.number(*v, where + ".gamma");
    if (!(out.gamma > 0.0 && out.gamma < 1.0)) rd.fail(where + ".gamma", "'" + where + ".gamma' must lie in (0, 1)");
  }
  if (const json* v = rd.find(s, "kernel")) out.kernel = parse_kernel(rd, *v, where + ".kernel");
  if (const json* v = rd.find(s, "move")) {
    const std::string m = rd.string(*v, where + ".move");
    if (m == "oej") out.move = SmcMove::oej;
    else if (m == "ej") out.move = SmcMove::ej;
    else rd.fail(where + ".move", "'" + where + ".move' must be oej or ej");
  }
  if (const json* v = rd.find(s, "moves_per_round"))
    out.moves_per_round = static_cast<int>(rd.integer(*v, where + ".moves_per_round", 0));
  if (const json* v = rd.find(s, "ess_fraction")) out.ess_fraction = rd.number(*v, where + ".ess_fraction");
  if (const json* v = rd.find(s, "proposal_scale")) out.proposal_scale = rd.positive(*v, where + ".proposal_scale");
  if (const json* v = rd.find(s, "sim_budget"))
    out.sim_budget = static_cast<std::size_t>(rd.integer(*v, where + ".sim_budget", 1));
  if (const json* v = rd.find(s, "target_eps")) out.target_eps = rd.positive(*v, where + ".target_eps");
  if (const json* v = rd.find(s, "max_rounds")) out.max_rounds = static_cast<int>(rd.integer(*v, where + ".max_rounds", 0));
  if (const json* v = rd.find(s, "min_accept_rate")) {
    out.min_accept_rate = rd.number(*v, where + ".min_accept_rate");
    if (!(out.min_accept_rate >= 0.0 && out.min_accept_rate < 1.0))
      rd.fail(where + ".min_accept_rate", "'" + where + ".min_accept_rate' must lie in [0, 1)");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir, const std::string& label) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ConfigError(label + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  const Reader rd(text, label);
  rd.allow(doc, "config",
           {"schema_version", "name", "seed", "workers", "output", "model", "observed", "discrepancy", "prior", "gp",
            "pilot", "sampler", "metrics"});
  ExperimentConfig cfg;
  cfg.raw_text = text;

  const auto version = rd.integer(rd.need(doc, "config", "schema_version"), "schema_version", 0);
  if (version != kSchemaVersion)
    rd.fail("schema_version", "unsupported schema_version " + std::to_string(version) + " (expected " +
                                  std::to_string(kSchemaVersion) + ")");
  cfg.name = rd.string(rd.need(doc, "config", "name"), "name");
  if (const json* v = rd.find(doc, "seed")) cfg.seed = rd.unsigned64(*v, "seed");
  if (const json* v = rd.find(doc, "workers")) cfg.workers = static_cast<int>(rd.integer(*v, "workers", 1));
  cfg.output_dir = rd.find(doc, "output") ? resolve(base_dir, rd.string(doc["output"], "output"))
                                          : base_dir / "runs" / cfg.name;

  parse_model(rd, rd.need(doc, "config", "model"), cfg);
  cfg.prior = parse_prior(rd, rd.need(doc, "config", "prior"));
  if (cfg.prior.dim() != cfg.simulator->param_dim())
    rd.fail("prior", "prior has " + std::to_string(cfg.prior.dim()) + " marginals but model '" + cfg.model_id +
                         "' has " + std::to_string(cfg.simulator->param_dim()) + " parameters");

  {
    const json& o = rd.need(doc, "config", "observed");
    rd.allow(o, "observed", {"file", "generate", "value"});
    if (const json* v = rd.find(o, "file")) cfg.observed.file = resolve(base_dir, rd.string(*v, "observed.file"));
    if (const json* g = rd.find(o, "generate")) {
      rd.allow(*g, "observed.generate", {"theta", "seed"});
      cfg.observed.generate_theta =
          rd.vector(rd.need(*g, "observed.generate", "theta"), "observed.generate.theta", cfg.prior.dim());
      cfg.observed.generate_seed = rd.unsigned64(rd.need(*g, "observed.generate", "seed"), "observed.generate.seed");
      if (!cfg.observed.file) rd.fail("observed.generate", "'observed.generate' needs 'observed.file' to persist the data");
    }
    if (const json* v = rd.find(o, "value")) {
      cfg.observed.value = rd.matrix(*v, "observed.value");
      if (cfg.observed.file) rd.fail("observed.value", "give either 'observed.value' or 'observed.file'");
    }
    if (!cfg.observed.file && !cfg.observed.value) rd.fail("observed", "'observed' needs 'file' or 'value'");
  }

  {
    const std::string d = rd.string(rd.need(doc, "config", "discrepancy"), "discrepancy");
    try {
      cfg.discrepancy = discrepancy_from_string(d);
    } catch (const std::invalid_argument& e) {
      rd.fail("discrepancy", e.what());
    }
  }

  {
    const json& s = rd.need(doc, "config", "sampler");
    rd.allow(s, "sampler", {"mcmc", "smc"});
    if (s.size() != 1) rd.fail("sampler", "'sampler' must contain exactly one of 'mcmc' or 'smc'");
    if (const json* m = rd.find(s, "mcmc")) {
      rd.allow(*m, "sampler.mcmc",
               {"kind", "kernel", "eps", "iterations", "proposal_sd", "proposal_cov", "init", "chains",
                "max_init_attempts"});
      McmcBlock b;
      const std::string kind = rd.string(rd.need(*m, "sampler.mcmc", "kind"), "sampler.mcmc.kind");
      const auto k = sampler_from_string(kind);
      if (!k) rd.fail("sampler.mcmc.kind", "unknown sampler kind '" + kind + "'");
      b.kind = *k;
      if (const json* v = rd.find(*m, "kernel")) b.kernel = parse_kernel(rd, *v, "sampler.mcmc.kernel");
      b.eps = rd.positive(rd.need(*m, "sampler.mcmc", "eps"), "sampler.mcmc.eps");
      b.iterations = static_cast<std::size_t>(
          rd.integer(rd.need(*m, "sampler.mcmc", "iterations"), "sampler.mcmc.iterations", 0));
      const auto p = cfg.prior.dim();
      if (const json* v = rd.find(*m, "proposal_cov")) {
        b.proposal_cov = rd.matrix(*v, "sampler.mcmc.proposal_cov");
        if (b.proposal_cov.rows() != p || b.proposal_cov.cols() != p)
          rd.fail("sampler.mcmc.proposal_cov", "'sampler.mcmc.proposal_cov' must be " + std::to_string(p) + "x" +
                                                   std::to_string(p));
      } else {
        const Eigen::VectorXd sd = rd.vector(rd.need(*m, "sampler.mcmc", "proposal_sd"), "sampler.mcmc.proposal_sd", p);
        if ((sd.array() <= 0.0).any()) rd.fail("sampler.mcmc.proposal_sd", "'sampler.mcmc.proposal_sd' must be positive");
        b.proposal_cov = sd.array().square().matrix().asDiagonal();
      }
      try {
        GaussianRandomWalk check(b.proposal_cov);
      } catch (const std::invalid_argument& e) {
        rd.fail("sampler.mcmc.proposal_cov", e.what());
      }
      if (const json* v = rd.find(*m, "init")) b.init = rd.vector(*v, "sampler.mcmc.init", p);
      if (const json* v = rd.find(*m, "chains")) b.chains = static_cast<int>(rd.integer(*v, "sampler.mcmc.chains", 1));
      if (const json* v = rd.find(*m, "max_init_attempts"))
        b.max_init_attempts = static_cast<int>(rd.integer(*v, "sampler.mcmc.max_init_attempts", 1));
      cfg.mcmc = std::move(b);
    } else {
      SmcConfig sc;
      sc.prior = cfg.prior;
      parse_smc(rd, s["smc"], "sampler.smc", sc, true);
      if (!sc.sim_budget && !sc.target_eps && !sc.max_rounds)
        rd.fail("sampler.smc", "'sampler.smc' needs sim_budget, target_eps or max_rounds");
      cfg.smc = std::move(sc);
    }
  }

  if (const json* g = rd.find(doc, "gp")) {
    rd.allow(*g, "gp",
             {"a", "mean", "log_discrepancy", "standardize_inputs", "restarts", "max_evaluations", "noise_floor_ratio",
              "max_hyperopt_points", "model_file", "training_file"});
    GpBlock b;
    if (const json* v = rd.find(*g, "a")) {
      b.a = rd.number(*v, "gp.a");
      if (!(b.a > 0.0 && b.a < 1.0)) rd.fail("gp.a", "'gp.a' must lie in (0, 1)");
    }
    if (const json* v = rd.find(*g, "mean")) {
      const std::string m = rd.string(*v, "gp.mean");
      if (m == "constant") b.gp.mean = GPMean::constant;
      else if (m == "zero") b.gp.mean = GPMean::zero;
      else rd.fail("gp.mean", "'gp.mean' must be constant or zero");
    }
    if (const json* v = rd.find(*g, "log_discrepancy")) b.gp.log_discrepancy = rd.boolean(*v, "gp.log_discrepancy");
    if (const json* v = rd.find(*g, "standardize_inputs"))
      b.gp.standardize_inputs = rd.boolean(*v, "gp.standardize_inputs");
    if (const json* v = rd.find(*g, "restarts")) b.gp.restarts = static_cast<int>(rd.integer(*v, "gp.restarts", 1));
    if (const json* v = rd.find(*g, "max_evaluations"))
      b.gp.max_evaluations = static_cast<int>(rd.integer(*v, "gp.max_evaluations", 1));
    if (const json* v = rd.find(*g, "noise_floor_ratio")) b.gp.noise_floor_ratio = rd.positive(*v, "gp.noise_floor_ratio");
    if (const json* v = rd.find(*g, "max_hyperopt_points"))
      b.gp.max_hyperopt_points = rd.integer(*v, "gp.max_hyperopt_points", 5);
    if (const json* v = rd.find(*g, "model_file")) b.model_file = resolve(base_dir, rd.string(*v, "gp.model_file"));
    if (const json* v = rd.find(*g, "training_file"))
      b.training_file = resolve(base_dir, rd.string(*v, "gp.training_file"));
    cfg.gp = std::move(b);
  }

  if (const json* p = rd.find(doc, "pilot")) {
    rd.allow(*p, "pilot", {"kind", "budget", "smc"});
    PilotBlock b;
    if (const json* v = rd.find(*p, "kind")) {
      const std::string k = rd.string(*v, "pilot.kind");
      if (k == "prior") b.kind = PilotKind::prior;
      else if (k == "smc") b.kind = PilotKind::smc;
      else rd.fail("pilot.kind", "'pilot.kind' must be prior or smc");
    }
    b.budget = static_cast<std::size_t>(rd.integer(rd.need(*p, "pilot", "budget"), "pilot.budget", 5));
    b.smc.prior = cfg.prior;
    b.smc.max_rounds = 1000;
    if (const json* v = rd.find(*p, "smc")) parse_smc(rd, *v, "pilot.smc", b.smc, false);
    cfg.pilot = std::move(b);
  }

  if (const json* m = rd.find(doc, "metrics")) {
    rd.allow(*m, "metrics", {"toy_oracle", "reference_samples", "grid_points"});
    if (const json* v = rd.find(*m, "toy_oracle")) cfg.metrics.toy_oracle = rd.boolean(*v, "metrics.toy_oracle");
    if (const json* v = rd.find(*m, "reference_samples"))
      cfg.metrics.reference_samples = resolve(base_dir, rd.string(*v, "metrics.reference_samples"));
    if (const json* v = rd.find(*m, "grid_points")) cfg.metrics.grid_points = rd.integer(*v, "metrics.grid_points", 2);
    if (cfg.metrics.toy_oracle && cfg.model_id != "toy_mixture")
      rd.fail("metrics.toy_oracle", "'metrics.toy_oracle' requires model toy_mixture");
  }

  if (cfg.uses_surrogate()) {
    if (!cfg.gp) rd.fail("sampler", "ej samplers require a 'gp' block");
    if (!cfg.gp->model_file && !cfg.gp->training_file && !cfg.pilot)
      rd.fail("gp", "ej samplers need 'pilot', 'gp.training_file' or 'gp.model_file'");
  }
  if (cfg.gp && cfg.gp->model_file && !fs::exists(*cfg.gp->model_file))
    rd.fail("gp.model_file", "file not found: " + cfg.gp->model_file->string());
  if (cfg.gp && cfg.gp->training_file && !fs::exists(*cfg.gp->training_file))
    rd.fail("gp.training_file", "file not found: " + cfg.gp->training_file->string());
  if (cfg.metrics.reference_samples && !fs::exists(*cfg.metrics.reference_samples))
    rd.fail("metrics.reference_samples", "file not found: " + cfg.metrics.reference_samples->string());
  if (cfg.observed.file && !cfg.observed.generate_theta && !fs::exists(*cfg.observed.file))
    rd.fail("observed.file", "file not found: " + cfg.observed.file->string());
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path(),
                                      path.string());
  cfg.path = path;
  return cfg;
}

void apply_overrides(ExperimentConfig& cfg, const RunOverrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) {
    if (*o.workers < 1) throw ConfigError("--workers must be positive");
    cfg.workers = *o.workers;
  }
  if (const char* env = std::getenv("EJABC_OUT"); env && *env) cfg.output_dir = env;
  if (o.out) cfg.output_dir = *o.out;
}

// ---------------------------------------------------------------------------
// data

namespace {

std::string stamp(const ExperimentConfig& cfg) {
  std::string s = "generated model=" + cfg.model_id + " seed=" + std::to_string(cfg.observed.generate_seed) + " theta=";
  for (Eigen::Index i = 0; i < cfg.observed.generate_theta->size(); ++i)
    s += (i ? ";" : "") + format_double((*cfg.observed.generate_theta)(i));
  return s;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

Dataset observed_data(const ExperimentConfig& cfg) {
  Dataset y;
  if (cfg.observed.value) {
    y = *cfg.observed.value;
  } else {
    const fs::path& file = *cfg.observed.file;
    if (cfg.observed.generate_theta) {
      const std::string want = "# " + stamp(cfg);
      if (fs::exists(file)) {
        if (first_line(file) != want)
          throw ConfigError(file.string() + ": existing data was not generated from this config (" + want.substr(2) +
                            "); remove the file to regenerate");
      } else {
        RngStream rng(cfg.observed.generate_seed, 0);
        ObservedSeries s;
        s.times = cfg.simulator->times();
        s.values = cfg.simulator->simulate(*cfg.observed.generate_theta, rng);
        if (file.has_parent_path()) fs::create_directories(file.parent_path());
        write_observed_csv(file.string(), s, stamp(cfg));
      }
    }
    y = cfg.model_id == "dde_blowfly" && !cfg.observed.generate_theta ? load_blowfly_data(file.string()).values
                                                                       : read_observed_csv(file.string()).values;
  }
  if (y.rows() != cfg.simulator->data_rows() || y.cols() != cfg.simulator->data_cols())
    throw ConfigError("observed data is " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + " but model '" +
                      cfg.model_id + "' produces " + std::to_string(cfg.simulator->data_rows()) + "x" +
                      std::to_string(cfg.simulator->data_cols()));
  if (!y.allFinite()) throw ConfigError("observed data contains non-finite values");
  return y;
}

DistanceFn build_distance(const ExperimentConfig& cfg, const Dataset& observed) {
  return make_distance(cfg.simulator, observed, make_discrepancy(cfg.discrepancy, observed));
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// phases

namespace {

// Random stream ids per phase.
constexpr std::uint64_t kPilotStream = 1, kGpStream = 2, kSamplerStream = 3, kResampleStream = 4;

struct Run {
  const ExperimentConfig& cfg;
  fs::path dir;
  json manifest;
  std::vector<std::string> artifacts;
  std::optional<Dataset> observed;
  std::optional<DistanceFn> distance;

  const DistanceFn& dist() {
    if (!distance) {
      observed = observed_data(cfg);
      distance = build_distance(cfg, *observed);
    }
    return *distance;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    if (std::find(artifacts.begin(), artifacts.end(), name) == artifacts.end()) artifacts.push_back(name);
    return out;
  }

  fs::path need(const std::string& name, const char* phase) const {
    const fs::path p = dir / name;
    if (!fs::exists(p)) throw NotFound(std::string(phase) + ": missing artifact " + p.string());
    return p;
  }
};

json counters_json(const EffSummary& s) {
  json c;
  c["N_ite"] = s.n_ite;
  c["N_pre"] = s.n_pre;
  c["N_sim"] = s.n_sim;
  c["N_acc"] = s.n_accept;
  c["n_early1"] = s.n_early1;
  c["n_early2"] = s.n_early2;
  c["n_sim_reject"] = s.n_sim_reject;
  c["n_failed"] = s.n_failed;
  c["Eff"] = s.efficiency();
  return c;
}

void phase_pilot(Run& run) {
  const auto& cfg = run.cfg;
  if (!cfg.pilot) throw ConfigError("pilot: config has no 'pilot' block");
  const RngStream rng(cfg.seed, kPilotStream);
  TrainingData td;
  if (cfg.pilot->kind == PilotKind::prior) {
    td = prior_training_data(cfg.prior, cfg.pilot->budget, run.dist(), rng, cfg.workers);
  } else {
    SmcConfig sc = cfg.pilot->smc;
    sc.workers = cfg.workers;
    td = collect_training_data(sc, cfg.pilot->budget, run.dist(), rng);
  }
  write_training_csv((run.dir / "training.csv").string(), td.data);
  run.artifacts.push_back("training.csv");
  run.manifest["pilot"] = {{"kind", cfg.pilot->kind == PilotKind::prior ? "prior" : "smc"},
                           {"budget", cfg.pilot->budget},
                           {"collected", td.data.size()},
                           {"complete", td.complete}};
}

void phase_fit_gp(Run& run) {
  const auto& cfg = run.cfg;
  if (!cfg.gp) throw ConfigError("fit-gp: config has no 'gp' block");
  const fs::path train = cfg.gp->training_file ? *cfg.gp->training_file : run.need("training.csv", "fit-gp");
  const DiscrepancySet data = read_training_csv(train.string());
  RngStream rng(cfg.seed, kGpStream);
  const GPModel model = fit_gp(data, cfg.gp->gp, rng);
  run.open("gp.json") << model.to_json();
  const auto& hp = model.hyperparameters();
  run.manifest["gp"] = {{"training", data.size()},
                        {"lengthscales", std::vector<double>(hp.lengthscales.data(),
                                                             hp.lengthscales.data() + hp.lengthscales.size())},
                        {"signal_variance", hp.signal_variance},
                        {"noise_variance", hp.noise_variance},
                        {"log_marginal_likelihood", model.log_marginal_likelihood()}};
}

Surrogate load_surrogate(Run& run, const char* phase) {
  const auto& cfg = run.cfg;
  const fs::path path = cfg.gp->model_file ? *cfg.gp->model_file : run.need("gp.json", phase);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return gp_surrogate(std::make_shared<const GPModel>(GPModel::from_json(ss.str())), cfg.gp->a);
}

void phase_sample(Run& run) {
  const auto& cfg = run.cfg;
  if (!cfg.mcmc) throw ConfigError("sample: config has no 'sampler.mcmc' block");
  const McmcBlock& b = *cfg.mcmc;
  SamplerConfig sc;
  sc.sampler = b.kind;
  sc.kernel = b.kernel;
  sc.eps = b.eps;
  sc.prior = cfg.prior;
  sc.proposal = std::make_shared<GaussianRandomWalk>(b.proposal_cov);
  sc.iterations = b.iterations;
  sc.init = b.init;
  sc.max_init_attempts = b.max_init_attempts;
  if (b.kind == SamplerKind::ej_mcmc) sc.h = load_surrogate(run, "sample");

  const RngStream rng(cfg.seed, kSamplerStream);
  const auto chains = run_chains(sc, run.dist(), rng, b.chains, cfg.workers);
  const Eigen::Index p = cfg.prior.dim();
  std::vector<IterationRecord> all;
  Eigen::MatrixXd samples(0, p);
  json per_chain = json::array();
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    const std::string suffix = chains.size() > 1 ? "_" + std::to_string(c) : "";
    if (chains.size() > 1) {
      {
        auto o = run.open("trace" + suffix + ".csv");
        write_trace_csv(o, ch.trace, p);
      }
      {
        auto o = run.open("samples" + suffix + ".csv");
        write_samples_csv(o, ch.samples);
      }
    }
    all.insert(all.end(), ch.trace.begin(), ch.trace.end());
    Eigen::MatrixXd joined(samples.rows() + ch.samples.rows(), p);
    joined << samples, ch.samples;
    samples = std::move(joined);
    json cj = counters_json(summarize(ch.trace));
    cj["init_attempts"] = ch.init_attempts;
    per_chain.push_back(cj);
  }
  {
    auto out = run.open("trace.csv");
    std::vector<IterationRecord> renumbered = all;
    for (std::size_t i = 0; i < renumbered.size(); ++i) renumbered[i].iteration = i;
    write_trace_csv(out, renumbered, p);
  }
  {
    auto o = run.open("samples.csv");
    write_samples_csv(o, samples);
  }
  run.manifest["counters"] = counters_json(summarize(all));
  run.manifest["chains"] = per_chain;
}

void phase_smc(Run& run) {
  const auto& cfg = run.cfg;
  if (!cfg.smc) throw ConfigError("smc: config has no 'sampler.smc' block");
  SmcConfig sc = *cfg.smc;
  sc.workers = cfg.workers;
  if (sc.move == SmcMove::ej) sc.h = load_surrogate(run, "smc");
  const SmcResult res = run_ejasmc(sc, run.dist(), RngStream(cfg.seed, kSamplerStream));
  {
    auto o = run.open("report.csv");
    write_report_csv(o, res.rounds);
  }
  {
    auto o = run.open("particles.csv");
    write_particles_csv(o, res.particles);
  }
  {
    auto o = run.open("trace.csv");
    write_trace_csv(o, res.moves, cfg.prior.dim());
  }
  RngStream rs(cfg.seed, kResampleStream);
  const ParticleSet eq = systematic_resample(res.particles, rs);
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(eq.size()), cfg.prior.dim());
  for (std::size_t i = 0; i < eq.size(); ++i) samples.row(static_cast<Eigen::Index>(i)) = eq[i].theta.transpose();
  {
    auto o = run.open("samples.csv");
    write_samples_csv(o, samples);
  }
  json c = counters_json(summarize(res.moves));
  c["N_sim_total"] = res.total_sims;
  run.manifest["counters"] = c;
  run.manifest["smc"] = {{"rounds", res.rounds.size()}, {"final_eps", res.eps}, {"stop_reason", res.stop_reason}};
  if (res.failure) throw DegeneracyError(*res.failure);
}

void phase_metrics(Run& run) {
  const auto& cfg = run.cfg;
  const Eigen::MatrixXd samples = read_samples_csv(run.need("samples.csv", "metrics").string());
  const auto trace = read_trace_csv(run.need("trace.csv", "metrics").string());
  const EffSummary s = summarize(trace);
  json metrics = json::array();
  metrics.push_back({{"name", "efficiency"}, {"value", s.efficiency()}});
  metrics.push_back({{"name", "n_sim"}, {"value", s.n_sim}});
  metrics.push_back({{"name", "n_accept"}, {"value", s.n_accept}});
  metrics.push_back({{"name", "n_ite"}, {"value", s.n_ite}});
  const Eigen::Index p = samples.cols();
  const Eigen::Index g = cfg.metrics.grid_points;

  if (cfg.metrics.toy_oracle && cfg.mcmc) {
    const Eigen::VectorXd grid = uniform_grid(-6.0, 6.0, g);
    const DensityOnGrid oracle = toy_posterior_oracle(grid, cfg.mcmc->eps);
    const KdeResult kde = kde_density(samples.col(0), grid);
    metrics.push_back({{"name", "l1_oracle_theta_1"},
                       {"value", l1_distance(kde.density, oracle)},
                       {"config", {{"grid_lo", -6.0}, {"grid_hi", 6.0}, {"points", g}, {"bandwidth", kde.bandwidth}}}});
  }
  if (cfg.metrics.reference_samples) {
    const Eigen::MatrixXd ref = read_samples_csv(cfg.metrics.reference_samples->string());
    if (ref.cols() != p) throw FormatError("reference samples have the wrong dimension");
    for (Eigen::Index k = 0; k < p; ++k) {
      const SampleL1 l = l1_between_samples(samples.col(k), ref.col(k), g);
      metrics.push_back({{"name", "l1_reference_theta_" + std::to_string(k + 1)},
                         {"value", l.value},
                         {"config",
                          {{"grid_lo", l.lo},
                           {"grid_hi", l.hi},
                           {"points", l.points},
                           {"bandwidth", l.bandwidth_a},
                           {"reference_bandwidth", l.bandwidth_b}}}});
    }
  }
  if (cfg.mcmc && cfg.mcmc->chains > 1) {
    std::vector<Eigen::MatrixXd> chains;
    for (int c = 0; c < cfg.mcmc->chains; ++c)
      chains.push_back(read_samples_csv(run.need("samples_" + std::to_string(c) + ".csv", "metrics").string()));
    try {
      const Eigen::VectorXd r = gelman_rubin(chains);
      for (Eigen::Index k = 0; k < p; ++k)
        metrics.push_back({{"name", "gelman_rubin_theta_" + std::to_string(k + 1)}, {"value", r(k)}});
    } catch (const UndefinedStatistic& e) {
      metrics.push_back({{"name", "gelman_rubin"}, {"value", nullptr}, {"error", e.what()}});
    } catch (const std::invalid_argument& e) {
      metrics.push_back({{"name", "gelman_rubin"}, {"value", nullptr}, {"error", e.what()}});
    }
  }
  json doc;
  doc["metrics"] = metrics;
  doc["seed"] = cfg.seed;
  doc["config_hash"] = content_hash(cfg.raw_text);
  run.open("metrics.json") << doc.dump(2) << '\n';
  if (!run.manifest.contains("counters")) run.manifest["counters"] = counters_json(s);
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::pilot: return "pilot";
    case Phase::fit_gp: return "fit-gp";
    case Phase::sample: return "sample";
    case Phase::smc: return "smc";
    case Phase::metrics: return "metrics";
  }
  return "?";
}

}  // namespace

std::string run_phases(const ExperimentConfig& cfg, const std::vector<Phase>& phases) {
  fs::create_directories(cfg.output_dir);
  Run run{cfg, cfg.output_dir, json::object(), {}, {}, {}};
  run.manifest["schema_version"] = kSchemaVersion;
  run.manifest["name"] = cfg.name;
  run.manifest["config"] = cfg.path.string();
  run.manifest["config_hash"] = content_hash(cfg.raw_text);
  run.manifest["seed"] = cfg.seed;
  run.manifest["workers"] = cfg.workers;
  json timings = json::array();
  auto finish = [&](const std::string& status, const std::string& error) {
    run.manifest["status"] = status;
    if (!error.empty()) run.manifest["error"] = error;
    run.manifest["phases"] = timings;
    std::vector<std::string> arts = run.artifacts;
    arts.push_back("manifest.json");
    run.manifest["artifacts"] = arts;
    std::ofstream out(run.dir / "manifest.json");
    out << run.manifest.dump(2) << '\n';
    return run.manifest.dump(2);
  };
  for (Phase ph : phases) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (ph) {
        case Phase::pilot: phase_pilot(run); break;
        case Phase::fit_gp: phase_fit_gp(run); break;
        case Phase::sample: phase_sample(run); break;
        case Phase::smc: phase_smc(run); break;
        case Phase::metrics: phase_metrics(run); break;
      }
    } catch (const std::exception& e) {
      timings.push_back({{"name", phase_name(ph)},
                         {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                         {"status", "error"}});
      finish("error", std::string(phase_name(ph)) + ": " + e.what());
      throw;
    }
    timings.push_back({{"name", phase_name(ph)},
                       {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  }
  return finish("ok", "");
}

std::string run_experiment(const ExperimentConfig& cfg) {
  std::vector<Phase> phases;
  if (cfg.uses_surrogate() && !cfg.gp->model_file) {
    if (!cfg.gp->training_file) phases.push_back(Phase::pilot);
    phases.push_back(Phase::fit_gp);
  }
  phases.push_back(cfg.mcmc ? Phase::sample : Phase::smc);
  phases.push_back(Phase::metrics);
  return run_phases(cfg, phases);
}

// ---------------------------------------------------------------------------
// plot data

std::optional<PlotKind> plot_kind_from_string(std::string_view name) {
  if (name == "marginal_density") return PlotKind::marginal_density;
  if (name == "trace") return PlotKind::trace;
  if (name == "scatter2d") return PlotKind::scatter2d;
  if (name == "gp_fit_1d") return PlotKind::gp_fit_1d;
  return std::nullopt;
}

std::vector<fs::path> emit_plotdata(const fs::path& run_dir, PlotKind kind, Eigen::Index grid_points) {
  auto need = [&](const std::string& name) {
    const fs::path p = run_dir / name;
    if (!fs::exists(p)) throw NotFound("plotdata: missing artifact " + p.string());
    return p;
  };
  auto open = [](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
  };
  std::vector<fs::path> written;
  switch (kind) {
    case PlotKind::marginal_density: {
      const Eigen::MatrixXd s = read_samples_csv(need("samples.csv").string());
      if (s.rows() < 2) throw NotFound("plotdata: fewer than 2 samples");
      for (Eigen::Index k = 0; k < s.cols(); ++k) {
        const Eigen::VectorXd col = s.col(k);
        const double bw = std::max(silverman_bandwidth(col), 1e-12 * std::max(1.0, std::abs(col.mean())));
        const Eigen::VectorXd grid =
            uniform_grid(col.minCoeff() - 3.0 * bw, col.maxCoeff() + 3.0 * bw, grid_points);
        const KdeResult kde = kde_density(col, grid);
        const fs::path p = run_dir / ("plot_marginal_density_theta_" + std::to_string(k + 1) + ".csv");
        auto out = open(p);
        write_csv_row(out, {"theta", "density"});
        for (Eigen::Index i = 0; i < grid.size(); ++i)
          write_csv_row(out, {format_double(grid(i)), format_double(kde.density.values(i))});
        written.push_back(p);
      }
      break;
    }
    case PlotKind::trace: {
      const Eigen::MatrixXd s = read_samples_csv(need("samples.csv").string());
      const fs::path p = run_dir / "plot_trace.csv";
      auto out = open(p);
      auto header = numbered_columns("theta", static_cast<std::size_t>(s.cols()));
      header.insert(header.begin(), "iteration");
      write_csv_row(out, header);
      for (Eigen::Index n = 0; n < s.rows(); ++n) {
        std::vector<std::string> row{std::to_string(n)};
        for (Eigen::Index k = 0; k < s.cols(); ++k) row.push_back(format_double(s(n, k)));
        write_csv_row(out, row);
      }
      written.push_back(p);
      break;
    }
    case PlotKind::scatter2d: {
      const auto trace = read_trace_csv(need("trace.csv").string());
      const fs::path p = run_dir / "plot_scatter2d.csv";
      auto out = open(p);
      const std::size_t dim = trace.empty() ? 0 : static_cast<std::size_t>(trace.front().theta.size());
      auto header = numbered_columns("theta", dim);
      header.push_back("delta");
      write_csv_row(out, header);
      for (const auto& r : trace) {
        if (r.outcome != Outcome::accept) continue;
        std::vector<std::string> row;
        for (Eigen::Index k = 0; k < r.theta.size(); ++k) row.push_back(format_double(r.theta(k)));
        row.push_back(format_double(*r.delta));
        write_csv_row(out, row);
      }
      written.push_back(p);
      break;
    }
    case PlotKind::gp_fit_1d: {
      std::ifstream in(need("gp.json"));
      std::stringstream ss;
      ss << in.rdbuf();
      const GPModel model = GPModel::from_json(ss.str());
      const DiscrepancySet& tr = model.training();
      Eigen::Index best = 0;
      tr.deltas.minCoeff(&best);
      for (Eigen::Index k = 0; k < model.dim(); ++k) {
        const double lo = tr.thetas.col(k).minCoeff(), hi = tr.thetas.col(k).maxCoeff();
        if (!(hi > lo)) continue;
        const Eigen::VectorXd grid = uniform_grid(lo, hi, grid_points);
        const fs::path p = run_dir / ("plot_gp_fit_1d_theta_" + std::to_string(k + 1) + ".csv");
        auto out = open(p);
        write_csv_row(out, {"theta", "mean", "lower", "upper"});
        ParamVector q = tr.thetas.row(best).transpose();
        for (Eigen::Index i = 0; i < grid.size(); ++i) {
          q(k) = grid(i);
          const GPPrediction pr = model.predict(q);
          const double half = 1.959963984540054 * std::sqrt(pr.variance + model.noise_variance());
          write_csv_row(out, {format_double(grid(i)), format_double(pr.mean), format_double(pr.mean - half),
                              format_double(pr.mean + half)});
        }
        written.push_back(p);
      }
      break;
    }
  }
  return written;
}

}  // namespace ejabc
