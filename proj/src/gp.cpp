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

#include "ejabc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "ejabc/csv.hpp"
#include "ejabc/normal.hpp"
#include "ejabc/optimize.hpp"

namespace ejabc {

void DiscrepancySet::add(const ParamVector& theta, double delta) {
  if (size() > 0 && theta.size() != dim()) throw std::invalid_argument("DiscrepancySet: dimension mismatch");
  if (!std::isfinite(delta) || delta < 0.0)
    throw std::invalid_argument("DiscrepancySet: discrepancies must be finite and nonnegative");
  const Eigen::Index s = size();
  thetas.conservativeResize(s + 1, theta.size());
  deltas.conservativeResize(s + 1);
  thetas.row(s) = theta.transpose();
  deltas(s) = delta;
}

void DiscrepancySet::validate() const {
  if (thetas.rows() != deltas.size()) throw std::invalid_argument("DiscrepancySet: row count mismatch");
  if (!thetas.allFinite()) throw std::invalid_argument("DiscrepancySet: non-finite theta");
  for (Eigen::Index i = 0; i < deltas.size(); ++i)
    if (!std::isfinite(deltas(i)) || deltas(i) < 0.0)
      throw std::invalid_argument("DiscrepancySet: discrepancies must be finite and nonnegative");
}

DiscrepancySet DiscrepancySet::head(Eigen::Index n) const {
  n = std::min(n, size());
  return {thetas.topRows(n), deltas.head(n)};
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Factor {
  Eigen::MatrixXd lower;
  double jitter;
};

// Cholesky of K + noise I with jitter escalation 1e-10 -> 1e-4 (relative to
// the signal variance).
std::optional<Factor> factorize(Eigen::MatrixXd k, double noise, double signal, bool escalate) {
  k.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) return Factor{llt.matrixL(), 0.0};
  if (!escalate) return std::nullopt;
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
    const double jitter = rel * signal;
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    llt.compute(kj);
    if (llt.info() == Eigen::Success) return Factor{llt.matrixL(), jitter};
  }
  return std::nullopt;
}

double log_marginal(const Eigen::MatrixXd& lower, const Eigen::VectorXd& centered, Eigen::VectorXd* alpha_out) {
  Eigen::VectorXd alpha = lower.triangularView<Eigen::Lower>().solve(centered);
  const double quad = alpha.squaredNorm();
  if (alpha_out) {
    lower.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha);
    *alpha_out = std::move(alpha);
  }
  return -0.5 * quad - lower.diagonal().array().log().sum() - 0.5 * static_cast<double>(centered.size()) * kLog2Pi;
}

double variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

double median_pairwise_distance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = std::min<Eigen::Index>(x.rows(), 200);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((x.row(i) - x.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace

GPModel assemble_gp(DiscrepancySet train, GPConfig cfg, Eigen::VectorXd offset, Eigen::VectorXd scale, double mean,
                    GPHyperparameters hyper) {
  train.validate();
  if (train.size() < 1) throw std::invalid_argument("fit_gp: empty training set");
  if (hyper.lengthscales.size() != train.dim()) throw std::invalid_argument("fit_gp: lengthscale dimension mismatch");
  if ((hyper.lengthscales.array() <= 0.0).any() || !(hyper.signal_variance > 0.0) || !(hyper.noise_variance >= 0.0))
    throw std::invalid_argument("fit_gp: invalid hyperparameters");
  if (cfg.log_discrepancy && (train.deltas.array() <= 0.0).any())
    throw std::invalid_argument("fit_gp: log-discrepancy model needs strictly positive discrepancies");

  GPModel m;
  m.config_ = std::move(cfg);
  m.offset_ = std::move(offset);
  m.scale_ = std::move(scale);
  m.x_ = (train.thetas.rowwise() - m.offset_.transpose()) * m.scale_.cwiseInverse().asDiagonal();
  m.y_ = m.config_.log_discrepancy ? Eigen::VectorXd(train.deltas.array().log()) : train.deltas;
  m.training_ = std::move(train);
  m.mean_ = mean;
  m.hyper_ = std::move(hyper);

  const Eigen::MatrixXd k = squared_exponential(m.x_, m.x_, m.hyper_.lengthscales, m.hyper_.signal_variance);
  auto factor = factorize(k, m.hyper_.noise_variance, m.hyper_.signal_variance, true);
  if (!factor) throw NumericalFailure("fit_gp: covariance matrix is not positive definite after jitter escalation");
  m.chol_ = std::move(factor->lower);
  m.jitter_ = factor->jitter;
  const Eigen::VectorXd centered = m.y_.array() - m.mean_;
  m.log_ml_ = log_marginal(m.chol_, centered, &m.alpha_);
  return m;
}

GPModel fit_gp(const DiscrepancySet& train, const GPConfig& cfg, RngStream& rng) {
  train.validate();
  const Eigen::Index s = train.size();
  const Eigen::Index p = train.dim();
  if (!cfg.fixed && s < 5) throw std::invalid_argument("fit_gp: at least 5 training records are required");
  if (s < 1) throw std::invalid_argument("fit_gp: empty training set");
  if (cfg.log_discrepancy && (train.deltas.array() <= 0.0).any())
    throw std::invalid_argument("fit_gp: log-discrepancy model needs strictly positive discrepancies");

  Eigen::VectorXd offset = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  if (cfg.standardize_inputs && s > 1) {
    offset = train.thetas.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double sd = std::sqrt(variance(train.thetas.col(j)));
      scale(j) = sd > 0.0 ? sd : 1.0;
    }
  }
  const Eigen::VectorXd y = cfg.log_discrepancy ? Eigen::VectorXd(train.deltas.array().log()) : train.deltas;
  const double mean = cfg.mean == GPMean::constant ? y.mean() : 0.0;

  if (cfg.fixed) return assemble_gp(train, cfg, offset, scale, mean, *cfg.fixed);

  // hyperparameter search on a random subset
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(s));
  std::iota(idx.begin(), idx.end(), 0);
  if (s > cfg.max_hyperopt_points) {
    for (Eigen::Index i = 0; i < cfg.max_hyperopt_points; ++i) {
      const auto j = i + static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(s - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(std::min(j, s - 1))]);
    }
    idx.resize(static_cast<std::size_t>(cfg.max_hyperopt_points));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd xs(n, p);
  Eigen::VectorXd ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = idx[static_cast<std::size_t>(i)];
    xs.row(i) = (train.thetas.row(r) - offset.transpose()).cwiseQuotient(scale.transpose());
    ys(i) = y(r) - mean;
  }

  const double var_y = std::max(variance(y), 1e-12);
  const double noise_floor = std::max(cfg.noise_floor_ratio * var_y, 1e-300);
  const double ls_lo = std::log(1e-3), ls_hi = std::log(1e3);
  const double sf_lo = std::log(var_y * 1e-6), sf_hi = std::log(var_y * 1e6);
  const double sn_hi = std::log(var_y * 10.0);

  auto unpack = [&](const Eigen::VectorXd& v) {
    GPHyperparameters h;
    h.lengthscales = v.head(p).array().exp();
    h.signal_variance = std::exp(v(p));
    h.noise_variance = cfg.fixed_noise_variance ? *cfg.fixed_noise_variance : std::max(std::exp(v(p + 1)), noise_floor);
    return h;
  };
  auto objective = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index j = 0; j < p; ++j)
      if (v(j) < ls_lo || v(j) > ls_hi) return std::numeric_limits<double>::infinity();
    if (v(p) < sf_lo || v(p) > sf_hi || v(p + 1) > sn_hi) return std::numeric_limits<double>::infinity();
    const GPHyperparameters h = unpack(v);
    const Eigen::MatrixXd k = squared_exponential(xs, xs, h.lengthscales, h.signal_variance);
    auto factor = factorize(k, h.noise_variance, h.signal_variance, false);
    if (!factor) return std::numeric_limits<double>::infinity();
    return -log_marginal(factor->lower, ys, nullptr);
  };

  Eigen::VectorXd start(p + 2);
  start.head(p).setConstant(std::log(median_pairwise_distance(xs)));
  start(p) = std::log(var_y);
  start(p + 1) = std::log(std::max(0.1 * var_y, noise_floor));
  if (cfg.fixed_noise_variance && !(*cfg.fixed_noise_variance >= 0.0))
    throw std::invalid_argument("fit_gp: fixed noise variance must be nonnegative");

  NelderMeadOptions opts;
  opts.max_evaluations = cfg.max_evaluations;
  std::optional<NelderMeadResult> best;
  const int restarts = std::max(cfg.restarts, 1);
  for (int r = 0; r < restarts; ++r) {
    RngStream local = rng.split(static_cast<std::uint64_t>(r));
    Eigen::VectorXd x0 = start;
    if (r > 0) x0 += local.normal_vector(p + 2);
    x0.head(p) = x0.head(p).cwiseMax(ls_lo + 1e-3).cwiseMin(ls_hi - 1e-3);
    x0(p) = std::clamp(x0(p), sf_lo + 1e-3, sf_hi - 1e-3);
    x0(p + 1) = std::min(x0(p + 1), sn_hi - 1e-3);
    auto res = nelder_mead(objective, x0, Eigen::VectorXd::Constant(p + 2, 0.5), opts);
    if (!best || res.value < best->value) best = std::move(res);
  }
  if (!best || !std::isfinite(best->value))
    throw NumericalFailure("fit_gp: hyperparameter search found no positive-definite configuration");
  return assemble_gp(train, cfg, offset, scale, mean, unpack(best->x));
}

GPPrediction GPModel::predict(const ParamVector& theta) const {
  if (theta.size() != dim()) throw std::invalid_argument("gp_predict: dimension mismatch");
  const Eigen::RowVectorXd q = (theta - offset_).cwiseQuotient(scale_).transpose();
  const Eigen::VectorXd inv_ls = hyper_.lengthscales.cwiseInverse();
  Eigen::VectorXd k =
      hyper_.signal_variance *
      (-0.5 * ((x_.rowwise() - q) * inv_ls.asDiagonal()).rowwise().squaredNorm().array()).exp().matrix();
  const double mu = mean_ + k.dot(alpha_);
  chol_.triangularView<Eigen::Lower>().solveInPlace(k);
  const double v = std::max(hyper_.signal_variance - k.squaredNorm(), 0.0);
  return {mu, v};
}

void GPModel::predict(const Eigen::MatrixXd& thetas, Eigen::VectorXd& mean, Eigen::VectorXd& var) const {
  if (thetas.cols() != dim()) throw std::invalid_argument("gp_predict: dimension mismatch");
  const Eigen::MatrixXd q = (thetas.rowwise() - offset_.transpose()) * scale_.cwiseInverse().asDiagonal();
  Eigen::MatrixXd k = squared_exponential(x_, q, hyper_.lengthscales, hyper_.signal_variance);  // s x m
  mean = (k.transpose() * alpha_).array() + mean_;
  chol_.triangularView<Eigen::Lower>().solveInPlace(k);
  var = (hyper_.signal_variance - k.colwise().squaredNorm().array()).cwiseMax(0.0).matrix().transpose();
}

double h_quantile(const GPModel& model, const ParamVector& theta, double a) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("h_quantile: a must lie in (0, 1)");
  const GPPrediction pred = model.predict(theta);
  const double q = pred.mean + normal_quantile(a) * std::sqrt(pred.variance + model.noise_variance());
  return model.config().log_discrepancy ? std::exp(q) : q;
}

double gp_abc_logdensity(const GPModel& model, const ParamVector& theta, double eps, const PriorSpec& prior) {
  if (!(eps > 0.0)) throw std::invalid_argument("gp_abc_logdensity: eps must be positive");
  const double lp = prior.log_density(theta);
  if (lp == -std::numeric_limits<double>::infinity()) return lp;
  const GPPrediction pred = model.predict(theta);
  const double threshold = model.config().log_discrepancy ? std::log(eps) : eps;
  const double z = (threshold - pred.mean) / std::sqrt(pred.variance + model.noise_variance());
  return lp + normal_log_cdf(z);
}

double false_rejection_rate(const std::function<double(const ParamVector&)>& h, const DistanceFn& distance,
                            const PriorSpec& prior, int draws, RngStream& rng) {
  if (draws < 100) throw std::invalid_argument("false_rejection_rate: at least 100 draws are required");
  int below = 0;
  for (int j = 0; j < draws; ++j) {
    const ParamVector theta = prior.sample(rng);
    const double delta = distance(theta, rng);
    if (delta <= h(theta)) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(draws);
}

double false_rejection_rate(const GPModel& model, const DistanceFn& distance, const PriorSpec& prior, double a,
                            int draws, RngStream& rng) {
  return false_rejection_rate([&](const ParamVector& t) { return h_quantile(model, t, a); }, distance, prior, draws,
                              rng);
}

// ---------------------------------------------------------------------------
// persistence

namespace {

using nlohmann::json;

json to_array(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd from_array(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string GPModel::to_json() const {
  json j;
  j["format"] = "ejabc.gp";
  j["version"] = 1;
  j["config"] = {{"mean", config_.mean == GPMean::constant ? "constant" : "zero"},
                 {"log_discrepancy", config_.log_discrepancy},
                 {"standardize_inputs", config_.standardize_inputs},
                 {"restarts", config_.restarts},
                 {"max_evaluations", config_.max_evaluations},
                 {"noise_floor_ratio", config_.noise_floor_ratio},
                 {"max_hyperopt_points", config_.max_hyperopt_points}};
  j["covariance"] = "squared_exponential_ard";
  j["hyperparameters"] = {{"lengthscales", to_array(hyper_.lengthscales)},
                          {"signal_variance", hyper_.signal_variance},
                          {"noise_variance", hyper_.noise_variance}};
  j["standardization"] = {{"offset", to_array(offset_)}, {"scale", to_array(scale_)}};
  j["prior_mean"] = mean_;
  j["jitter"] = jitter_;
  j["log_marginal_likelihood"] = log_ml_;
  json rows = json::array();
  for (Eigen::Index i = 0; i < training_.size(); ++i) rows.push_back(to_array(training_.thetas.row(i).transpose()));
  j["training"] = {{"thetas", rows}, {"deltas", to_array(training_.deltas)}};
  return j.dump(1);
}

GPModel GPModel::from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "ejabc.gp") throw FormatError("not an ejabc GP model file");
  GPConfig cfg;
  const auto& c = j.at("config");
  cfg.mean = c.at("mean").get<std::string>() == "zero" ? GPMean::zero : GPMean::constant;
  cfg.log_discrepancy = c.at("log_discrepancy").get<bool>();
  cfg.standardize_inputs = c.at("standardize_inputs").get<bool>();
  cfg.restarts = c.at("restarts").get<int>();
  cfg.max_evaluations = c.at("max_evaluations").get<int>();
  cfg.noise_floor_ratio = c.at("noise_floor_ratio").get<double>();
  cfg.max_hyperopt_points = c.at("max_hyperopt_points").get<Eigen::Index>();
  GPHyperparameters h;
  h.lengthscales = from_array(j.at("hyperparameters").at("lengthscales"));
  h.signal_variance = j.at("hyperparameters").at("signal_variance").get<double>();
  h.noise_variance = j.at("hyperparameters").at("noise_variance").get<double>();
  DiscrepancySet train;
  const auto& rows = j.at("training").at("thetas");
  train.deltas = from_array(j.at("training").at("deltas"));
  train.thetas.resize(static_cast<Eigen::Index>(rows.size()), h.lengthscales.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::VectorXd r = from_array(rows[i]);
    if (r.size() != h.lengthscales.size()) throw FormatError("GP model file: training row dimension mismatch");
    train.thetas.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  cfg.fixed = h;
  return assemble_gp(std::move(train), cfg, from_array(j.at("standardization").at("offset")),
                     from_array(j.at("standardization").at("scale")), j.at("prior_mean").get<double>(), h);
}

void write_training_csv(const std::string& path, const DiscrepancySet& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  auto header = numbered_columns("theta", static_cast<std::size_t>(data.dim()));
  header.push_back("delta");
  write_csv_row(out, header);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < data.dim(); ++j) row.push_back(format_double(data.thetas(i, j)));
    row.push_back(format_double(data.deltas(i)));
    write_csv_row(out, row);
  }
}

DiscrepancySet read_training_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 2 || t.header.back() != "delta") throw FormatError(path + ": expected theta_1..theta_p,delta");
  const auto p = static_cast<Eigen::Index>(t.header.size() - 1);
  DiscrepancySet d;
  d.thetas.resize(static_cast<Eigen::Index>(t.rows.size()), p);
  d.deltas.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j)
      d.thetas(static_cast<Eigen::Index>(i), j) = parse_double(t.rows[i][static_cast<std::size_t>(j)]);
    d.deltas(static_cast<Eigen::Index>(i)) = parse_double(t.rows[i].back());
  }
  d.validate();
  return d;
}

}  // namespace ejabc
