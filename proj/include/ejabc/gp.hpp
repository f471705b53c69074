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

#ifndef EJABC_GP_HPP_
#define EJABC_GP_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ejabc/prior.hpp"
#include "ejabc/rng.hpp"
#include "ejabc/types.hpp"

namespace ejabc {

/// Training pairs (theta_i, Delta_i), one row of `thetas` per record.
struct DiscrepancySet {
  Eigen::MatrixXd thetas;  // s x p
  Eigen::VectorXd deltas;  // s

  Eigen::Index size() const { return deltas.size(); }
  Eigen::Index dim() const { return thetas.cols(); }

  void add(const ParamVector& theta, double delta);
  /// Throws std::invalid_argument on inconsistent dimensions or negative / non-finite deltas.
  void validate() const;
  DiscrepancySet head(Eigen::Index n) const;
};

/// Squared-exponential (ARD) covariance between the rows of a and b.
template <typename DerivedA, typename DerivedB, typename DerivedL>
MatrixX<typename DerivedA::Scalar> squared_exponential(const Eigen::MatrixBase<DerivedA>& a,
                                                       const Eigen::MatrixBase<DerivedB>& b,
                                                       const Eigen::MatrixBase<DerivedL>& lengthscales,
                                                       typename DerivedA::Scalar signal_variance) {
  using Scalar = typename DerivedA::Scalar;
  const auto inv = lengthscales.cwiseInverse().eval();
  const MatrixX<Scalar> as = a * inv.asDiagonal();
  const MatrixX<Scalar> bs = b * inv.asDiagonal();
  MatrixX<Scalar> sq = (-2.0 * as * bs.transpose()).eval();
  sq.colwise() += as.rowwise().squaredNorm();
  sq.rowwise() += bs.rowwise().squaredNorm().transpose();
  return signal_variance * (-0.5 * sq.cwiseMax(Scalar(0))).array().exp().matrix();
}

enum class GPMean { constant, zero };

/// Hyperparameters in standardized input units.
struct GPHyperparameters {
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-2;
};

struct GPConfig {
  GPMean mean = GPMean::constant;
  bool log_discrepancy = false;
  bool standardize_inputs = true;
  int restarts = 5;
  int max_evaluations = 400;  // per restart
  /// Noise variance is bounded below by this fraction of the target variance.
  double noise_floor_ratio = 1e-8;
  /// Hyperparameter search runs on a random subset of at most this many records.
  Eigen::Index max_hyperopt_points = 500;
  /// Pins the noise variance during the search (the floor does not apply).
  std::optional<double> fixed_noise_variance;
  /// When set, hyperparameter search is skipped.
  std::optional<GPHyperparameters> fixed;
};

struct GPPrediction {
  double mean;
  double variance;  // latent-function variance, >= 0
};

/// Fitted Gaussian-process discrepancy surrogate. Immutable after fit.
class GPModel {
 public:
  GPPrediction predict(const ParamVector& theta) const;
  /// Batched prediction, one row of `thetas` per query.
  void predict(const Eigen::MatrixXd& thetas, Eigen::VectorXd& mean, Eigen::VectorXd& variance) const;

  const GPConfig& config() const { return config_; }
  const GPHyperparameters& hyperparameters() const { return hyper_; }
  double noise_variance() const { return hyper_.noise_variance; }
  double prior_mean() const { return mean_; }
  double log_marginal_likelihood() const { return log_ml_; }
  double jitter() const { return jitter_; }
  Eigen::Index dim() const { return x_.cols(); }
  Eigen::Index size() const { return x_.rows(); }
  const DiscrepancySet& training() const { return training_; }
  const Eigen::VectorXd& input_offset() const { return offset_; }
  const Eigen::VectorXd& input_scale() const { return scale_; }

  std::string to_json() const;
  static GPModel from_json(const std::string& text);

 private:
  friend GPModel fit_gp(const DiscrepancySet&, const GPConfig&, RngStream&);
  friend GPModel assemble_gp(DiscrepancySet, GPConfig, Eigen::VectorXd, Eigen::VectorXd, double,
                             GPHyperparameters);

  GPConfig config_;
  DiscrepancySet training_;
  Eigen::VectorXd offset_;
  Eigen::VectorXd scale_;
  Eigen::MatrixXd x_;  // standardized inputs
  Eigen::VectorXd y_;  // targets (log if configured)
  double mean_ = 0.0;
  GPHyperparameters hyper_;
  double jitter_ = 0.0;
  Eigen::MatrixXd chol_;  // lower factor of K + (noise + jitter) I
  Eigen::VectorXd alpha_;
  double log_ml_ = 0.0;
};

/// Fits the surrogate; hyperparameters maximize the log marginal likelihood
/// over cfg.restarts Nelder-Mead searches on log-hyperparameters.
GPModel fit_gp(const DiscrepancySet& train, const GPConfig& cfg, RngStream& rng);

/// Builds the model for given hyperparameters and standardization constants.
GPModel assemble_gp(DiscrepancySet train, GPConfig cfg, Eigen::VectorXd offset, Eigen::VectorXd scale, double mean,
                    GPHyperparameters hyper);

/// Lower a-quantile of the predictive distribution of the discrepancy,
/// mu + Phi^{-1}(a) sqrt(v + sigma^2), mapped back through exp when the model
/// is fitted on log-discrepancies.
double h_quantile(const GPModel& model, const ParamVector& theta, double a);

/// log prior(theta) + log Phi((eps - mu) / sqrt(v + sigma^2)).
double gp_abc_logdensity(const GPModel& model, const ParamVector& theta, double eps, const PriorSpec& prior);

/// Callable theta -> Delta, failures mapped to +inf by the caller.
using DistanceFn = std::function<double(const ParamVector&, RngStream&)>;

/// Monte Carlo estimate over M prior draws of P(Delta(x, y) <= h(theta)).
double false_rejection_rate(const std::function<double(const ParamVector&)>& h, const DistanceFn& distance,
                            const PriorSpec& prior, int draws, RngStream& rng);
double false_rejection_rate(const GPModel& model, const DistanceFn& distance, const PriorSpec& prior, double a,
                            int draws, RngStream& rng);

void write_training_csv(const std::string& path, const DiscrepancySet& data);
DiscrepancySet read_training_csv(const std::string& path);

}  // namespace ejabc

#endif  // EJABC_GP_HPP_
