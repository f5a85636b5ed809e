#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tpcausal/history.hpp"
#include "tpcausal/policy.hpp"
#include "tpcausal/random.hpp"

namespace tpcausal {

struct BaselineParams {
  double intercept = 0.0;
  double periodic_variance = 1.0;
  double periodic_lengthscale = 1.0;
  double period = 24.0;
  bool long_se = false;
  double long_lengthscale = 100.0;
};

struct ResponseParams {
  double shape_lengthscale = 0.5;
  double window = 3.0;
  double beta0 = 0.1;
  double beta1 = 0.1;
  double sigma0 = 0.1;
  double sigma1 = 0.1;
};

struct PatientOutcomeParams {
  BaselineParams baseline;
  double beta0 = 0.1;
  double beta1 = 0.1;
  double dose_scale(double mark) const { return beta0 + beta1 * mark; }
};

struct OutcomeModel {
  std::map<std::string, PatientOutcomeParams> patients;
  ResponseParams response;
  double noise_std = 0.3;

  const PatientOutcomeParams& patient(const std::string& id) const;
  void validate() const;
};

struct OutcomeData {
  std::string patient;
  std::vector<Treatment> treatments;
  std::vector<Outcome> observations;
};

double baseline_kernel(double t, double u, const BaselineParams& b);
double response_mean_kernel(std::span<const Treatment> treatments, double t, double u,
                            const PatientOutcomeParams& p, const ResponseParams& r);

struct GpPrediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // latent covariance
};

GpPrediction predict(const OutcomeModel& model, const std::string& patient,
                     std::span<const Treatment> treatments, std::span<const Outcome> observed,
                     std::span<const double> query);

// Prior joint draw at `times` plus noise. With `fixed_noise` the latent is
// held at its mean and the residuals are added verbatim.
std::vector<double> sample_trajectory(const OutcomeModel& model, const std::string& patient,
                                      std::span<const Treatment> treatments,
                                      std::span<const double> times, RandomStream* rng,
                                      std::span<const double> fixed_noise = {});

// Posterior given one patient's record; predicts the mean outcome under any
// treatment sequence using the posterior means of baseline and response shape.
class OutcomePosterior : public OutcomePredictor {
 public:
  OutcomePosterior(const OutcomeModel& model, const OutcomeData& data);

  double mean(double t, std::span<const Treatment> treatments) const override;
  double noise_std() const override { return noise_std_; }

  double baseline_mean(double t) const;
  double shape_mean(double delta) const;
  // y_j - E[f(t_j) | y]
  std::vector<double> residuals() const;
  const OutcomeData& data() const { return data_; }
  const PatientOutcomeParams& params() const { return params_; }

 private:
  PatientOutcomeParams params_;
  ResponseParams response_;
  double noise_std_;
  OutcomeData data_;
  Eigen::VectorXd alpha_;
  // response pairs (observation index, offset, scale)
  std::vector<std::tuple<long, double, double>> pairs_;
};

std::vector<double> outcome_noise_posterior(const OutcomeModel& model, const OutcomeData& data);

struct OutcomeFitOptions {
  int max_iters = 200;
};

struct OutcomeFitResult {
  OutcomeModel model;
  std::vector<double> trace;
};

// Initial values: per-patient intercept at the sample mean, spread split
// between baseline and noise.
OutcomeModel initial_outcome_model(std::span<const OutcomeData> data, const ResponseParams& r = {});

// Joint MAP over per-patient parameters and shared response parameters.
OutcomeFitResult fit_outcome_model(const OutcomeModel& init, std::span<const OutcomeData> data,
                                   const OutcomeFitOptions& opt = {});
double outcome_objective(const OutcomeModel& model, std::span<const OutcomeData> data);

// Constant-height response ablation: outcome = GP baseline + c * dose inside
// a fixed window after each treatment. c and the intercept come from GLS
// under the baseline covariance of `model`.
class ConstantResponsePosterior : public OutcomePredictor {
 public:
  ConstantResponsePosterior(const OutcomeModel& model, const OutcomeData& data);
  double mean(double t, std::span<const Treatment> treatments) const override;
  double noise_std() const override { return noise_std_; }
  double height() const { return height_; }

 private:
  BaselineParams baseline_;
  double window_;
  double noise_std_;
  double intercept_ = 0.0;
  double height_ = 0.0;
  std::vector<double> times_;
  Eigen::VectorXd alpha_;
};

void to_json(nlohmann::json& j, const OutcomeModel& m);
void from_json(const nlohmann::json& j, OutcomeModel& m);

}  // namespace tpcausal
