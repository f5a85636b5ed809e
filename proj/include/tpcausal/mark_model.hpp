#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tpcausal/history.hpp"
#include "tpcausal/kernels.hpp"
#include "tpcausal/random.hpp"

namespace tpcausal {

// GP regression of dosage on time of day.
class MarkModel {
 public:
  MarkModel() = default;
  MarkModel(KernelSpec kernel, double noise_variance, double prior_mean,
            std::vector<std::pair<double, double>> training, double day_length = 24.0);

  const KernelSpec& kernel() const { return kernel_; }
  double noise_variance() const { return noise_variance_; }
  double prior_mean() const { return prior_mean_; }
  double day_length() const { return day_length_; }
  const std::vector<std::pair<double, double>>& training() const { return training_; }
  bool empty() const { return training_.empty(); }

  // Predictive mean and variance (latent variance + noise) at absolute time tau.
  std::pair<double, double> predict(double tau) const;
  double sample(double tau, RandomStream& rng) const;

 private:
  KernelSpec kernel_{kern::Constant{1.0}};
  double noise_variance_ = 1.0;
  double prior_mean_ = 0.0;
  double day_length_ = 24.0;
  std::vector<std::pair<double, double>> training_;  // (time of day, mark)
  std::vector<KernelPoint> points_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

MarkModel fit_mark_model(std::span<const Trajectory> data, double day_length = 24.0);

std::pair<double, double> mark_predict(const MarkModel& m, double tau);
double mark_sample(const MarkModel& m, double tau, RandomStream& rng);

void to_json(nlohmann::json& j, const MarkModel& m);
void from_json(const nlohmann::json& j, MarkModel& m);

}  // namespace tpcausal
