#include "tpcausal/mark_model.hpp"

#include <cmath>

#include "tpcausal/errors.hpp"

namespace tpcausal {

MarkModel::MarkModel(KernelSpec kernel, double noise_variance, double prior_mean,
                     std::vector<std::pair<double, double>> training, double day_length)
    : kernel_(std::move(kernel)),
      noise_variance_(noise_variance),
      prior_mean_(prior_mean),
      day_length_(day_length),
      training_(std::move(training)) {
  validate(kernel_);
  if (!(noise_variance_ > 0.0)) throw InvalidArgument("mark noise variance must be > 0");
  if (training_.empty()) return;
  points_.reserve(training_.size());
  Eigen::VectorXd y(training_.size());
  for (std::size_t i = 0; i < training_.size(); ++i) {
    points_.push_back({training_[i].first, 0.0, 0.0});
    y[i] = training_[i].second - prior_mean_;
  }
  Eigen::MatrixXd k = gram(points_, kernel_, 0.0);
  k.diagonal().array() += noise_variance_;
  llt_.compute(k);
  if (llt_.info() != Eigen::Success) throw NumericalFailure("mark model: Cholesky failed");
  alpha_ = llt_.solve(y);
}

std::pair<double, double> MarkModel::predict(double tau) const {
  if (training_.empty()) throw InvalidState("mark model has no training data");
  KernelPoint q{time_of_day(tau, day_length_), 0.0, 0.0};
  Eigen::VectorXd ks(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) ks[i] = evaluate(kernel_, q, points_[i]);
  double mean = prior_mean_ + ks.dot(alpha_);
  Eigen::VectorXd v = llt_.matrixL().solve(ks);
  double var = evaluate(kernel_, q, q) - v.squaredNorm();
  return {mean, std::max(var, 0.0) + noise_variance_};
}

double MarkModel::sample(double tau, RandomStream& rng) const {
  auto [mean, var] = predict(tau);
  return mean + std::sqrt(var) * rng.normal();
}

std::pair<double, double> mark_predict(const MarkModel& m, double tau) { return m.predict(tau); }
double mark_sample(const MarkModel& m, double tau, RandomStream& rng) { return m.sample(tau, rng); }

MarkModel fit_mark_model(std::span<const Trajectory> data, double day_length) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& tr : data)
    for (const auto& a : tr.history.treatments)
      if (a.time >= tr.start && a.time <= tr.end)
        pairs.emplace_back(time_of_day(a.time, day_length), a.dose);
  if (pairs.empty()) throw InvalidArgument("mark model: no treatments to fit");
  double mean = 0.0;
  for (const auto& p : pairs) mean += p.second;
  mean /= static_cast<double>(pairs.size());
  double var = 0.0;
  for (const auto& p : pairs) var += (p.second - mean) * (p.second - mean);
  var = pairs.size() > 1 ? var / static_cast<double>(pairs.size() - 1) : 0.0;
  if (var < 1e-6) var = 1.0;
  // Half the spread explained by time of day, half by noise.
  KernelSpec k{kern::Periodic{0.5 * var, 1.0, day_length}};
  return MarkModel(k, 0.5 * var, mean, std::move(pairs), day_length);
}

void to_json(nlohmann::json& j, const MarkModel& m) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.training()) pairs.push_back({p.first, p.second});
  j = {{"kernel", m.kernel()},
       {"noise_variance", m.noise_variance()},
       {"prior_mean", m.prior_mean()},
       {"day_length", m.day_length()},
       {"training", pairs}};
}

void from_json(const nlohmann::json& j, MarkModel& m) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : j.at("training")) pairs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  m = MarkModel(j.at("kernel").get<KernelSpec>(), j.at("noise_variance").get<double>(),
                j.at("prior_mean").get<double>(), std::move(pairs), j.value("day_length", 24.0));
}

}  // namespace tpcausal
