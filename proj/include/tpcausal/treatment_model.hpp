#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tpcausal/history.hpp"
#include "tpcausal/kernels.hpp"
#include "tpcausal/mark_model.hpp"
#include "tpcausal/policy.hpp"

namespace tpcausal {

enum class Component { Baseline = 0, Treatment = 1, Outcome = 2 };

struct TreatmentConfig {
  bool use_baseline = true;
  bool use_treatment = true;
  bool use_outcome = true;
  int q_a = 1;
  int q_o = 1;
  double beta0 = 0.1;
  double gamma_b = 0.1, gamma_a = 0.05, gamma_o = 0.15;
  double ell_b = 7.0, ell_a = 1.0, ell_ot = 100.0, ell_om = 2.5;
  bool treatment_use_mark = false;
  double ell_am = 100.0;  // only read when treatment_use_mark
  bool outcome_use_mark = true;
  int num_inducing = 20;  // per active component slot
  double day_length = 24.0;
  double jitter = kDefaultJitter;

  // "b", "ba", "bo", "ao", "bao"
  static TreatmentConfig variant(std::string_view name);
  std::string variant_name() const;
  void validate() const;
  int treatment_slots() const { return use_treatment ? q_a : 0; }
  int outcome_slots() const { return use_outcome ? q_o : 0; }
  TreatmentKernelParams kernel_params() const;
};

struct InducingPoint {
  Component component = Component::Baseline;
  int slot = 0;
  double time = 0.0;  // time of day for the baseline, relative time for slots
  double mark = 0.0;
};

struct VariationalState {
  std::vector<InducingPoint> z;
  Eigen::VectorXd mean;      // m
  Eigen::MatrixXd cov_chol;  // lower Cholesky factor of S
  Eigen::MatrixXd cov() const { return cov_chol * cov_chol.transpose(); }
};

struct LatentMoments {
  double mean;
  double variance;
};

RegressiveInput retrieve_inputs(const EventHistory& history, double tau,
                                const TreatmentConfig& config);

class TreatmentModel : public TreatmentPolicy {
 public:
  TreatmentModel(TreatmentConfig config, VariationalState state, MarkModel marks,
                 std::string label);

  const TreatmentConfig& config() const { return config_; }
  const VariationalState& state() const { return state_; }
  const MarkModel& mark_model() const { return marks_; }
  const std::string& label() const override { return label_; }
  std::size_t num_inducing() const { return state_.z.size(); }

  const Eigen::MatrixXd& kzz() const { return kzz_; }
  const Eigen::MatrixXd& kzz_chol() const { return lk_; }
  const Eigen::VectorXd& whitened_mean() const { return mw_; }
  const Eigen::MatrixXd& whitened_chol() const { return lw_; }

  Eigen::VectorXd cross_covariance(const RegressiveInput& x) const;
  double prior_variance(const RegressiveInput& x) const;
  LatentMoments latent_moments(const RegressiveInput& x) const;
  double intensity_at(const RegressiveInput& x) const;
  double intensity(const EventHistory& history, double t) const override;
  double sample_mark(double t, RandomStream& rng) const override;

  // Same model with new whitened variational parameters.
  TreatmentModel with_whitened(const Eigen::VectorXd& mw, const Eigen::MatrixXd& lw) const;

 private:
  TreatmentModel(TreatmentConfig config, VariationalState state, MarkModel marks,
                 std::string label, Eigen::MatrixXd kzz, Eigen::MatrixXd lk);
  void derive_whitened();

  TreatmentConfig config_;
  VariationalState state_;
  MarkModel marks_;
  std::string label_;
  Eigen::MatrixXd kzz_, lk_;
  Eigen::VectorXd mw_;
  Eigen::MatrixXd lw_;
};

double inducing_kernel(const InducingPoint& a, const InducingPoint& b, const TreatmentConfig& c);
Eigen::MatrixXd inducing_gram(const std::vector<InducingPoint>& z, const TreatmentConfig& c);

// Inducing inputs on regular grids; relative-time ranges from the 95th
// percentile of observed gaps.
std::vector<InducingPoint> place_inducing(const TreatmentConfig& config,
                                          std::span<const Trajectory> data);

// q(u) = p(u): m = 0, S = K_zz.
TreatmentModel prior_model(const TreatmentConfig& config, std::vector<InducingPoint> z,
                           MarkModel marks, std::string label);

Eigen::VectorXd phi_vector(const TreatmentModel& model, double a, double b,
                           const EventHistory& frozen);
Eigen::MatrixXd psi_matrix(const TreatmentModel& model, double a, double b,
                           const EventHistory& frozen);

namespace reference {
Eigen::MatrixXd psi_matrix(const TreatmentModel& model, double a, double b,
                           const EventHistory& frozen);
}

struct ElboTerms {
  double data = 0.0;
  double integral = 0.0;
  double kl = 0.0;
  double total() const { return data - integral - kl; }
};

ElboTerms elbo_terms(const TreatmentModel& model, std::span<const Trajectory> data);
double elbo(const TreatmentModel& model, std::span<const Trajectory> data);
double test_log_likelihood_bound(const TreatmentModel& model, const Trajectory& heldout);

struct TreatmentFitOptions {
  int max_iters = 300;
  double step_size = 1.0;
  std::uint64_t seed = 0;  // unused by the deterministic optimizer; kept for provenance
};

struct TreatmentFitResult {
  TreatmentModel model;
  std::vector<double> trace;
};

TreatmentFitResult fit_treatment_model(const TreatmentModel& init,
                                       std::span<const Trajectory> data,
                                       const TreatmentFitOptions& opt);

// Config-driven convenience: place inducing points, fit marks, optimise.
TreatmentModel train_treatment_model(const TreatmentConfig& config,
                                     std::span<const Trajectory> data, std::string label,
                                     const TreatmentFitOptions& opt = {});

// Homogeneous Poisson ablation with rate N / total observed time.
class ConstantRatePolicy : public TreatmentPolicy {
 public:
  ConstantRatePolicy(double rate, MarkModel marks, std::string label)
      : rate_(rate), marks_(std::move(marks)), label_(std::move(label)) {}
  double rate() const { return rate_; }
  double intensity(const EventHistory&, double) const override { return rate_; }
  double sample_mark(double t, RandomStream& rng) const override { return marks_.sample(t, rng); }
  const std::string& label() const override { return label_; }

 private:
  double rate_;
  MarkModel marks_;
  std::string label_;
};

ConstantRatePolicy fit_constant_rate(std::span<const Trajectory> data, std::string label);

void to_json(nlohmann::json& j, const TreatmentConfig& c);
void from_json(const nlohmann::json& j, TreatmentConfig& c);
nlohmann::json treatment_model_to_json(const TreatmentModel& m);
TreatmentModel treatment_model_from_json(const nlohmann::json& j);

}  // namespace tpcausal
