#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpcausal/causal_engine.hpp"
#include "tpcausal/data_io.hpp"
#include "tpcausal/outcome_model.hpp"
#include "tpcausal/treatment_model.hpp"

namespace tpcausal {

struct RosterEntry {
  std::string treatment = "gp_pp";      // gp_pp | nhpp | constant_rate | ground_truth
  std::string response = "gp_response";  // gp_response | constant_response | ground_truth
  std::string name() const { return treatment + "+" + response; }
};

struct ExperimentConfig {
  int n_patients = 10;
  int n_policies = 2;
  int n_groups = 3;
  double day_length = 24.0;
  int grid_intervals = 40;
  int horizon_days = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<RosterEntry> roster{{"gp_pp", "gp_response"},
                                  {"nhpp", "gp_response"},
                                  {"constant_rate", "gp_response"},
                                  {"gp_pp", "constant_response"}};
  std::string gp_pp_variant = "ao";
  std::string nhpp_variant = "b";
  std::vector<std::string> tll_variants{"b", "ba", "bo", "ao", "bao"};
  int treatment_iters = 300;
  int outcome_iters = 200;
  int num_inducing = 20;
  double outcome_noise_std = 0.25;
  // Counterfactual-query estimates average this many rollouts per mode.
  int cf_rollouts = 20;

  void validate() const;
  static ExperimentConfig paper_scale();
  std::vector<double> grid(int day) const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// ---------------------------------------------------------------- simulator

struct GroupOutcome {
  double intercept = 5.5;
  double amplitude = 0.4;  // daily harmonic
  double phase = 0.0;      // hours
  double beta0 = 0.3;
  double beta1 = 0.03;
  double peak = 1.0;   // response peak delay, hours
  double width = 0.5;  // response sd, hours
  double window = 3.0;
};

// Ground-truth outcome: parametric baseline plus Gaussian-bump responses.
class SimulatorOutcome : public OutcomePredictor {
 public:
  SimulatorOutcome(GroupOutcome g, double noise_std, double day_length = 24.0)
      : g_(g), noise_std_(noise_std), day_length_(day_length) {}
  double baseline(double t) const;
  double response(double delta, double dose) const;
  double mean(double t, std::span<const Treatment> treatments) const override;
  double noise_std() const override { return noise_std_; }
  const GroupOutcome& params() const { return g_; }

 private:
  GroupOutcome g_;
  double noise_std_;
  double day_length_;
};

// Square-root intensity targets of a ground-truth policy.
struct PolicyShape {
  double base = 0.5;          // sqrt rate without recent treatments
  double refractory = 1.5;    // hours of suppression after a treatment
  double bump_height = 0.3;   // extra sqrt rate ...
  double bump_center = 3.5;   // ... centred this long after a treatment
  double bump_width = 1.0;
  double glucose_slope = 0.005;  // per outcome unit, around glucose_ref
  double glucose_ref = 6.0;
  double mark_mean = 40.0;
  double mark_sd = 8.0;
};

TreatmentModel make_ground_truth_policy(const PolicyShape& shape, const std::string& label,
                                        int num_inducing = 20, double day_length = 24.0);

struct PatientSpec {
  std::string id;
  int own_policy = 0;  // index into Simulator::policies
  int group = 0;
};

struct Simulator {
  std::vector<TreatmentModel> policies;  // A, B
  std::vector<SimulatorOutcome> groups;
  std::vector<PatientSpec> patients;
  double day_length = 24.0;
  int switched(int p) const { return static_cast<int>(policies.size()) - 1 - p; }
};

Simulator build_simulator(const ExperimentConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------- datasets

struct GeneratedData {
  std::vector<PatientRecord> observational;       // day 1, own policy
  std::vector<PatientRecord> observational_next;  // day 1 + next days, own policy
  std::vector<PatientRecord> interventional;      // day 1 + next days, switched policy
  std::vector<PatientRecord> counterfactual;      // day 1 replayed, switched policy
};

GeneratedData generate_datasets(const Simulator& sim, const ExperimentConfig& config,
                                std::uint64_t seed);

// ---------------------------------------------------------------- evaluation

// A roster model fitted on the observational split.
struct FittedModel {
  RosterEntry entry;
  std::vector<std::shared_ptr<const TreatmentPolicy>> policies;  // per simulator policy
  std::vector<std::shared_ptr<const OutcomePredictor>> outcomes;  // per patient
};

FittedModel fit_roster_model(const RosterEntry& entry, const Simulator& sim,
                             const std::vector<PatientRecord>& observational,
                             const ExperimentConfig& config);

// Mean squared difference over matching grids.
double evaluate_mse(const std::vector<std::vector<Outcome>>& truth,
                    const std::vector<std::vector<Outcome>>& estimate);

enum class QueryKind { Observational, Interventional, Counterfactual };
enum class ModelMode { Obs, Int, Cf };
std::string to_string(QueryKind q);
std::string to_string(ModelMode m);

struct SeedEvaluation {
  std::uint64_t seed = 0;
  // (model name, mode, query) -> MSE
  std::map<std::tuple<std::string, std::string, std::string>, double> mse;
  std::map<std::string, std::string> failures;  // model name -> message
  std::map<std::string, double> tll;            // treatment variant -> mean held-out TLL
  std::vector<std::string> anomalies;
};

SeedEvaluation evaluate_seed(const ExperimentConfig& config, std::uint64_t seed,
                             bool with_tll = true);

struct BenchmarkRow {
  std::string model, mode, query;
  double mean = 0.0, sd = 0.0;
  std::vector<double> values;
};
struct TllRow {
  std::string variant;
  double mean = 0.0, sd = 0.0;
  std::vector<double> values;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> mse;
  std::vector<TllRow> tll;
  std::vector<SeedEvaluation> seeds;
  std::string repetition_note;
};

BenchmarkResult run_benchmark(const ExperimentConfig& config);
void write_benchmark_csv(std::ostream& os, const BenchmarkResult& r);
void write_tll_csv(std::ostream& os, const BenchmarkResult& r);
nlohmann::json benchmark_json(const BenchmarkResult& r);

// Held-out TLL experiment: per-patient fits of `variant` on `train_days`
// days of ground-truth policy data, evaluated on the next day.
struct TllExperiment {
  int n_patients = 5;
  int train_days = 2;
  int num_inducing = 20;
  int iters = 300;
};
std::map<std::string, double> heldout_tll(const TllExperiment& e,
                                          const std::vector<std::string>& variants,
                                          std::uint64_t seed);

// Sample days of joint ground-truth data under one policy.
PatientRecord simulate_patient(const Simulator& sim, const PatientSpec& patient, int policy,
                               int days, const ExperimentConfig& config, std::uint64_t seed);

}  // namespace tpcausal
