#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tpcausal/history.hpp"
#include "tpcausal/policy.hpp"
#include "tpcausal/random.hpp"
#include "tpcausal/sampler.hpp"

namespace tpcausal {

inline constexpr int kDefaultRollouts = 100;

// Fitted joint model for one patient.
struct PatientModel {
  const TreatmentPolicy* policy = nullptr;  // the observed mechanism
  const OutcomePredictor* outcome = nullptr;
};

// How outcomes at query times get their noise.
struct FreshNoise {
  RandomStream stream;  // value k uses stream.child(k)
};
struct ObservedNoise {
  // Observed outcomes at the query times and the observed treatments they
  // were measured under; the counterfactual outcome is
  // y + mean(cf treatments) - mean(observed treatments).
  std::vector<Outcome> outcomes;
  std::vector<Treatment> treatments;
};

// Treatment process whose history grows during sampling; outcomes are
// realised at the query times from the outcome predictor.
class JointProcess : public PointProcess {
 public:
  JointProcess(const TreatmentPolicy& policy, const OutcomePredictor& outcome, EventHistory context,
               std::vector<double> query_times, std::variant<FreshNoise, ObservedNoise> noise,
               RandomStream mark_stream);

  double intensity(double t) const override;
  double horizon(double t) const override;
  void advance(double t) override;
  void accept(double t) override;

  // Observed marks to reuse for points accepted at exactly these times.
  void retain_marks(std::vector<Treatment> observed) { retained_ = std::move(observed); }
  const EventHistory& history() const { return history_; }

  // Evaluation log for instrumentation: (t, number of treatments before t,
  // number of outcomes before t).
  struct Evaluation {
    double t;
    std::size_t treatments_before;
    std::size_t outcomes_before;
  };
  void enable_log(bool on) { log_on_ = on; }
  const std::vector<Evaluation>& log() const { return log_; }

 private:
  double realise(std::size_t k, double q) const;

  const TreatmentPolicy& policy_;
  const OutcomePredictor& outcome_;
  EventHistory history_;
  std::vector<double> queries_;
  std::size_t next_query_ = 0;
  std::variant<FreshNoise, ObservedNoise> noise_;
  RandomStream marks_;
  std::vector<Treatment> retained_;
  bool log_on_ = false;
  mutable std::vector<Evaluation> log_;
};

// Treatment intensity over a fixed, fully observed history.
class HistoryProcess : public PointProcess {
 public:
  HistoryProcess(const TreatmentPolicy& policy, EventHistory history)
      : policy_(policy), history_(std::move(history)) {}
  double intensity(double t) const override { return policy_.intensity(history_, t); }
  double horizon(double t) const override;

 private:
  const TreatmentPolicy& policy_;
  EventHistory history_;
};

struct Observational {};
struct Interventional {
  const TreatmentPolicy* policy = nullptr;
};
struct Counterfactual {
  const TreatmentPolicy* policy = nullptr;
  // Observed record over the query window; required.
  std::optional<EventHistory> observed;
};
using ScmMode = std::variant<Observational, Interventional, Counterfactual>;

struct QuerySpec {
  std::string patient;
  double start = 0.0;
  double end = 24.0;
  std::vector<double> query_times;
  ScmMode mode = Observational{};
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
};

struct QueryTrajectory {
  std::vector<Treatment> treatments;  // inside (start, end]
  std::vector<Outcome> outcomes;      // at the query times
  NoiseRecord noise;                  // counterfactual mode only
};

// history: events up to spec.start; later events are rejected.
QueryTrajectory rollout(const PatientModel& model, const EventHistory& history,
                        const QuerySpec& spec);

struct QueryResult {
  std::vector<QueryTrajectory> samples;
  std::vector<double> query_times;
  std::vector<double> mean;
  std::vector<double> lo;  // 5% quantile
  std::vector<double> hi;  // 95% quantile
};

QueryResult summarise(std::vector<QueryTrajectory> samples, std::vector<double> query_times);

QueryResult policy_intervention_query(const PatientModel& model, const std::string& patient,
                                      const EventHistory& history, double start, double horizon,
                                      std::vector<double> query_times,
                                      const TreatmentPolicy& new_policy, int n_samples,
                                      std::uint64_t seed);

// Observed record covers [start, end]; query times are its outcome times.
QueryResult policy_counterfactual_query(const PatientModel& model, const std::string& patient,
                                        const EventHistory& observed, double start, double end,
                                        const TreatmentPolicy& new_policy, int n_samples,
                                        std::uint64_t seed);

void write_query_csv(std::ostream& os, const QueryResult& r);
void write_plot_csv(std::ostream& os, const QueryResult& r);
nlohmann::json query_summary_json(const QueryResult& r);

std::uint64_t hash_id(const std::string& s);

}  // namespace tpcausal
