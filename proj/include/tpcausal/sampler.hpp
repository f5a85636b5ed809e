#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "tpcausal/random.hpp"

namespace tpcausal {

inline constexpr double kDefaultStep = 0.25;
inline constexpr int kBoundGrid = 64;
inline constexpr double kBoundSafety = 1.2;

// Conditional intensity over a history that grows as the sampler accepts
// points. Exogenous history changes (e.g. outcome measurements) are realised
// through advance() and announced through horizon().
class PointProcess {
 public:
  virtual ~PointProcess() = default;
  // Rate at t given the current history restricted to events before t.
  virtual double intensity(double t) const = 0;
  // Time from t to the next exogenous history change, or a default step.
  virtual double horizon(double /*t*/) const { return kDefaultStep; }
  // Realise exogenous events with time <= t. Monotone and idempotent.
  virtual void advance(double /*t*/) {}
  virtual void accept(double /*t*/) {}
};

// Intensity given by a function of (t, points before t).
class FunctionProcess : public PointProcess {
 public:
  using Fn = std::function<double(double, std::span<const double>)>;
  explicit FunctionProcess(Fn f, std::vector<double> initial = {}, double step = kDefaultStep);
  double intensity(double t) const override;
  double horizon(double) const override { return step_; }
  void accept(double t) override;
  const std::vector<double>& points() const { return points_; }

 private:
  Fn f_;
  std::vector<double> points_;
  double step_;
};

enum class CandidateKind { Accepted, Rejected };

struct NoiseCandidate {
  double t;
  CandidateKind kind;
  double lo;  // acceptance-uniform posterior interval (lo, hi)
  double hi;
  double u;   // the uniform on the rate scale
  double bound;
};

struct NoiseRecord {
  std::vector<NoiseCandidate> candidates;
  std::vector<double> rejected_times() const;
  std::vector<double> accepted_times() const;
};

double upper_bound(const PointProcess& p, double a, double b);

struct SampleResult {
  std::vector<double> points;
  NoiseRecord noise;
};

SampleResult sample_ogata(double t1, double t2, PointProcess& p, RandomStream& rng);

// Forward thinning driven by a recorded noise sequence: accept iff u <= rate.
std::vector<double> replay(const NoiseRecord& record, PointProcess& p);

enum class NoiseMode { Posterior, Prior };

NoiseRecord abduce_noise(PointProcess& obs, std::span<const double> observed, double t1, double t2,
                         RandomStream& rng);

// Observed points and rejected points of the observed process are replayed
// against the counterfactual intensity. Prior mode redraws every acceptance
// uniform from its prior instead of the posterior.
SampleResult sample_counterfactual(PointProcess& obs, PointProcess& cf,
                                   std::span<const double> observed, double t1, double t2,
                                   RandomStream& rng, NoiseMode mode = NoiseMode::Posterior);

// One shared (u_ub, u_a) pair per candidate across all processes. Only the
// first `leaders` processes (0 = all) set the interval and the bound; the
// rest follow the same candidates with their rate effectively capped at the
// bound, so adding followers never changes what the leaders produce.
std::vector<std::vector<double>> sample_fixed_noise(double t1, double t2,
                                                    std::span<PointProcess* const> processes,
                                                    RandomStream& rng, std::size_t leaders = 0);

void write_noise_record(std::ostream& os, const NoiseRecord& record);
NoiseRecord read_noise_record(std::istream& is);

}  // namespace tpcausal
