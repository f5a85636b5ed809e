#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tpcausal/causal_engine.hpp"
#include "tpcausal/errors.hpp"

using namespace tpcausal;

namespace {

// Meal-like policy: daily rhythm, damped for two hours after each treatment
// and raised when the last outcome was low.
class ToyPolicy : public TreatmentPolicy {
 public:
  ToyPolicy(double base, std::string label, bool history_dependent = true)
      : base_(base), label_(std::move(label)), dep_(history_dependent) {}
  double intensity(const EventHistory& h, double t) const override {
    double v = base_ * (1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * (t - 6.0) / 24.0));
    if (!dep_) return v;
    for (auto it = h.treatments.rbegin(); it != h.treatments.rend(); ++it)
      if (it->time < t) {
        if (t - it->time < 2.0) v *= 0.3;
        break;
      }
    for (auto it = h.outcomes.rbegin(); it != h.outcomes.rend(); ++it)
      if (it->time < t) {
        if (it->value < 5.0) v *= 1.5;
        break;
      }
    return v;
  }
  double sample_mark(double, RandomStream& r) const override { return 20.0 + 40.0 * r.uniform(); }
  const std::string& label() const override { return label_; }

 private:
  double base_;
  std::string label_;
  bool dep_;
};

class Scaled : public TreatmentPolicy {
 public:
  Scaled(const TreatmentPolicy& p, double k) : p_(p), k_(k) {}
  double intensity(const EventHistory& h, double t) const override { return k_ * p_.intensity(h, t); }
  double sample_mark(double t, RandomStream& r) const override { return p_.sample_mark(t, r); }
  const std::string& label() const override { return p_.label(); }

 private:
  const TreatmentPolicy& p_;
  double k_;
};

// Baseline rhythm plus a dose-scaled bump on [0, 3] h after each treatment.
class ToyOutcome : public OutcomePredictor {
 public:
  explicit ToyOutcome(double noise) : noise_(noise) {}
  static double baseline(double t) { return 5.2 + 0.4 * std::cos(2.0 * std::numbers::pi * t / 24.0); }
  double mean(double t, std::span<const Treatment> a) const override {
    double v = baseline(t);
    for (const auto& x : a) {
      double d = t - x.time;
      if (d >= 0.0 && d <= 3.0) v += 0.03 * x.dose * std::sin(std::numbers::pi * d / 3.0);
    }
    return v;
  }
  double noise_std() const override { return noise_; }

 private:
  double noise_;
};

std::vector<double> grid(double a, double b, double step) {
  std::vector<double> q;
  for (double t = a + step; t <= b + 1e-9; t += step) q.push_back(t);
  return q;
}

// One observed day from the observational model.
EventHistory observed_day(const PatientModel& m, double start, double end, std::uint64_t seed) {
  QuerySpec s;
  s.patient = "obs";
  s.start = start;
  s.end = end;
  s.query_times = grid(start, end, 0.5);
  s.seed = seed;
  auto tr = rollout(m, {}, s);
  return {tr.treatments, tr.outcomes};
}

double mean_outcome(const QueryTrajectory& t) {
  double s = 0.0;
  for (const auto& o : t.outcomes) s += o.value;
  return s / static_cast<double>(t.outcomes.size());
}

}  // namespace

TEST_CASE("intervening with the observed policy leaves the distribution unchanged") {
  ToyPolicy p(0.25, "A");
  ToyPolicy same(0.25, "A-again");
  ToyOutcome y(0.2);
  PatientModel m{&p, &y};
  std::vector<double> counts_obs, counts_int, means_obs, means_int;
  for (std::uint64_t i = 0; i < 500; ++i) {
    QuerySpec s;
    s.patient = "x";
    s.end = 24.0;
    s.query_times = grid(0.0, 24.0, 1.0);
    s.seed = 1;
    s.sample = i;
    auto a = rollout(m, {}, s);
    s.seed = 2;
    s.mode = Interventional{&same};
    auto b = rollout(m, {}, s);
    counts_obs.push_back(static_cast<double>(a.treatments.size()));
    counts_int.push_back(static_cast<double>(b.treatments.size()));
    means_obs.push_back(mean_outcome(a));
    means_int.push_back(mean_outcome(b));
  }
  CHECK(oracle::welch_p(counts_obs, counts_int) > 0.01);
  CHECK(oracle::welch_p(means_obs, means_int) > 0.01);
}

TEST_CASE("intervening with a different policy is not conditioning") {
  ToyPolicy a(0.3, "A"), b(0.12, "B");
  ToyOutcome y(0.2);
  PatientModel m{&a, &y};
  std::vector<double> ca, cb;
  for (std::uint64_t i = 0; i < 200; ++i) {
    QuerySpec s;
    s.patient = "x";
    s.query_times = grid(0.0, 24.0, 1.0);
    s.sample = i;
    ca.push_back(static_cast<double>(rollout(m, {}, s).treatments.size()));
    s.mode = Interventional{&b};
    cb.push_back(static_cast<double>(rollout(m, {}, s).treatments.size()));
  }
  CHECK(oracle::welch_p(ca, cb) < 0.01);
}

TEST_CASE("a zero policy gives baseline plus noise") {
  ToyPolicy p(0.0, "none");
  ToyOutcome exact(0.0), noisy(0.3);
  auto q = grid(0.0, 24.0, 0.5);
  PatientModel m{&p, &exact};
  QuerySpec s;
  s.patient = "x";
  s.query_times = q;
  auto tr = rollout(m, {}, s);
  CHECK(tr.treatments.empty());
  REQUIRE(tr.outcomes.size() == q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    CHECK(tr.outcomes[k].time == q[k]);
    CHECK(tr.outcomes[k].value == ToyOutcome::baseline(q[k]));
  }
  PatientModel mn{&p, &noisy};
  std::vector<double> res;
  for (std::uint64_t i = 0; i < 200; ++i) {
    s.sample = i;
    for (const auto& o : rollout(mn, {}, s).outcomes) res.push_back(o.value - ToyOutcome::baseline(o.time));
  }
  CHECK(std::abs(oracle::mean(res)) <= 3.0 * 0.3 / std::sqrt(static_cast<double>(res.size())));
  CHECK(std::sqrt(oracle::variance(res)) == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("counterfactual with the observed policy reproduces the observation") {
  ToyPolicy p(0.3, "A");
  ToyOutcome y(0.25);
  PatientModel m{&p, &y};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto obs = observed_day(m, 0.0, 24.0, seed);
    auto r = policy_counterfactual_query(m, "x", obs, 0.0, 24.0, p, 5, seed);
    for (const auto& s : r.samples) {
      CHECK(s.treatments == obs.treatments);
      REQUIRE(s.outcomes.size() == obs.outcomes.size());
      for (std::size_t k = 0; k < s.outcomes.size(); ++k) {
        CHECK(s.outcomes[k].time == obs.outcomes[k].time);
        CHECK(std::abs(s.outcomes[k].value - obs.outcomes[k].value) <= 1e-8);
      }
    }
  }
}

TEST_CASE("counterfactual retention and the finite response window") {
  ToyPolicy lo(0.2, "lo", false);
  Scaled hi(lo, 1.8);
  ToyOutcome y(0.25);
  PatientModel m{&lo, &y};
  int added = 0, compared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto obs = observed_day(m, 0.0, 24.0, 100 + seed);
    auto r = policy_counterfactual_query(m, "x", obs, 0.0, 24.0, hi, 10, seed);
    for (const auto& s : r.samples) {
      std::vector<double> ot = treatment_times(obs.treatments), ct = treatment_times(s.treatments);
      CHECK(std::includes(ct.begin(), ct.end(), ot.begin(), ot.end()));
      // Retained treatments keep their observed doses.
      for (const auto& a : obs.treatments) {
        auto it = std::find_if(s.treatments.begin(), s.treatments.end(),
                               [&](const Treatment& b) { return b.time == a.time; });
        if (it != s.treatments.end()) CHECK(it->dose == a.dose);
      }
      std::vector<double> diff;
      std::set_symmetric_difference(ot.begin(), ot.end(), ct.begin(), ct.end(), std::back_inserter(diff));
      added += !diff.empty();
      double last = diff.empty() ? -1e9 : diff.back();
      for (std::size_t k = 0; k < s.outcomes.size(); ++k)
        if (s.outcomes[k].time > last + 3.0) {
          ++compared;
          CHECK(std::abs(s.outcomes[k].value - obs.outcomes[k].value) <= 1e-6);
        }
    }
  }
  CHECK(added > 50);
  CHECK(compared > 100);
}

TEST_CASE("query edge cases and errors") {
  ToyPolicy p(0.3, "A");
  ToyOutcome y(0.2);
  PatientModel m{&p, &y};
  auto r = policy_intervention_query(m, "x", {}, 24.0, 24.0, {}, p, 10, 1);
  CHECK(r.samples.empty());
  CHECK(r.mean.empty());

  QuerySpec s;
  s.patient = "x";
  s.mode = Counterfactual{&p, std::nullopt};
  CHECK_THROWS_AS(rollout(m, {}, s), InvalidState);
  s.mode = Observational{};
  EventHistory late{{{30.0, 40.0}}, {}};
  CHECK_THROWS_AS(rollout(m, late, s), InvalidArgument);
  s.query_times = {3.0, 2.0};
  CHECK_THROWS_AS(rollout(m, {}, s), InvalidArgument);
  s.query_times = {25.0};
  CHECK_THROWS_AS(rollout(m, {}, s), InvalidArgument);
  PatientModel partial{&p, nullptr};
  s.query_times = {};
  CHECK_THROWS_AS(rollout(partial, {}, s), InvalidArgument);
}

TEST_CASE("outcomes do not depend on the policy label") {
  ToyPolicy a(0.3, "first"), b(0.3, "second");
  ToyOutcome y(0.2);
  PatientModel m{&a, &y};
  for (std::uint64_t i = 0; i < 20; ++i) {
    QuerySpec s;
    s.patient = "x";
    s.query_times = grid(0.0, 24.0, 0.5);
    s.sample = i;
    s.mode = Interventional{&a};
    auto ra = rollout(m, {}, s);
    s.mode = Interventional{&b};
    auto rb = rollout(m, {}, s);
    CHECK(ra.treatments == rb.treatments);
    CHECK(ra.outcomes == rb.outcomes);
  }
}

TEST_CASE("the treatment term sees exactly the past") {
  struct Spy : TreatmentPolicy {
    ToyPolicy inner{0.3, "spy"};
    std::vector<double> queries;
    mutable bool future = false, missing = false;
    mutable int calls = 0;
    double intensity(const EventHistory& h, double t) const override {
      ++calls;
      for (const auto& a : h.treatments) future |= a.time > t;
      for (const auto& o : h.outcomes) future |= o.time > t;
      for (double q : queries)
        if (q < t)
          missing |= std::none_of(h.outcomes.begin(), h.outcomes.end(),
                                  [&](const Outcome& o) { return o.time == q; });
      return inner.intensity(h, t);
    }
    double sample_mark(double t, RandomStream& r) const override { return inner.sample_mark(t, r); }
    const std::string& label() const override { return inner.label(); }
  } spy;
  spy.queries = grid(0.0, 24.0, 0.7);
  ToyOutcome y(0.2);
  PatientModel m{&spy, &y};
  for (std::uint64_t i = 0; i < 10; ++i) {
    QuerySpec s;
    s.patient = "x";
    s.query_times = spy.queries;
    s.sample = i;
    rollout(m, {}, s);
  }
  CHECK(spy.calls > 1000);
  CHECK_FALSE(spy.future);
  CHECK_FALSE(spy.missing);
}

TEST_CASE("interventional mean trajectory matches a large reference run") {
  // 500 samples against 20000; the reference is smaller than 1e5 to keep the
  // suite fast, and its own error enters the tolerance.
  ToyPolicy a(0.3, "A"), b(0.15, "B");
  ToyOutcome y(0.2);
  PatientModel m{&a, &y};
  EventHistory first = observed_day(m, 0.0, 24.0, 42);
  auto q = grid(24.0, 48.0, 2.0);
  auto small = policy_intervention_query(m, "x", first, 24.0, 48.0, q, b, 500, 7);
  auto big = policy_intervention_query(m, "x", first, 24.0, 48.0, q, b, 20000, 8);
  for (std::size_t k = 0; k < q.size(); ++k) {
    std::vector<double> v;
    for (const auto& s : big.samples) v.push_back(s.outcomes[k].value);
    double sd = std::sqrt(oracle::variance(v));
    double se = sd * std::sqrt(1.0 / 500 + 1.0 / 20000);
    CHECK(std::abs(small.mean[k] - big.mean[k]) <= 3.0 * se);
  }
}

TEST_CASE("query results are reproducible and serialise") {
  ToyPolicy a(0.3, "A");
  ToyOutcome y(0.2);
  PatientModel m{&a, &y};
  auto q = grid(0.0, 24.0, 1.0);
  auto r1 = policy_intervention_query(m, "x", {}, 0.0, 24.0, q, a, 20, 3);
  auto r2 = policy_intervention_query(m, "x", {}, 0.0, 24.0, q, a, 20, 3);
  std::ostringstream c1, c2;
  write_query_csv(c1, r1);
  write_query_csv(c2, r2);
  CHECK(c1.str() == c2.str());
  for (std::size_t k = 0; k < q.size(); ++k) {
    CHECK(r1.lo[k] <= r1.mean[k]);
    CHECK(r1.mean[k] <= r1.hi[k]);
  }
  auto j = query_summary_json(r1);
  CHECK(j["n_samples"] == 20);
  CHECK(j["mean"].size() == q.size());
}
