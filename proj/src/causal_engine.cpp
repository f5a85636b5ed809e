#include "tpcausal/causal_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "tpcausal/errors.hpp"

namespace tpcausal {

std::uint64_t hash_id(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------- processes

JointProcess::JointProcess(const TreatmentPolicy& policy, const OutcomePredictor& outcome,
                           EventHistory context, std::vector<double> query_times,
                           std::variant<FreshNoise, ObservedNoise> noise, RandomStream mark_stream)
    : policy_(policy),
      outcome_(outcome),
      history_(std::move(context)),
      queries_(std::move(query_times)),
      noise_(std::move(noise)),
      marks_(mark_stream) {
  for (std::size_t i = 1; i < queries_.size(); ++i)
    if (!(queries_[i] > queries_[i - 1])) throw InvalidArgument("query times must increase");
  if (auto* o = std::get_if<ObservedNoise>(&noise_)) {
    if (o->outcomes.size() != queries_.size()) throw InvalidState("observed noise does not cover the query times");
    for (std::size_t i = 0; i < queries_.size(); ++i)
      if (o->outcomes[i].time != queries_[i]) throw InvalidState("observed noise is not at the query times");
  }
}

double JointProcess::intensity(double t) const {
  if (log_on_) {
    std::size_t na = 0, no = 0;
    for (const auto& a : history_.treatments) na += a.time < t;
    for (const auto& o : history_.outcomes) no += o.time < t;
    log_.push_back({t, na, no});
  }
  return policy_.intensity(history_, t);
}

double JointProcess::horizon(double t) const {
  for (std::size_t k = next_query_; k < queries_.size(); ++k)
    if (queries_[k] > t) return queries_[k] - t;
  return kDefaultStep;
}

namespace {

std::vector<Treatment> before(std::span<const Treatment> a, double t) {
  std::vector<Treatment> out;
  for (const auto& x : a)
    if (x.time < t) out.push_back(x);
  return out;
}

}  // namespace

double JointProcess::realise(std::size_t k, double q) const {
  auto current = before(history_.treatments, q);
  if (const auto* f = std::get_if<FreshNoise>(&noise_)) {
    RandomStream s = f->stream.child(k);
    return outcome_.mean(q, current) + outcome_.noise_std() * s.normal();
  }
  const auto& o = std::get<ObservedNoise>(noise_);
  auto observed = before(o.treatments, q);
  if (observed == current) return o.outcomes[k].value;
  return o.outcomes[k].value + (outcome_.mean(q, current) - outcome_.mean(q, observed));
}

void JointProcess::advance(double t) {
  while (next_query_ < queries_.size() && queries_[next_query_] <= t) {
    double q = queries_[next_query_];
    history_.outcomes.push_back({q, realise(next_query_, q)});
    ++next_query_;
  }
}

void JointProcess::accept(double t) {
  double dose = -1.0;
  for (const auto& r : retained_)
    if (r.time == t) dose = r.dose;
  if (dose < 0.0) {
    // keyed by time so coupled processes accepting the same candidate agree
    RandomStream r = marks_.child(std::bit_cast<std::uint64_t>(t));
    dose = std::max(0.0, policy_.sample_mark(t, r));
  }
  history_.treatments.push_back({t, dose});
}

double HistoryProcess::horizon(double t) const {
  double next = std::numeric_limits<double>::infinity();
  auto ta = std::upper_bound(history_.treatments.begin(), history_.treatments.end(), t,
                             [](double x, const Treatment& a) { return x < a.time; });
  if (ta != history_.treatments.end()) next = std::min(next, ta->time);
  auto to = std::upper_bound(history_.outcomes.begin(), history_.outcomes.end(), t,
                             [](double x, const Outcome& o) { return x < o.time; });
  if (to != history_.outcomes.end()) next = std::min(next, to->time);
  return std::isfinite(next) ? next - t : kDefaultStep;
}

// ---------------------------------------------------------------- rollout

namespace {

void check_history(const EventHistory& h, double start) {
  if (!is_sorted_strict(h.treatments) || !is_sorted_strict(h.outcomes))
    throw InvalidArgument("history is not strictly sorted");
  if ((!h.treatments.empty() && h.treatments.back().time > start) ||
      (!h.outcomes.empty() && h.outcomes.back().time > start))
    throw InvalidArgument("history extends past the rollout start");
}

void check_queries(const QuerySpec& s) {
  if (!(s.start <= s.end)) throw InvalidArgument("query window is empty");
  for (std::size_t i = 0; i < s.query_times.size(); ++i) {
    double q = s.query_times[i];
    if (q < s.start || q > s.end) throw InvalidArgument("query time outside the window");
    if (i > 0 && !(q > s.query_times[i - 1])) throw InvalidArgument("query times must increase");
  }
}

QueryTrajectory collect(const JointProcess& p, double start, std::size_t context_outcomes,
                        std::size_t context_treatments) {
  QueryTrajectory tr;
  const auto& h = p.history();
  tr.treatments.assign(h.treatments.begin() + static_cast<long>(context_treatments), h.treatments.end());
  tr.outcomes.assign(h.outcomes.begin() + static_cast<long>(context_outcomes), h.outcomes.end());
  (void)start;
  return tr;
}

}  // namespace

QueryTrajectory rollout(const PatientModel& model, const EventHistory& history,
                        const QuerySpec& spec) {
  if (!model.policy || !model.outcome) throw InvalidArgument("incomplete patient model");
  check_history(history, spec.start);
  check_queries(spec);
  const std::uint64_t pid = hash_id(spec.patient);
  RandomStream base = RandomStream::derive(spec.seed, {pid, spec.sample, stream_tag::rollout});
  RandomStream thin_rng = base.child(stream_tag::thinning);

  if (const auto* cf = std::get_if<Counterfactual>(&spec.mode)) {
    if (!cf->policy) throw InvalidArgument("counterfactual mode needs a policy");
    if (!cf->observed) throw InvalidState("counterfactual mode needs the observed record");
    const EventHistory& obs = *cf->observed;
    if (!is_sorted_strict(obs.treatments) || !is_sorted_strict(obs.outcomes))
      throw InvalidArgument("observed record is not strictly sorted");
    ObservedNoise noise;
    std::vector<double> observed_times;
    for (const auto& a : obs.treatments)
      if (a.time > spec.start && a.time <= spec.end) observed_times.push_back(a.time);
      else if (a.time == spec.start) throw InvalidArgument("treatment at the window start");
    noise.treatments = obs.treatments;
    for (double q : spec.query_times) {
      auto it = std::find_if(obs.outcomes.begin(), obs.outcomes.end(),
                             [&](const Outcome& o) { return o.time == q; });
      if (it == obs.outcomes.end()) throw InvalidState("no observed outcome (noise) at a query time");
      noise.outcomes.push_back(*it);
    }
    // The observed process sees the full record; the counterfactual one
    // starts from the pre-window context.
    EventHistory full = history;
    for (const auto& a : obs.treatments)
      if (a.time > spec.start) full.treatments.push_back(a);
    for (const auto& o : obs.outcomes)
      if (o.time >= spec.start && (full.outcomes.empty() || o.time > full.outcomes.back().time))
        full.outcomes.push_back(o);
    HistoryProcess obs_proc(*model.policy, full);
    JointProcess cf_proc(*cf->policy, *model.outcome, history, spec.query_times, noise,
                         base.child(stream_tag::marks));
    cf_proc.retain_marks(obs.treatments);
    SampleResult r = sample_counterfactual(obs_proc, cf_proc, observed_times, spec.start, spec.end,
                                           thin_rng, NoiseMode::Posterior);
    QueryTrajectory tr = collect(cf_proc, spec.start, history.outcomes.size(), history.treatments.size());
    tr.noise = std::move(r.noise);
    return tr;
  }

  const TreatmentPolicy* policy = model.policy;
  if (const auto* iv = std::get_if<Interventional>(&spec.mode)) {
    if (!iv->policy) throw InvalidArgument("interventional mode needs a policy");
    policy = iv->policy;
  }
  JointProcess proc(*policy, *model.outcome, history, spec.query_times,
                    FreshNoise{base.child(stream_tag::outcome_noise)}, base.child(stream_tag::marks));
  sample_ogata(spec.start, spec.end, proc, thin_rng);
  return collect(proc, spec.start, history.outcomes.size(), history.treatments.size());
}

QueryResult summarise(std::vector<QueryTrajectory> samples, std::vector<double> query_times) {
  QueryResult r;
  r.samples = std::move(samples);
  r.query_times = std::move(query_times);
  const std::size_t m = r.query_times.size();
  r.mean.assign(m, 0.0);
  r.lo.assign(m, 0.0);
  r.hi.assign(m, 0.0);
  if (r.samples.empty()) return r;
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> v;
    for (const auto& s : r.samples) v.push_back(s.outcomes.at(k).value);
    double sum = 0.0;
    for (double x : v) sum += x;
    r.mean[k] = sum / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
      double pos = p * (v.size() - 1);
      std::size_t i = static_cast<std::size_t>(pos);
      if (i + 1 >= v.size()) return v.back();
      return v[i] + (pos - i) * (v[i + 1] - v[i]);
    };
    r.lo[k] = q(0.05);
    r.hi[k] = q(0.95);
  }
  return r;
}

namespace {

QueryResult run_many(const PatientModel& model, const EventHistory& history, QuerySpec spec,
                     int n_samples) {
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  std::vector<QueryTrajectory> out(static_cast<std::size_t>(n_samples));
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n_samples; ++i) {
    try {
      QuerySpec s = spec;
      s.sample = static_cast<std::uint64_t>(i);
      out[static_cast<std::size_t>(i)] = rollout(model, history, s);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return summarise(std::move(out), spec.query_times);
}

}  // namespace

QueryResult policy_intervention_query(const PatientModel& model, const std::string& patient,
                                      const EventHistory& history, double start, double horizon,
                                      std::vector<double> query_times,
                                      const TreatmentPolicy& new_policy, int n_samples,
                                      std::uint64_t seed) {
  QuerySpec s;
  s.patient = patient;
  s.start = start;
  s.end = horizon;
  s.query_times = std::move(query_times);
  s.mode = Interventional{&new_policy};
  s.seed = seed;
  if (horizon <= start) {
    QueryResult r;
    r.query_times = s.query_times;
    return r;
  }
  return run_many(model, history, std::move(s), n_samples);
}

QueryResult policy_counterfactual_query(const PatientModel& model, const std::string& patient,
                                        const EventHistory& observed, double start, double end,
                                        const TreatmentPolicy& new_policy, int n_samples,
                                        std::uint64_t seed) {
  EventHistory context, window;
  for (const auto& a : observed.treatments) (a.time <= start ? context : window).treatments.push_back(a);
  for (const auto& o : observed.outcomes) {
    if (o.time < start) context.outcomes.push_back(o);
    else if (o.time <= end) window.outcomes.push_back(o);
  }
  for (const auto& a : observed.treatments)
    if (a.time == start) throw InvalidArgument("treatment at the window start");
  QuerySpec s;
  s.patient = patient;
  s.start = start;
  s.end = end;
  for (const auto& o : window.outcomes) s.query_times.push_back(o.time);
  s.mode = Counterfactual{&new_policy, window};
  s.seed = seed;
  return run_many(model, context, std::move(s), n_samples);
}

void write_query_csv(std::ostream& os, const QueryResult& r) {
  os << "sample_id,kind,time,value\n";
  char buf[128];
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    for (const auto& a : r.samples[i].treatments) {
      std::snprintf(buf, sizeof buf, "%zu,treatment,%.6f,%.17g\n", i, a.time, a.dose);
      os << buf;
    }
    for (const auto& o : r.samples[i].outcomes) {
      std::snprintf(buf, sizeof buf, "%zu,outcome,%.6f,%.17g\n", i, o.time, o.value);
      os << buf;
    }
  }
}

void write_plot_csv(std::ostream& os, const QueryResult& r) {
  os << "time,mean,lo,hi\n";
  char buf[160];
  for (std::size_t k = 0; k < r.query_times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6f,%.17g,%.17g,%.17g\n", r.query_times[k], r.mean[k], r.lo[k],
                  r.hi[k]);
    os << buf;
  }
}

nlohmann::json query_summary_json(const QueryResult& r) {
  double count = 0.0;
  for (const auto& s : r.samples) count += static_cast<double>(s.treatments.size());
  return {{"n_samples", r.samples.size()},
          {"query_times", r.query_times},
          {"mean", r.mean},
          {"lo", r.lo},
          {"hi", r.hi},
          {"mean_treatment_count", r.samples.empty() ? 0.0 : count / r.samples.size()}};
}

}  // namespace tpcausal
