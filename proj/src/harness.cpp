#include "tpcausal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "tpcausal/errors.hpp"
#include "tpcausal/sampler.hpp"

namespace tpcausal {

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (n_patients < 1) throw InvalidArgument("n_patients must be >= 1");
  if (n_policies != 2) throw InvalidArgument("exactly two policies are supported");
  if (n_groups < 1) throw InvalidArgument("n_groups must be >= 1");
  if (!(day_length > 0.0)) throw InvalidArgument("day_length must be positive");
  if (grid_intervals < 2) throw InvalidArgument("grid must have >= 2 intervals");
  if (horizon_days < 1) throw InvalidArgument("horizon_days must be >= 1");
  if (seeds.empty()) throw InvalidArgument("no seeds");
  if (num_inducing < 1 || treatment_iters < 0 || outcome_iters < 0)
    throw InvalidArgument("bad fit settings");
  if (cf_rollouts < 1) throw InvalidArgument("cf_rollouts must be >= 1");
  if (!(outcome_noise_std > 0.0)) throw InvalidArgument("outcome noise must be positive");
  for (const auto& r : roster) {
    if (r.treatment != "gp_pp" && r.treatment != "nhpp" && r.treatment != "constant_rate" &&
        r.treatment != "ground_truth")
      throw InvalidArgument("unknown treatment model kind: " + r.treatment);
    if (r.response != "gp_response" && r.response != "constant_response" &&
        r.response != "ground_truth")
      throw InvalidArgument("unknown response model kind: " + r.response);
  }
  TreatmentConfig::variant(gp_pp_variant);
  TreatmentConfig::variant(nhpp_variant);
  for (const auto& v : tll_variants) TreatmentConfig::variant(v);
}

ExperimentConfig ExperimentConfig::paper_scale() {
  ExperimentConfig c;
  c.n_patients = 50;
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  return c;
}

std::vector<double> ExperimentConfig::grid(int day) const {
  std::vector<double> g(static_cast<std::size_t>(grid_intervals));
  for (int j = 0; j < grid_intervals; ++j) g[j] = day * day_length + j * day_length / grid_intervals;
  return g;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json roster = nlohmann::json::array();
  for (const auto& r : c.roster) roster.push_back({{"treatment", r.treatment}, {"response", r.response}});
  j = {{"n_patients", c.n_patients},         {"n_policies", c.n_policies},
       {"n_groups", c.n_groups},             {"day_length", c.day_length},
       {"grid_intervals", c.grid_intervals}, {"horizon_days", c.horizon_days},
       {"seeds", c.seeds},                   {"roster", roster},
       {"gp_pp_variant", c.gp_pp_variant},   {"nhpp_variant", c.nhpp_variant},
       {"tll_variants", c.tll_variants},     {"treatment_iters", c.treatment_iters},
       {"outcome_iters", c.outcome_iters},   {"num_inducing", c.num_inducing},
       {"outcome_noise_std", c.outcome_noise_std}, {"cf_rollouts", c.cf_rollouts}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const std::vector<std::string> known{
      "n_patients",   "n_policies",   "n_groups",        "day_length",      "grid_intervals",
      "horizon_days", "seeds",        "roster",          "gp_pp_variant",   "nhpp_variant",
      "tll_variants", "treatment_iters", "outcome_iters", "num_inducing",   "outcome_noise_std",
      "cf_rollouts"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw InvalidArgument("unknown config key: " + it.key());
  c.n_patients = j.value("n_patients", c.n_patients);
  c.n_policies = j.value("n_policies", c.n_policies);
  c.n_groups = j.value("n_groups", c.n_groups);
  c.day_length = j.value("day_length", c.day_length);
  c.grid_intervals = j.value("grid_intervals", c.grid_intervals);
  c.horizon_days = j.value("horizon_days", c.horizon_days);
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("roster")) {
    c.roster.clear();
    for (const auto& r : j["roster"])
      c.roster.push_back({r.at("treatment").get<std::string>(), r.at("response").get<std::string>()});
  }
  c.gp_pp_variant = j.value("gp_pp_variant", c.gp_pp_variant);
  c.nhpp_variant = j.value("nhpp_variant", c.nhpp_variant);
  if (j.contains("tll_variants")) c.tll_variants = j["tll_variants"].get<std::vector<std::string>>();
  c.treatment_iters = j.value("treatment_iters", c.treatment_iters);
  c.outcome_iters = j.value("outcome_iters", c.outcome_iters);
  c.num_inducing = j.value("num_inducing", c.num_inducing);
  c.outcome_noise_std = j.value("outcome_noise_std", c.outcome_noise_std);
  c.cf_rollouts = j.value("cf_rollouts", c.cf_rollouts);
  c.validate();
}

// ---------------------------------------------------------------- simulator

double SimulatorOutcome::baseline(double t) const {
  return g_.intercept + g_.amplitude * std::cos(2.0 * std::numbers::pi * (t - g_.phase) / day_length_);
}

double SimulatorOutcome::response(double delta, double dose) const {
  if (delta < 0.0 || delta > g_.window) return 0.0;
  double z = (delta - g_.peak) / g_.width;
  return (g_.beta0 + g_.beta1 * dose) * std::exp(-0.5 * z * z);
}

double SimulatorOutcome::mean(double t, std::span<const Treatment> treatments) const {
  double y = baseline(t);
  for (const auto& a : treatments) y += response(t - a.time, a.dose);
  return y;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

TreatmentModel make_ground_truth_policy(const PolicyShape& s, const std::string& label,
                                        int num_inducing, double day_length) {
  TreatmentConfig c = TreatmentConfig::variant("ao");
  c.beta0 = s.base;
  c.num_inducing = num_inducing;
  c.day_length = day_length;
  VariationalState st;
  const auto ta = linspace(0.0, 10.0, num_inducing);
  for (double t : ta) st.z.push_back({Component::Treatment, 0, t, 0.0});
  const auto to = linspace(0.0, 1.0, num_inducing);
  const auto mo = linspace(2.0, 12.0, num_inducing);
  for (int i = 0; i < num_inducing; ++i) st.z.push_back({Component::Outcome, 0, to[i], mo[i]});
  const long m = static_cast<long>(st.z.size());
  st.mean.resize(m);
  for (long i = 0; i < m; ++i) {
    const auto& z = st.z[static_cast<std::size_t>(i)];
    if (z.component == Component::Treatment) {
      double d = z.time;
      double bump = (d - s.bump_center) / s.bump_width;
      st.mean[i] = -s.base / (1.0 + std::exp((d - s.refractory) / 0.25)) +
                   s.bump_height * std::exp(-0.5 * bump * bump);
    } else {
      st.mean[i] = s.glucose_slope * (z.mark - s.glucose_ref);
    }
  }
  // With m at the targets the posterior mean interpolates them; a small S
  // keeps the latent variance near zero.
  Eigen::MatrixXd kzz = inducing_gram(st.z, c);
  kzz.diagonal().array() += c.jitter;
  Eigen::MatrixXd lk = Eigen::LLT<Eigen::MatrixXd>(kzz).matrixL();
  st.mean = kzz * Eigen::LLT<Eigen::MatrixXd>(kzz).solve(st.mean);
  st.cov_chol = 0.05 * lk;
  std::vector<std::pair<double, double>> pseudo;
  for (double t : {3.0, 9.0, 15.0, 21.0}) pseudo.push_back({t, s.mark_mean});
  MarkModel marks(KernelSpec{kern::Constant{1.0}}, s.mark_sd * s.mark_sd, s.mark_mean, pseudo, day_length);
  return TreatmentModel(c, std::move(st), std::move(marks), label);
}

Simulator build_simulator(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  RandomStream rng = RandomStream::derive(seed, {stream_tag::simulator});
  Simulator sim;
  sim.day_length = config.day_length;
  PolicyShape a;
  a.base = 0.55;
  a.refractory = 1.5;
  a.bump_height = 0.35;
  a.bump_center = 3.5;
  a.bump_width = 0.8;
  a.mark_mean = 50.0;
  PolicyShape b;
  b.base = 0.4;
  b.refractory = 2.5;
  b.bump_height = 0.3;
  b.bump_center = 5.5;
  b.bump_width = 1.0;
  b.mark_mean = 30.0;
  sim.policies.push_back(make_ground_truth_policy(a, "A", config.num_inducing, config.day_length));
  sim.policies.push_back(make_ground_truth_policy(b, "B", config.num_inducing, config.day_length));
  const GroupOutcome base[3] = {{5.2, 0.4, 4.0, 0.30, 0.030, 0.9, 0.45, 3.0},
                                {5.8, 0.6, 10.0, 0.20, 0.040, 1.2, 0.55, 3.0},
                                {6.3, 0.3, 16.0, 0.40, 0.025, 1.0, 0.50, 3.0}};
  for (int g = 0; g < config.n_groups; ++g) {
    GroupOutcome p = base[g % 3];
    p.intercept += 0.2 * (rng.uniform() - 0.5);
    p.phase += 2.0 * (rng.uniform() - 0.5);
    sim.groups.emplace_back(p, config.outcome_noise_std, config.day_length);
  }
  for (int i = 0; i < config.n_patients; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "p%02d", i);
    sim.patients.push_back({id, i % 2, i % config.n_groups});
  }
  return sim;
}

// ---------------------------------------------------------------- sessions

namespace {

struct Follower {
  const TreatmentPolicy* policy;
  const OutcomePredictor* outcome;
};

struct Session {
  std::vector<EventHistory> leaders;  // own, switched
  std::vector<EventHistory> followers;
};

std::vector<double> window_grid(const ExperimentConfig& c, int first_day, int days) {
  std::vector<double> q;
  for (int d = first_day; d < first_day + days; ++d) {
    auto g = c.grid(d);
    q.insert(q.end(), g.begin(), g.end());
  }
  return q;
}

// Ground truth under the own and the switched policy share thinning,
// outcome and mark noise; followers share the thinning and mark noise only.
Session run_session(const Simulator& sim, const ExperimentConfig& c, std::uint64_t seed,
                    std::size_t v, int first_day, int days, const EventHistory& context,
                    const std::vector<Follower>& followers) {
  const PatientSpec& p = sim.patients[v];
  RandomStream base = RandomStream::derive(
      seed, {hash_id(p.id), static_cast<std::uint64_t>(first_day), stream_tag::simulator});
  const auto grid = window_grid(c, first_day, days);
  const SimulatorOutcome& truth = sim.groups[static_cast<std::size_t>(p.group)];
  std::vector<std::unique_ptr<JointProcess>> procs;
  for (int pol : {p.own_policy, sim.switched(p.own_policy)})
    procs.push_back(std::make_unique<JointProcess>(
        sim.policies[static_cast<std::size_t>(pol)], truth, context, grid,
        FreshNoise{base.child(stream_tag::outcome_noise)}, base.child(stream_tag::marks)));
  for (std::size_t k = 0; k < followers.size(); ++k)
    procs.push_back(std::make_unique<JointProcess>(
        *followers[k].policy, *followers[k].outcome, context, grid,
        FreshNoise{base.child(100 + k).child(stream_tag::outcome_noise)}, base.child(stream_tag::marks)));
  std::vector<PointProcess*> ptrs;
  for (auto& q : procs) ptrs.push_back(q.get());
  RandomStream thin = base.child(stream_tag::thinning);
  sample_fixed_noise(first_day * c.day_length, (first_day + days) * c.day_length, ptrs, thin, 2);
  Session s;
  for (std::size_t k = 0; k < procs.size(); ++k)
    (k < 2 ? s.leaders : s.followers).push_back(procs[k]->history());
  return s;
}

// Followers alone on fresh noise, coupled only to each other. Used where the
// generator's own noise is what a model would have to abduce.
std::vector<EventHistory> run_forward(const Simulator& sim, const ExperimentConfig& c,
                                      std::uint64_t seed, std::size_t v, int first_day, int days,
                                      const EventHistory& context,
                                      const std::vector<Follower>& followers, std::uint64_t sample) {
  if (followers.empty()) return {};
  const PatientSpec& p = sim.patients[v];
  RandomStream base = RandomStream::derive(
      seed, {hash_id(p.id), static_cast<std::uint64_t>(first_day), stream_tag::rollout, sample});
  const auto grid = window_grid(c, first_day, days);
  std::vector<std::unique_ptr<JointProcess>> procs;
  for (std::size_t k = 0; k < followers.size(); ++k)
    procs.push_back(std::make_unique<JointProcess>(
        *followers[k].policy, *followers[k].outcome, context, grid,
        FreshNoise{base.child(100 + k).child(stream_tag::outcome_noise)}, base.child(stream_tag::marks)));
  std::vector<PointProcess*> ptrs;
  for (auto& q : procs) ptrs.push_back(q.get());
  RandomStream thin = base.child(stream_tag::thinning);
  sample_fixed_noise(first_day * c.day_length, (first_day + days) * c.day_length, ptrs, thin);
  std::vector<EventHistory> out;
  for (auto& q : procs) out.push_back(q->history());
  return out;
}

PatientRecord to_record(const PatientSpec& p, const Simulator& sim, int policy, int days,
                        const EventHistory& h) {
  PatientRecord r;
  r.id = p.id;
  r.policy = sim.policies[static_cast<std::size_t>(policy)].label();
  r.group = p.group;
  r.days = days;
  r.day_length = sim.day_length;
  r.treatments = h.treatments;
  r.outcomes = h.outcomes;
  return r;
}

std::vector<Outcome> window_outcomes(const EventHistory& h, double start) {
  std::vector<Outcome> out;
  for (const auto& o : h.outcomes)
    if (o.time >= start) out.push_back(o);
  return out;
}

}  // namespace

PatientRecord simulate_patient(const Simulator& sim, const PatientSpec& patient, int policy,
                               int days, const ExperimentConfig& config, std::uint64_t seed) {
  RandomStream base = RandomStream::derive(seed, {hash_id(patient.id), stream_tag::trajectory});
  JointProcess proc(sim.policies[static_cast<std::size_t>(policy)],
                    sim.groups[static_cast<std::size_t>(patient.group)], {},
                    window_grid(config, 0, days), FreshNoise{base.child(stream_tag::outcome_noise)},
                    base.child(stream_tag::marks));
  RandomStream thin = base.child(stream_tag::thinning);
  sample_ogata(0.0, days * config.day_length, proc, thin);
  return to_record(patient, sim, policy, days, proc.history());
}

GeneratedData generate_datasets(const Simulator& sim, const ExperimentConfig& c,
                                std::uint64_t seed) {
  const std::size_t n = sim.patients.size();
  GeneratedData d;
  d.observational.resize(n);
  d.observational_next.resize(n);
  d.interventional.resize(n);
  d.counterfactual.resize(n);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t v = 0; v < n; ++v) {
    try {
      const PatientSpec& p = sim.patients[v];
      const int own = p.own_policy, sw = sim.switched(own);
      Session day1 = run_session(sim, c, seed, v, 0, 1, {}, {});
      Session next = run_session(sim, c, seed, v, 1, c.horizon_days, day1.leaders[0], {});
      d.observational[v] = to_record(p, sim, own, 1, day1.leaders[0]);
      d.counterfactual[v] = to_record(p, sim, sw, 1, day1.leaders[1]);
      d.observational_next[v] = to_record(p, sim, own, 1 + c.horizon_days, next.leaders[0]);
      d.interventional[v] = to_record(p, sim, sw, 1 + c.horizon_days, next.leaders[1]);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  for (const auto* set : {&d.observational, &d.observational_next, &d.interventional, &d.counterfactual})
    for (const auto& r : *set) validate_record(r);
  return d;
}

// ---------------------------------------------------------------- fitting

namespace {

std::vector<Trajectory> policy_days(const std::vector<PatientRecord>& records,
                                    const std::string& label) {
  std::vector<Trajectory> out;
  for (const auto& r : records)
    if (r.policy == label)
      for (int d = 0; d < r.days; ++d) out.push_back(r.day(d));
  return out;
}

OutcomeData outcome_data(const PatientRecord& r) { return {r.id, r.treatments, r.outcomes}; }

class Fitter {
 public:
  Fitter(const Simulator& sim, const std::vector<PatientRecord>& obs, const ExperimentConfig& c)
      : sim_(sim), obs_(obs), c_(c) {}

  std::vector<std::shared_ptr<const TreatmentPolicy>> treatment(const std::string& kind) {
    auto it = treatment_.find(kind);
    if (it != treatment_.end()) return it->second;
    std::vector<std::shared_ptr<const TreatmentPolicy>> out;
    for (const auto& gt : sim_.policies) {
      if (kind == "ground_truth") {
        out.push_back(std::make_shared<TreatmentModel>(gt));
        continue;
      }
      auto data = policy_days(obs_, gt.label());
      if (data.empty()) throw InvalidState("no observational data for policy " + gt.label());
      if (kind == "constant_rate") {
        out.push_back(std::make_shared<ConstantRatePolicy>(fit_constant_rate(data, gt.label())));
      } else {
        out.push_back(std::make_shared<TreatmentModel>(fit_variant(
            kind == "gp_pp" ? c_.gp_pp_variant : kind == "nhpp" ? c_.nhpp_variant : kind, data,
            gt.label())));
      }
    }
    treatment_[kind] = out;
    return out;
  }

  TreatmentModel fit_variant(const std::string& variant, std::span<const Trajectory> data,
                             const std::string& label) {
    TreatmentConfig cfg = TreatmentConfig::variant(variant);
    cfg.num_inducing = c_.num_inducing;
    cfg.day_length = c_.day_length;
    TreatmentFitOptions opt;
    opt.max_iters = c_.treatment_iters;
    return train_treatment_model(cfg, data, label, opt);
  }

  const OutcomeModel& outcome_model() {
    if (!outcome_) {
      std::vector<OutcomeData> data;
      for (const auto& r : obs_) data.push_back(outcome_data(r));
      OutcomeFitOptions opt;
      opt.max_iters = c_.outcome_iters;
      outcome_ = fit_outcome_model(initial_outcome_model(data), data, opt).model;
    }
    return *outcome_;
  }

  std::vector<std::shared_ptr<const OutcomePredictor>> response(const std::string& kind) {
    std::vector<std::shared_ptr<const OutcomePredictor>> out;
    for (std::size_t v = 0; v < obs_.size(); ++v) {
      if (kind == "ground_truth")
        out.push_back(std::make_shared<SimulatorOutcome>(
            sim_.groups[static_cast<std::size_t>(sim_.patients[v].group)]));
      else if (kind == "gp_response")
        out.push_back(std::make_shared<OutcomePosterior>(outcome_model(), outcome_data(obs_[v])));
      else
        out.push_back(std::make_shared<ConstantResponsePosterior>(outcome_model(), outcome_data(obs_[v])));
    }
    return out;
  }

 private:
  const Simulator& sim_;
  const std::vector<PatientRecord>& obs_;
  const ExperimentConfig& c_;
  std::map<std::string, std::vector<std::shared_ptr<const TreatmentPolicy>>> treatment_;
  std::optional<OutcomeModel> outcome_;
};

}  // namespace

FittedModel fit_roster_model(const RosterEntry& entry, const Simulator& sim,
                             const std::vector<PatientRecord>& observational,
                             const ExperimentConfig& config) {
  Fitter f(sim, observational, config);
  return {entry, f.treatment(entry.treatment), f.response(entry.response)};
}

// ---------------------------------------------------------------- evaluation

double evaluate_mse(const std::vector<std::vector<Outcome>>& truth,
                    const std::vector<std::vector<Outcome>>& estimate) {
  if (truth.size() != estimate.size()) throw InvalidArgument("trajectory counts differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (truth[v].size() != estimate[v].size()) throw InvalidArgument("outcome grids differ");
    for (std::size_t j = 0; j < truth[v].size(); ++j) {
      if (truth[v][j].time != estimate[v][j].time) throw InvalidArgument("outcome grids differ");
      double d = truth[v][j].value - estimate[v][j].value;
      sum += d * d;
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("no outcomes to compare");
  return sum / static_cast<double>(n);
}

std::string to_string(QueryKind q) {
  switch (q) {
    case QueryKind::Observational: return "observational";
    case QueryKind::Interventional: return "interventional";
    case QueryKind::Counterfactual: return "counterfactual";
  }
  return "?";
}

std::string to_string(ModelMode m) {
  switch (m) {
    case ModelMode::Obs: return "obs";
    case ModelMode::Int: return "int";
    case ModelMode::Cf: return "cf";
  }
  return "?";
}

namespace {

bool same_history(const EventHistory& a, const EventHistory& b) {
  return a.treatments == b.treatments && a.outcomes == b.outcomes;
}

EventHistory as_history(const PatientRecord& r) { return r.history(); }

}  // namespace

SeedEvaluation evaluate_seed(const ExperimentConfig& c, std::uint64_t seed, bool with_tll) {
  c.validate();
  SeedEvaluation out;
  out.seed = seed;
  const Simulator sim = build_simulator(c, seed);
  const GeneratedData data = generate_datasets(sim, c, seed);
  const std::size_t n = sim.patients.size();
  const double T = c.day_length;

  Fitter fitter(sim, data.observational, c);
  std::vector<FittedModel> models;
  for (const auto& e : c.roster) {
    try {
      models.push_back({e, fitter.treatment(e.treatment), fitter.response(e.response)});
    } catch (const std::exception& ex) {
      out.failures[e.name()] = ex.what();
    }
  }
  const std::size_t nm = models.size();

  // per (model, mode, query): truth and estimate trajectories per patient
  using Key = std::tuple<std::size_t, ModelMode, QueryKind>;
  std::map<Key, std::vector<std::vector<Outcome>>> est;
  std::vector<std::vector<Outcome>> truth_obs(n), truth_int(n), truth_cf(n);
  std::vector<std::string> model_failure(nm);
  std::vector<std::vector<std::vector<Outcome>>> day1_own(nm, std::vector<std::vector<Outcome>>(n)),
      day1_sw = day1_own, next_own = day1_own, next_sw = day1_own, cf = day1_own;
  std::exception_ptr err;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t v = 0; v < n; ++v) {
    try {
      const PatientSpec& p = sim.patients[v];
      const std::size_t own = static_cast<std::size_t>(p.own_policy);
      const std::size_t sw = static_cast<std::size_t>(sim.switched(p.own_policy));
      std::vector<Follower> fol;
      for (const auto& m : models) {
        fol.push_back({m.policies[own].get(), m.outcomes[v].get()});
        fol.push_back({m.policies[sw].get(), m.outcomes[v].get()});
      }
      const EventHistory observed = as_history(data.observational[v]);
      Session s1 = run_session(sim, c, seed, v, 0, 1, {}, {});
      Session s2 = run_session(sim, c, seed, v, 1, c.horizon_days, observed, fol);
      // counterfactual query: mean over rollouts for every mode
      std::vector<std::vector<double>> f1sum(fol.size());
      for (int r = 0; r < c.cf_rollouts; ++r) {
        const auto f1 = run_forward(sim, c, seed, v, 0, 1, {}, fol, static_cast<std::uint64_t>(r));
        for (std::size_t k = 0; k < fol.size(); ++k) {
          auto o = window_outcomes(f1[k], 0.0);
          f1sum[k].resize(o.size(), 0.0);
          for (std::size_t j = 0; j < o.size(); ++j) f1sum[k][j] += o[j].value / c.cf_rollouts;
        }
      }
      auto averaged = [&](std::size_t k) {
        std::vector<Outcome> o = window_outcomes(s1.leaders[0], 0.0);
        for (std::size_t j = 0; j < o.size(); ++j) o[j].value = f1sum[k][j];
        return o;
      };
      if (!same_history(s1.leaders[0], observed) ||
          !same_history(s2.leaders[0], as_history(data.observational_next[v])) ||
          !same_history(s2.leaders[1], as_history(data.interventional[v])))
        throw InconsistencyError("followers perturbed the ground-truth sessions");
      truth_obs[v] = window_outcomes(s2.leaders[0], T);
      truth_int[v] = window_outcomes(s2.leaders[1], T);
      truth_cf[v] = window_outcomes(s1.leaders[1], 0.0);
      for (std::size_t k = 0; k < nm; ++k) {
        day1_own[k][v] = averaged(2 * k);
        day1_sw[k][v] = averaged(2 * k + 1);
        next_own[k][v] = window_outcomes(s2.followers[2 * k], T);
        next_sw[k][v] = window_outcomes(s2.followers[2 * k + 1], T);
        try {
          PatientModel pm{models[k].policies[own].get(), models[k].outcomes[v].get()};
          auto r = policy_counterfactual_query(pm, p.id, observed, 0.0, T, *models[k].policies[sw],
                                               c.cf_rollouts, seed);
          cf[k][v] = r.samples.at(0).outcomes;
          for (std::size_t j = 0; j < r.mean.size(); ++j) cf[k][v][j].value = r.mean[j];
        } catch (const std::exception& ex) {
#pragma omp critical
          if (model_failure[k].empty()) model_failure[k] = std::string("counterfactual: ") + ex.what();
        }
      }
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  for (std::size_t k = 0; k < nm; ++k) {
    const std::string name = models[k].entry.name();
    auto put = [&](ModelMode m, QueryKind q, const std::vector<std::vector<Outcome>>& truth,
                   const std::vector<std::vector<Outcome>>& e) {
      out.mse[{name, to_string(m), to_string(q)}] = evaluate_mse(truth, e);
    };
    // forward queries: obs mode keeps the observed policy, int and cf modes
    // take the target policy
    for (ModelMode m : {ModelMode::Obs, ModelMode::Int, ModelMode::Cf})
      put(m, QueryKind::Observational, truth_obs, next_own[k]);
    put(ModelMode::Obs, QueryKind::Interventional, truth_int, next_own[k]);
    put(ModelMode::Int, QueryKind::Interventional, truth_int, next_sw[k]);
    put(ModelMode::Cf, QueryKind::Interventional, truth_int, next_sw[k]);
    put(ModelMode::Obs, QueryKind::Counterfactual, truth_cf, day1_own[k]);
    put(ModelMode::Int, QueryKind::Counterfactual, truth_cf, day1_sw[k]);
    if (model_failure[k].empty())
      put(ModelMode::Cf, QueryKind::Counterfactual, truth_cf, cf[k]);
    else
      out.failures[name] = model_failure[k];
    double o = out.mse[{name, "int", "observational"}];
    double i = out.mse[{name, "int", "interventional"}];
    if (o > i)
      out.anomalies.push_back(name + ": observational-query MSE " + std::to_string(o) +
                              " exceeds interventional-query MSE " + std::to_string(i));
  }

  if (with_tll) {
    for (const auto& variant : c.tll_variants) {
      try {
        std::vector<std::shared_ptr<const TreatmentPolicy>> pols;
        if (variant == c.gp_pp_variant) pols = fitter.treatment("gp_pp");
        else if (variant == c.nhpp_variant) pols = fitter.treatment("nhpp");
        else pols = fitter.treatment(variant);
        double sum = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
          const auto& m = dynamic_cast<const TreatmentModel&>(
              *pols[static_cast<std::size_t>(sim.patients[v].own_policy)]);
          const PatientRecord& r = data.observational_next[v];
          for (int d = 1; d < r.days; ++d) sum += test_log_likelihood_bound(m, r.day(d));
        }
        out.tll[variant] = sum / static_cast<double>(n * c.horizon_days);
      } catch (const std::exception& ex) {
        out.failures["tll:" + variant] = ex.what();
      }
    }
  }
  return out;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace

BenchmarkResult run_benchmark(const ExperimentConfig& c) {
  c.validate();
  if (c.roster.empty()) throw InvalidArgument("empty roster");
  BenchmarkResult r;
  r.repetition_note =
      "each seed regenerates the simulator jitter, all datasets and all sampler noise";
  for (auto seed : c.seeds) r.seeds.push_back(evaluate_seed(c, seed, true));
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> acc;
  std::map<std::string, std::vector<double>> tll;
  for (const auto& s : r.seeds) {
    for (const auto& [k, v] : s.mse) acc[k].push_back(v);
    for (const auto& [k, v] : s.tll) tll[k].push_back(v);
  }
  for (const auto& e : c.roster)
    for (std::string mode : {"obs", "int", "cf"})
      for (std::string q : {"observational", "interventional", "counterfactual"}) {
        auto it = acc.find({e.name(), mode, q});
        if (it == acc.end()) continue;
        auto [m, sd] = mean_sd(it->second);
        r.mse.push_back({e.name(), mode, q, m, sd, it->second});
      }
  for (const auto& v : c.tll_variants) {
    auto it = tll.find(v);
    if (it == tll.end()) continue;
    auto [m, sd] = mean_sd(it->second);
    r.tll.push_back({v, m, sd, it->second});
  }
  return r;
}

void write_benchmark_csv(std::ostream& os, const BenchmarkResult& r) {
  os << "model,mode,query,mse_mean,mse_sd,n_seeds\n";
  char buf[256];
  for (const auto& row : r.mse) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f,%zu\n", row.model.c_str(), row.mode.c_str(),
                  row.query.c_str(), row.mean, row.sd, row.values.size());
    os << buf;
  }
}

void write_tll_csv(std::ostream& os, const BenchmarkResult& r) {
  os << "variant,tll_mean,tll_sd,n_seeds\n";
  char buf[160];
  for (const auto& row : r.tll) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%zu\n", row.variant.c_str(), row.mean, row.sd,
                  row.values.size());
    os << buf;
  }
}

nlohmann::json benchmark_json(const BenchmarkResult& r) {
  nlohmann::json j;
  j["repetition"] = r.repetition_note;
  j["mse"] = nlohmann::json::array();
  for (const auto& row : r.mse)
    j["mse"].push_back({{"model", row.model}, {"mode", row.mode}, {"query", row.query},
                        {"mean", row.mean}, {"sd", row.sd}, {"per_seed", row.values}});
  j["tll"] = nlohmann::json::array();
  for (const auto& row : r.tll)
    j["tll"].push_back({{"variant", row.variant}, {"mean", row.mean}, {"sd", row.sd},
                        {"per_seed", row.values}});
  j["seeds"] = nlohmann::json::array();
  for (const auto& s : r.seeds)
    j["seeds"].push_back({{"seed", s.seed}, {"failures", s.failures}, {"anomalies", s.anomalies}});
  return j;
}

// ---------------------------------------------------------------- TLL experiment

std::map<std::string, double> heldout_tll(const TllExperiment& e,
                                          const std::vector<std::string>& variants,
                                          std::uint64_t seed) {
  ExperimentConfig c;
  c.n_patients = e.n_patients;
  c.num_inducing = e.num_inducing;
  const Simulator sim = build_simulator(c, seed);
  const int days = e.train_days + 1;
  std::vector<PatientRecord> recs(sim.patients.size());
  for (std::size_t v = 0; v < sim.patients.size(); ++v)
    recs[v] = simulate_patient(sim, sim.patients[v], sim.patients[v].own_policy, days, c, seed);
  std::map<std::string, double> out;
  for (const auto& variant : variants) {
    std::vector<double> tll(recs.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t v = 0; v < recs.size(); ++v) {
      try {
        std::vector<Trajectory> train;
        for (int d = 0; d < e.train_days; ++d) train.push_back(recs[v].day(d));
        TreatmentConfig cfg = TreatmentConfig::variant(variant);
        cfg.num_inducing = e.num_inducing;
        TreatmentFitOptions opt;
        opt.max_iters = e.iters;
        TreatmentModel m = train_treatment_model(cfg, train, recs[v].id, opt);
        tll[v] = test_log_likelihood_bound(m, recs[v].day(e.train_days));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    double s = 0.0;
    for (double x : tll) s += x;
    out[variant] = s / static_cast<double>(tll.size());
  }
  return out;
}

}  // namespace tpcausal
