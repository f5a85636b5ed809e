#include "tpcausal/treatment_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tpcausal/errors.hpp"
#include "tpcausal/optimize.hpp"
#include "tpcausal/special.hpp"

namespace tpcausal {

// ---------------------------------------------------------------- config

TreatmentConfig TreatmentConfig::variant(std::string_view name) {
  TreatmentConfig c;
  c.use_baseline = name.find('b') != std::string_view::npos;
  c.use_treatment = name.find('a') != std::string_view::npos;
  c.use_outcome = name.find('o') != std::string_view::npos;
  if (name.empty() || name.find_first_not_of("bao") != std::string_view::npos)
    throw InvalidArgument("unknown treatment model variant: " + std::string(name));
  return c;
}

std::string TreatmentConfig::variant_name() const {
  std::string s;
  if (use_baseline) s += 'b';
  if (use_treatment) s += 'a';
  if (use_outcome) s += 'o';
  return s;
}

void TreatmentConfig::validate() const {
  if (use_treatment && q_a < 1) throw InvalidArgument("q_a must be >= 1");
  if (use_outcome && q_o < 1) throw InvalidArgument("q_o must be >= 1");
  if (!(beta0 >= 0.0)) throw InvalidArgument("beta0 must be >= 0");
  for (double v : {gamma_b, gamma_a, gamma_o, ell_b, ell_a, ell_ot, ell_om, ell_am, day_length})
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("kernel hyperparameters must be > 0");
  if (num_inducing < 1) throw InvalidArgument("num_inducing must be >= 1");
  if (jitter < 0.0) throw InvalidArgument("jitter must be >= 0");
}

TreatmentKernelParams TreatmentConfig::kernel_params() const {
  TreatmentKernelParams p;
  p.use_baseline = use_baseline;
  p.baseline_variance = gamma_b;
  p.baseline_lengthscale = ell_b;
  p.day_length = day_length;
  for (int i = 0; i < treatment_slots(); ++i)
    p.treatment_slots.push_back({gamma_a, ell_a, ell_am, treatment_use_mark});
  for (int i = 0; i < outcome_slots(); ++i)
    p.outcome_slots.push_back({gamma_o, ell_ot, ell_om, outcome_use_mark});
  return p;
}

// ---------------------------------------------------------------- retrieval

namespace {

template <class E>
void fill_slots(std::vector<EventSlot>& slots, const std::vector<E>& events, std::size_t end,
                double tau) {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (end < i + 1) {
      slots[i] = EventSlot{};
      continue;
    }
    const E& e = events[end - 1 - i];
    if constexpr (std::is_same_v<E, Treatment>)
      slots[i] = EventSlot::at(tau - e.time, e.dose);
    else
      slots[i] = EventSlot::at(tau - e.time, e.value);
  }
}

// Events strictly before tau, or at/before tau when `inclusive`.
RegressiveInput retrieve(const EventHistory& h, double tau, const TreatmentConfig& c,
                         bool inclusive) {
  RegressiveInput r;
  r.absolute_time = tau;
  r.treatments.resize(c.treatment_slots());
  r.outcomes.resize(c.outcome_slots());
  if (!r.treatments.empty()) {
    auto it = inclusive ? std::upper_bound(h.treatments.begin(), h.treatments.end(), tau,
                                           [](double t, const Treatment& a) { return t < a.time; })
                        : std::lower_bound(h.treatments.begin(), h.treatments.end(), tau,
                                           [](const Treatment& a, double t) { return a.time < t; });
    fill_slots(r.treatments, h.treatments, static_cast<std::size_t>(it - h.treatments.begin()), tau);
  }
  if (!r.outcomes.empty()) {
    auto it = inclusive ? std::upper_bound(h.outcomes.begin(), h.outcomes.end(), tau,
                                           [](double t, const Outcome& o) { return t < o.time; })
                        : std::lower_bound(h.outcomes.begin(), h.outcomes.end(), tau,
                                           [](const Outcome& o, double t) { return o.time < t; });
    fill_slots(r.outcomes, h.outcomes, static_cast<std::size_t>(it - h.outcomes.begin()), tau);
  }
  return r;
}

void check_sorted(const EventHistory& h) {
  for (std::size_t i = 1; i < h.treatments.size(); ++i)
    if (h.treatments[i].time < h.treatments[i - 1].time)
      throw InvalidArgument("treatment history is not sorted");
  for (std::size_t i = 1; i < h.outcomes.size(); ++i)
    if (h.outcomes[i].time < h.outcomes[i - 1].time)
      throw InvalidArgument("outcome history is not sorted");
}

}  // namespace

RegressiveInput retrieve_inputs(const EventHistory& history, double tau,
                                const TreatmentConfig& config) {
  if (!(tau >= 0.0)) throw InvalidArgument("retrieve_inputs: tau must be >= 0");
  check_sorted(history);
  return retrieve(history, tau, config, false);
}

// ---------------------------------------------------------------- inducing points

double inducing_kernel(const InducingPoint& a, const InducingPoint& b, const TreatmentConfig& c) {
  if (a.component != b.component || a.slot != b.slot) return 0.0;
  double d = a.time - b.time;
  switch (a.component) {
    case Component::Baseline:
      return c.gamma_b * se(d * d, c.ell_b);
    case Component::Treatment: {
      double v = c.gamma_a * se(d * d, c.ell_a);
      if (c.treatment_use_mark) {
        double dm = a.mark - b.mark;
        v *= se(dm * dm, c.ell_am);
      }
      return v;
    }
    case Component::Outcome: {
      double v = c.gamma_o * se(d * d, c.ell_ot);
      if (c.outcome_use_mark) {
        double dm = a.mark - b.mark;
        v *= se(dm * dm, c.ell_om);
      }
      return v;
    }
  }
  return 0.0;
}

Eigen::MatrixXd inducing_gram(const std::vector<InducingPoint>& z, const TreatmentConfig& c) {
  const long m = static_cast<long>(z.size());
  Eigen::MatrixXd k(m, m);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j <= i; ++j) k(i, j) = k(j, i) = inducing_kernel(z[i], z[j], c);
  return k;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - i) * (v[i + 1] - v[i]);
}

template <class E, class TimeOf, class MarkOf>
void add_slot_points(std::vector<InducingPoint>& z, Component comp, int slots, int m,
                     std::span<const Trajectory> data, double fallback_span,
                     const std::vector<E>& (*events)(const Trajectory&), TimeOf time_of,
                     MarkOf mark_of) {
  for (int q = 1; q <= slots; ++q) {
    std::vector<double> gaps, marks;
    for (const auto& tr : data) {
      const auto& ev = events(tr);
      for (std::size_t n = 0; n < ev.size(); ++n) {
        double t = time_of(ev[n]);
        if (t < tr.start || t > tr.end) continue;
        marks.push_back(mark_of(ev[n]));
        if (n >= static_cast<std::size_t>(q)) gaps.push_back(t - time_of(ev[n - q]));
      }
    }
    double span = gaps.empty() ? fallback_span : quantile(gaps, 0.95);
    if (!(span > 0.0)) span = fallback_span;
    double mlo = 0.0, mhi = 1.0;
    if (!marks.empty()) {
      mlo = *std::min_element(marks.begin(), marks.end());
      mhi = *std::max_element(marks.begin(), marks.end());
      if (mhi - mlo < 1e-9) {
        mlo -= 1.0;
        mhi += 1.0;
      }
    }
    auto ts = linspace(0.0, span, m);
    auto ms = linspace(mlo, mhi, m);
    for (int i = 0; i < m; ++i) z.push_back({comp, q - 1, ts[i], ms[i]});
  }
}

const std::vector<Treatment>& treatments_of(const Trajectory& t) { return t.history.treatments; }
const std::vector<Outcome>& outcomes_of(const Trajectory& t) { return t.history.outcomes; }

}  // namespace

std::vector<InducingPoint> place_inducing(const TreatmentConfig& c,
                                          std::span<const Trajectory> data) {
  c.validate();
  std::vector<InducingPoint> z;
  const int m = c.num_inducing;
  if (c.use_baseline)
    for (double t : linspace(0.0, c.day_length, m)) z.push_back({Component::Baseline, 0, t, 0.0});
  add_slot_points<Treatment>(z, Component::Treatment, c.treatment_slots(), m, data,
                             0.5 * c.day_length, &treatments_of,
                             [](const Treatment& a) { return a.time; },
                             [](const Treatment& a) { return a.dose; });
  add_slot_points<Outcome>(z, Component::Outcome, c.outcome_slots(), m, data, 1.0, &outcomes_of,
                           [](const Outcome& o) { return o.time; },
                           [](const Outcome& o) { return o.value; });
  if (z.empty()) throw InvalidArgument("treatment model has no active component");
  return z;
}

// ---------------------------------------------------------------- model

TreatmentModel::TreatmentModel(TreatmentConfig config, VariationalState state, MarkModel marks,
                               std::string label)
    : config_(std::move(config)),
      state_(std::move(state)),
      marks_(std::move(marks)),
      label_(std::move(label)) {
  config_.validate();
  if (label_.empty()) throw InvalidArgument("policy label must be nonempty");
  const long m = static_cast<long>(state_.z.size());
  if (m == 0) throw InvalidArgument("no inducing points");
  for (const auto& z : state_.z) {
    if ((z.component == Component::Baseline && !config_.use_baseline) ||
        (z.component == Component::Treatment && z.slot >= config_.treatment_slots()) ||
        (z.component == Component::Outcome && z.slot >= config_.outcome_slots()))
      throw InvalidArgument("inducing point for a disabled component");
  }
  if (state_.mean.size() != m || state_.cov_chol.rows() != m || state_.cov_chol.cols() != m)
    throw InvalidArgument("variational state dimension mismatch");
  kzz_ = inducing_gram(state_.z, config_);
  kzz_.diagonal().array() += config_.jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(kzz_);
  if (llt.info() != Eigen::Success) throw NumericalFailure("K_zz is not positive definite");
  lk_ = llt.matrixL();
  derive_whitened();
}

TreatmentModel::TreatmentModel(TreatmentConfig config, VariationalState state, MarkModel marks,
                               std::string label, Eigen::MatrixXd kzz, Eigen::MatrixXd lk)
    : config_(std::move(config)),
      state_(std::move(state)),
      marks_(std::move(marks)),
      label_(std::move(label)),
      kzz_(std::move(kzz)),
      lk_(std::move(lk)) {}

void TreatmentModel::derive_whitened() {
  auto L = lk_.triangularView<Eigen::Lower>();
  mw_ = L.solve(state_.mean);
  Eigen::MatrixXd lower = state_.cov_chol.triangularView<Eigen::Lower>();
  lw_ = L.solve(lower);
  lw_ = lw_.triangularView<Eigen::Lower>();
}

TreatmentModel TreatmentModel::with_whitened(const Eigen::VectorXd& mw,
                                             const Eigen::MatrixXd& lw) const {
  VariationalState s;
  s.z = state_.z;
  auto L = lk_.triangularView<Eigen::Lower>();
  s.mean = L * mw;
  Eigen::MatrixXd lwl = lw.triangularView<Eigen::Lower>();
  s.cov_chol = L * lwl;
  TreatmentModel out(config_, std::move(s), marks_, label_, kzz_, lk_);
  out.mw_ = mw;
  out.lw_ = lwl;
  return out;
}

Eigen::VectorXd TreatmentModel::cross_covariance(const RegressiveInput& x) const {
  const auto& c = config_;
  const long m = static_cast<long>(state_.z.size());
  Eigen::VectorXd k(m);
  const double tod = time_of_day(x.absolute_time, c.day_length);
  for (long j = 0; j < m; ++j) {
    const InducingPoint& z = state_.z[j];
    double v = 0.0;
    switch (z.component) {
      case Component::Baseline: {
        double d = tod - z.time;
        v = c.gamma_b * se(d * d, c.ell_b);
        break;
      }
      case Component::Treatment: {
        const EventSlot& s = x.treatments[z.slot];
        if (!s.present) break;
        double d = s.rel_time - z.time;
        v = c.gamma_a * se(d * d, c.ell_a);
        if (c.treatment_use_mark) {
          double dm = s.mark - z.mark;
          v *= se(dm * dm, c.ell_am);
        }
        break;
      }
      case Component::Outcome: {
        const EventSlot& s = x.outcomes[z.slot];
        if (!s.present) break;
        double d = s.rel_time - z.time;
        v = c.gamma_o * se(d * d, c.ell_ot);
        if (c.outcome_use_mark) {
          double dm = s.mark - z.mark;
          v *= se(dm * dm, c.ell_om);
        }
        break;
      }
    }
    k[j] = v;
  }
  return k;
}

double TreatmentModel::prior_variance(const RegressiveInput& x) const {
  double v = config_.use_baseline ? config_.gamma_b : 0.0;
  for (const auto& s : x.treatments)
    if (s.present) v += config_.gamma_a;
  for (const auto& s : x.outcomes)
    if (s.present) v += config_.gamma_o;
  return v;
}

LatentMoments TreatmentModel::latent_moments(const RegressiveInput& x) const {
  if (static_cast<int>(x.treatments.size()) != config_.treatment_slots() ||
      static_cast<int>(x.outcomes.size()) != config_.outcome_slots())
    throw InvalidArgument("regressive input slot counts do not match the model");
  Eigen::VectorXd v = lk_.triangularView<Eigen::Lower>().solve(cross_covariance(x));
  double mean = v.dot(mw_);
  Eigen::VectorXd w = lw_.triangularView<Eigen::Lower>().transpose() * v;
  double var = prior_variance(x) - v.squaredNorm() + w.squaredNorm();
  if (var < 0.0) {
    if (var < -1e-6 * std::max(1.0, prior_variance(x)))
      throw NumericalFailure("negative latent variance");
    var = 0.0;
  }
  return {mean, var};
}

double TreatmentModel::intensity_at(const RegressiveInput& x) const {
  auto [mu, var] = latent_moments(x);
  double b = config_.beta0 + mu;
  return b * b + var;
}

double TreatmentModel::intensity(const EventHistory& history, double t) const {
  if (!(t >= 0.0)) throw InvalidArgument("intensity: tau must be >= 0");
  return intensity_at(retrieve(history, t, config_, false));
}

double TreatmentModel::sample_mark(double t, RandomStream& rng) const {
  return marks_.sample(t, rng);
}

TreatmentModel prior_model(const TreatmentConfig& config, std::vector<InducingPoint> z,
                           MarkModel marks, std::string label) {
  VariationalState s;
  s.z = std::move(z);
  Eigen::MatrixXd k = inducing_gram(s.z, config);
  k.diagonal().array() += config.jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalFailure("K_zz is not positive definite");
  s.mean = Eigen::VectorXd::Zero(k.rows());
  s.cov_chol = llt.matrixL();
  return TreatmentModel(config, std::move(s), std::move(marks), std::move(label));
}

// ---------------------------------------------------------------- interval integrals

namespace {

// erf(y) - erf(x), y >= x, without cancellation in the tails.
double erf_diff(double x, double y) {
  if (x >= 0.0) return std::erfc(x) - std::erfc(y);
  if (y <= 0.0) return std::erfc(-y) - std::erfc(-x);
  return std::erf(y) - std::erf(x);
}

// Integral over [a, b] of exp(-(t - c)^2 / d).
double gauss_integral(double a, double b, double c, double d) {
  double s = std::sqrt(d);
  return 0.5 * std::sqrt(std::numbers::pi) * s * erf_diff((a - c) / s, (b - c) / s);
}

// Integral over [a, b] of exp(-(t - c1)^2 / d1 - (t - c2)^2 / d2).
double gauss_product_integral(double a, double b, double c1, double d1, double c2, double d2) {
  double p = 1.0 / d1 + 1.0 / d2;
  double mu = (c1 / d1 + c2 / d2) / p;
  double dc = c1 - c2;
  double pre = std::exp(-dc * dc / (d1 + d2));
  if (pre == 0.0) return 0.0;
  double sp = std::sqrt(p);
  return pre * 0.5 * std::sqrt(std::numbers::pi / p) * erf_diff(sp * (a - mu), sp * (b - mu));
}

struct GaussTerm {
  double coef = 0.0;
  double center = 0.0;
  double denom = 1.0;
};

// K(z_j, r(tau)) = coef_j exp(-(tau - center_j)^2 / denom_j) on an interval with
// no events inside; `anchors` holds the slots retrieved at the interval start.
std::vector<GaussTerm> interval_terms(const TreatmentModel& model, const RegressiveInput& anchors,
                                      double day_start) {
  const auto& c = model.config();
  const auto& zs = model.state().z;
  std::vector<GaussTerm> terms(zs.size());
  const double a = anchors.absolute_time;
  for (std::size_t j = 0; j < zs.size(); ++j) {
    const InducingPoint& z = zs[j];
    GaussTerm& g = terms[j];
    switch (z.component) {
      case Component::Baseline:
        g = {c.gamma_b, day_start + z.time, c.ell_b};
        break;
      case Component::Treatment: {
        const EventSlot& s = anchors.treatments[z.slot];
        if (!s.present) break;
        double coef = c.gamma_a;
        if (c.treatment_use_mark) {
          double dm = s.mark - z.mark;
          coef *= se(dm * dm, c.ell_am);
        }
        g = {coef, a - s.rel_time + z.time, c.ell_a};
        break;
      }
      case Component::Outcome: {
        const EventSlot& s = anchors.outcomes[z.slot];
        if (!s.present) break;
        double coef = c.gamma_o;
        if (c.outcome_use_mark) {
          double dm = s.mark - z.mark;
          coef *= se(dm * dm, c.ell_om);
        }
        g = {coef, a - s.rel_time + z.time, c.ell_ot};
        break;
      }
    }
  }
  return terms;
}

struct IntervalStats {
  Eigen::VectorXd phi;
  Eigen::MatrixXd psi;
  double kxx_int = 0.0;
};

void accumulate_phi(const std::vector<GaussTerm>& terms, double a, double b, Eigen::VectorXd& phi) {
  for (std::size_t j = 0; j < terms.size(); ++j)
    if (terms[j].coef != 0.0)
      phi[j] += terms[j].coef * gauss_integral(a, b, terms[j].center, terms[j].denom);
}

void accumulate_psi(const std::vector<GaussTerm>& terms, double a, double b, Eigen::MatrixXd& psi,
                    bool parallel) {
  const long m = static_cast<long>(terms.size());
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (long i = 0; i < m; ++i) {
    if (terms[i].coef == 0.0) continue;
    for (long j = 0; j <= i; ++j) {
      if (terms[j].coef == 0.0) continue;
      double v = terms[i].coef * terms[j].coef *
                 gauss_product_integral(a, b, terms[i].center, terms[i].denom, terms[j].center,
                                        terms[j].denom);
      psi(i, j) += v;
      if (i != j) psi(j, i) += v;
    }
  }
}

double day_start_of(double a, double day_length) { return std::floor(a / day_length) * day_length; }

void check_frozen(const EventHistory& h, double a, double b) {
  if (!(a <= b)) throw InvalidArgument("interval end precedes start");
  check_sorted(h);
  for (const auto& t : h.treatments)
    if (t.time > a && t.time < b) throw InvalidArgument("treatment inside integration interval");
  for (const auto& o : h.outcomes)
    if (o.time > a && o.time < b) throw InvalidArgument("outcome inside integration interval");
}

// Calls fn(lo, hi, terms) for each day-aligned piece of [a, b].
template <class Fn>
void for_each_piece(const TreatmentModel& model, double a, double b, const EventHistory& frozen,
                    Fn&& fn) {
  const double T = model.config().day_length;
  double lo = a;
  while (lo < b) {
    double ds = day_start_of(lo, T);
    double hi = std::min(b, ds + T);
    RegressiveInput anchors = retrieve(frozen, lo, model.config(), true);
    fn(lo, hi, interval_terms(model, anchors, ds), anchors);
    if (hi <= lo) break;
    lo = hi;
  }
}

}  // namespace

Eigen::VectorXd phi_vector(const TreatmentModel& model, double a, double b,
                           const EventHistory& frozen) {
  check_frozen(frozen, a, b);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(model.num_inducing());
  for_each_piece(model, a, b, frozen,
                 [&](double lo, double hi, const std::vector<GaussTerm>& terms,
                     const RegressiveInput&) { accumulate_phi(terms, lo, hi, phi); });
  return phi;
}

Eigen::MatrixXd psi_matrix(const TreatmentModel& model, double a, double b,
                           const EventHistory& frozen) {
  check_frozen(frozen, a, b);
  const long m = static_cast<long>(model.num_inducing());
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(m, m);
  for_each_piece(model, a, b, frozen,
                 [&](double lo, double hi, const std::vector<GaussTerm>& terms,
                     const RegressiveInput&) { accumulate_psi(terms, lo, hi, psi, true); });
  return psi;
}

namespace reference {
Eigen::MatrixXd psi_matrix(const TreatmentModel& model, double a, double b,
                           const EventHistory& frozen) {
  check_frozen(frozen, a, b);
  const long m = static_cast<long>(model.num_inducing());
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(m, m);
  for_each_piece(model, a, b, frozen,
                 [&](double lo, double hi, const std::vector<GaussTerm>& terms,
                     const RegressiveInput&) { accumulate_psi(terms, lo, hi, psi, false); });
  return psi;
}
}  // namespace reference

// ---------------------------------------------------------------- ELBO

namespace {

struct ElboStats {
  Eigen::MatrixXd kzx;  // M x N, one column per treatment event
  Eigen::VectorXd kxx;
  Eigen::MatrixXd psi;
  Eigen::VectorXd phi;
  double kxx_int = 0.0;
  double length = 0.0;
};

ElboStats trajectory_stats(const TreatmentModel& model, const Trajectory& tr) {
  const auto& h = tr.history;
  check_sorted(h);
  if (!(tr.start <= tr.end)) throw InvalidArgument("trajectory window is empty");
  const long m = static_cast<long>(model.num_inducing());
  const double T = model.config().day_length;
  ElboStats st;
  st.psi = Eigen::MatrixXd::Zero(m, m);
  st.phi = Eigen::VectorXd::Zero(m);
  st.length = tr.end - tr.start;

  std::vector<double> cuts{tr.start, tr.end};
  for (const auto& a : h.treatments)
    if (a.time > tr.start && a.time < tr.end) cuts.push_back(a.time);
  for (const auto& o : h.outcomes)
    if (o.time > tr.start && o.time < tr.end) cuts.push_back(o.time);
  for (double d = day_start_of(tr.start, T) + T; d < tr.end; d += T) cuts.push_back(d);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i], hi = cuts[i + 1];
    RegressiveInput anchors = retrieve(h, lo, model.config(), true);
    auto terms = interval_terms(model, anchors, day_start_of(lo, T));
    accumulate_phi(terms, lo, hi, st.phi);
    accumulate_psi(terms, lo, hi, st.psi, false);
    st.kxx_int += (hi - lo) * model.prior_variance(anchors);
  }

  std::vector<long> idx;
  for (std::size_t n = 0; n < h.treatments.size(); ++n)
    if (h.treatments[n].time >= tr.start && h.treatments[n].time <= tr.end)
      idx.push_back(static_cast<long>(n));
  st.kzx.resize(m, static_cast<long>(idx.size()));
  st.kxx.resize(static_cast<long>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    RegressiveInput x = retrieve(h, h.treatments[idx[k]].time, model.config(), false);
    st.kzx.col(static_cast<long>(k)) = model.cross_covariance(x);
    st.kxx[static_cast<long>(k)] = model.prior_variance(x);
  }
  return st;
}

// Everything in whitened coordinates.
struct WhitenedStats {
  Eigen::MatrixXd a;    // L^-1 K_zx
  Eigen::VectorXd kxx;
  Eigen::MatrixXd psi;  // L^-1 Psi L^-T
  Eigen::VectorXd phi;  // L^-1 Phi
  double kxx_int = 0.0;
  double length = 0.0;
};

WhitenedStats collect_stats(const TreatmentModel& model, std::span<const Trajectory> data) {
  if (data.empty()) throw InvalidArgument("empty dataset");
  const long nt = static_cast<long>(data.size());
  std::vector<ElboStats> per(data.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < nt; ++i) per[i] = trajectory_stats(model, data[i]);

  const long m = static_cast<long>(model.num_inducing());
  long n = 0;
  for (const auto& s : per) n += s.kzx.cols();
  ElboStats tot;
  tot.kzx.resize(m, n);
  tot.kxx.resize(n);
  tot.psi = Eigen::MatrixXd::Zero(m, m);
  tot.phi = Eigen::VectorXd::Zero(m);
  long off = 0;
  for (const auto& s : per) {  // ordered reduction
    tot.kzx.middleCols(off, s.kzx.cols()) = s.kzx;
    tot.kxx.segment(off, s.kxx.size()) = s.kxx;
    off += s.kzx.cols();
    tot.psi += s.psi;
    tot.phi += s.phi;
    tot.kxx_int += s.kxx_int;
    tot.length += s.length;
  }
  auto L = model.kzz_chol().triangularView<Eigen::Lower>();
  WhitenedStats w;
  w.a = L.solve(tot.kzx);
  w.kxx = tot.kxx;
  Eigen::MatrixXd tmp = L.solve(tot.psi);
  w.psi = L.solve(tmp.transpose()).transpose();
  w.psi = 0.5 * (w.psi + w.psi.transpose());
  w.phi = L.solve(tot.phi);
  w.kxx_int = tot.kxx_int;
  w.length = tot.length;
  return w;
}

struct ElboEval {
  ElboTerms terms;
  Eigen::VectorXd g_mean;
  Eigen::MatrixXd g_chol;
};

ElboEval evaluate_elbo(const WhitenedStats& s, double beta, const Eigen::VectorXd& mw,
                       const Eigen::MatrixXd& lw, bool with_kl, bool with_grad) {
  const long m = mw.size();
  const long n = s.a.cols();
  ElboEval out;
  // data term
  Eigen::VectorXd mu = s.a.transpose() * mw;
  Eigen::MatrixXd lta = lw.transpose() * s.a;  // M x N
  Eigen::VectorXd gmu(n), gv(n);
  double data = 0.0;
  for (long k = 0; k < n; ++k) {
    double var = s.kxx[k] - s.a.col(k).squaredNorm() + lta.col(k).squaredNorm();
    LogSquareMoments e = expected_log_square_grad(beta + mu[k], var);
    data += e.value;
    gmu[k] = e.d_mean;
    gv[k] = e.d_variance;
  }
  // integral term
  Eigen::VectorXd psim = s.psi * mw;
  Eigen::MatrixXd psil = s.psi * lw;
  double integral = mw.dot(psim) + 2.0 * beta * s.phi.dot(mw) + beta * beta * s.length +
                    s.kxx_int - s.psi.trace() + (lw.transpose() * psil).trace();
  double kl = 0.0;
  if (with_kl) {
    double logdet = 0.0;
    for (long i = 0; i < m; ++i) logdet += std::log(std::abs(lw(i, i)));
    kl = 0.5 * (lw.squaredNorm() + mw.squaredNorm() - static_cast<double>(m)) - logdet;
  }
  out.terms = {data, integral, kl};
  if (with_grad) {
    out.g_mean = s.a * gmu - 2.0 * psim - 2.0 * beta * s.phi;
    Eigen::MatrixXd ag = s.a * gv.asDiagonal();
    out.g_chol = 2.0 * (ag * s.a.transpose()) * lw - 2.0 * psil;
    if (with_kl) {
      out.g_mean -= mw;
      out.g_chol -= lw;
      for (long i = 0; i < m; ++i) out.g_chol(i, i) += 1.0 / lw(i, i);
    }
    out.g_chol = out.g_chol.triangularView<Eigen::Lower>();
  }
  return out;
}

long packed_size(long m) { return m + m * (m + 1) / 2; }

Eigen::VectorXd pack(const Eigen::VectorXd& mw, const Eigen::MatrixXd& lw) {
  const long m = mw.size();
  Eigen::VectorXd x(packed_size(m));
  x.head(m) = mw;
  long k = m;
  for (long j = 0; j < m; ++j)
    for (long i = j; i < m; ++i) x[k++] = lw(i, j);
  return x;
}

void unpack(const Eigen::VectorXd& x, long m, Eigen::VectorXd& mw, Eigen::MatrixXd& lw) {
  mw = x.head(m);
  lw = Eigen::MatrixXd::Zero(m, m);
  long k = m;
  for (long j = 0; j < m; ++j)
    for (long i = j; i < m; ++i) lw(i, j) = x[k++];
}

}  // namespace

ElboTerms elbo_terms(const TreatmentModel& model, std::span<const Trajectory> data) {
  WhitenedStats s = collect_stats(model, data);
  return evaluate_elbo(s, model.config().beta0, model.whitened_mean(), model.whitened_chol(), true,
                       false)
      .terms;
}

double elbo(const TreatmentModel& model, std::span<const Trajectory> data) {
  return elbo_terms(model, data).total();
}

double test_log_likelihood_bound(const TreatmentModel& model, const Trajectory& heldout) {
  WhitenedStats s = collect_stats(model, std::span<const Trajectory>(&heldout, 1));
  auto t = evaluate_elbo(s, model.config().beta0, model.whitened_mean(), model.whitened_chol(),
                         false, false)
               .terms;
  return t.data - t.integral;
}

TreatmentFitResult fit_treatment_model(const TreatmentModel& init,
                                       std::span<const Trajectory> data,
                                       const TreatmentFitOptions& opt) {
  WhitenedStats s = collect_stats(init, data);
  const long m = static_cast<long>(init.num_inducing());
  const double beta = init.config().beta0;
  if (opt.max_iters <= 0) {
    double v = evaluate_elbo(s, beta, init.whitened_mean(), init.whitened_chol(), true, false)
                   .terms.total();
    return {init, {v}};
  }
  int calls = 0;
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    ++calls;
    Eigen::VectorXd mw;
    Eigen::MatrixXd lw;
    unpack(x, m, mw, lw);
    for (long i = 0; i < m; ++i)
      if (lw(i, i) == 0.0) return -std::numeric_limits<double>::infinity();
    ElboEval e = evaluate_elbo(s, beta, mw, lw, true, true);
    grad = pack(e.g_mean, e.g_chol);
    return e.terms.total();
  };
  OptimizeOptions oo;
  oo.max_iters = opt.max_iters;
  oo.initial_step = opt.step_size;
  oo.grad_tol = 1e-6;
  oo.value_tol = 1e-12;
  OptimizeResult r;
  try {
    r = maximize(f, pack(init.whitened_mean(), init.whitened_chol()), oo);
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(std::string("treatment fit: ") + e.what());
  }
  Eigen::VectorXd mw;
  Eigen::MatrixXd lw;
  unpack(r.x, m, mw, lw);
  return {init.with_whitened(mw, lw), r.trace};
}

TreatmentModel train_treatment_model(const TreatmentConfig& config,
                                     std::span<const Trajectory> data, std::string label,
                                     const TreatmentFitOptions& opt) {
  TreatmentModel init =
      prior_model(config, place_inducing(config, data), fit_mark_model(data, config.day_length),
                  std::move(label));
  return fit_treatment_model(init, data, opt).model;
}

ConstantRatePolicy fit_constant_rate(std::span<const Trajectory> data, std::string label) {
  if (data.empty()) throw InvalidArgument("empty dataset");
  double n = 0.0, len = 0.0;
  for (const auto& tr : data) {
    len += tr.end - tr.start;
    for (const auto& a : tr.history.treatments)
      if (a.time >= tr.start && a.time <= tr.end) n += 1.0;
  }
  if (!(len > 0.0)) throw InvalidArgument("dataset has zero total length");
  return ConstantRatePolicy(n / len, fit_mark_model(data), std::move(label));
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const TreatmentConfig& c) {
  j = {{"variant", c.variant_name()},
       {"q_a", c.q_a},
       {"q_o", c.q_o},
       {"beta0", c.beta0},
       {"gamma_b", c.gamma_b},
       {"gamma_a", c.gamma_a},
       {"gamma_o", c.gamma_o},
       {"ell_b", c.ell_b},
       {"ell_a", c.ell_a},
       {"ell_ot", c.ell_ot},
       {"ell_om", c.ell_om},
       {"ell_am", c.ell_am},
       {"treatment_use_mark", c.treatment_use_mark},
       {"outcome_use_mark", c.outcome_use_mark},
       {"num_inducing", c.num_inducing},
       {"day_length", c.day_length},
       {"jitter", c.jitter}};
}

void from_json(const nlohmann::json& j, TreatmentConfig& c) {
  c = TreatmentConfig::variant(j.value("variant", std::string("bao")));
  c.q_a = j.value("q_a", c.q_a);
  c.q_o = j.value("q_o", c.q_o);
  c.beta0 = j.value("beta0", c.beta0);
  c.gamma_b = j.value("gamma_b", c.gamma_b);
  c.gamma_a = j.value("gamma_a", c.gamma_a);
  c.gamma_o = j.value("gamma_o", c.gamma_o);
  c.ell_b = j.value("ell_b", c.ell_b);
  c.ell_a = j.value("ell_a", c.ell_a);
  c.ell_ot = j.value("ell_ot", c.ell_ot);
  c.ell_om = j.value("ell_om", c.ell_om);
  c.ell_am = j.value("ell_am", c.ell_am);
  c.treatment_use_mark = j.value("treatment_use_mark", c.treatment_use_mark);
  c.outcome_use_mark = j.value("outcome_use_mark", c.outcome_use_mark);
  c.num_inducing = j.value("num_inducing", c.num_inducing);
  c.day_length = j.value("day_length", c.day_length);
  c.jitter = j.value("jitter", c.jitter);
  c.validate();
}

nlohmann::json treatment_model_to_json(const TreatmentModel& m) {
  nlohmann::json z = nlohmann::json::array();
  for (const auto& p : m.state().z)
    z.push_back({{"component", static_cast<int>(p.component)},
                 {"slot", p.slot},
                 {"time", p.time},
                 {"mark", p.mark}});
  const auto& L = m.state().cov_chol;
  nlohmann::json chol = nlohmann::json::array();
  for (long i = 0; i < L.rows(); ++i)
    for (long j = 0; j <= i; ++j) chol.push_back(L(i, j));
  std::vector<double> mean(m.state().mean.data(), m.state().mean.data() + m.state().mean.size());
  return {{"config", m.config()},   {"Z", z},
          {"m_vec", mean},          {"S_chol", chol},
          {"mark_model", m.mark_model()}, {"policy_label", m.label()}};
}

TreatmentModel treatment_model_from_json(const nlohmann::json& j) {
  TreatmentConfig c = j.at("config").get<TreatmentConfig>();
  VariationalState s;
  for (const auto& p : j.at("Z")) {
    int comp = p.at("component").get<int>();
    if (comp < 0 || comp > 2) throw InvalidArgument("bad inducing component");
    s.z.push_back({static_cast<Component>(comp), p.at("slot").get<int>(),
                   p.at("time").get<double>(), p.at("mark").get<double>()});
  }
  auto mean = j.at("m_vec").get<std::vector<double>>();
  const long m = static_cast<long>(s.z.size());
  if (static_cast<long>(mean.size()) != m) throw InvalidArgument("m_vec length mismatch");
  s.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), m);
  auto chol = j.at("S_chol").get<std::vector<double>>();
  if (static_cast<long>(chol.size()) != m * (m + 1) / 2) throw InvalidArgument("S_chol size mismatch");
  s.cov_chol = Eigen::MatrixXd::Zero(m, m);
  long k = 0;
  for (long i = 0; i < m; ++i)
    for (long jj = 0; jj <= i; ++jj) s.cov_chol(i, jj) = chol[k++];
  return TreatmentModel(c, std::move(s), j.at("mark_model").get<MarkModel>(),
                        j.at("policy_label").get<std::string>());
}

}  // namespace tpcausal
