#pragma once

// Hand-written kernels and dense GP formulas used as references for the
// treatment, mark and outcome models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "tpcausal/history.hpp"
#include "tpcausal/outcome_model.hpp"
#include "tpcausal/treatment_model.hpp"

namespace oracle {

inline double tod(double t, double T) {
  double r = std::fmod(t, T);
  return r < 0.0 ? r + T : r;
}

// K(z, r(tau)) written out from the kernel definition: scan for the i-th most
// recent event strictly before tau.
inline double treatment_kernel(const tpcausal::InducingPoint& z, const tpcausal::TreatmentConfig& c,
                               const tpcausal::EventHistory& h, double tau) {
  using tpcausal::Component;
  if (z.component == Component::Baseline) {
    double d = tod(tau, c.day_length) - z.time;
    return c.gamma_b * std::exp(-d * d / c.ell_b);
  }
  // Linear scan, no allocation: the oracle runs inside adaptive quadrature.
  double t = 0.0, m = 0.0;
  int seen = 0;
  bool found = false;
  if (z.component == Component::Treatment) {
    for (auto it = h.treatments.rbegin(); it != h.treatments.rend(); ++it)
      if (it->time < tau && seen++ == z.slot) {
        t = it->time, m = it->dose, found = true;
        break;
      }
  } else {
    for (auto it = h.outcomes.rbegin(); it != h.outcomes.rend(); ++it)
      if (it->time < tau && seen++ == z.slot) {
        t = it->time, m = it->value, found = true;
        break;
      }
  }
  if (!found) return 0.0;
  double d = (tau - t) - z.time, dm = m - z.mark;
  if (z.component == Component::Treatment) {
    double v = c.gamma_a * std::exp(-d * d / c.ell_a);
    if (c.treatment_use_mark) v *= std::exp(-dm * dm / c.ell_am);
    return v;
  }
  double v = c.gamma_o * std::exp(-d * d / c.ell_ot);
  if (c.outcome_use_mark) v *= std::exp(-dm * dm / c.ell_om);
  return v;
}

inline double treatment_prior_variance(const tpcausal::TreatmentConfig& c,
                                       const tpcausal::EventHistory& h, double tau) {
  double v = c.use_baseline ? c.gamma_b : 0.0;
  int na = 0, no = 0;
  for (const auto& a : h.treatments) na += a.time < tau;
  for (const auto& o : h.outcomes) no += o.time < tau;
  v += c.gamma_a * std::min(na, c.treatment_slots());
  v += c.gamma_o * std::min(no, c.outcome_slots());
  return v;
}

inline Eigen::VectorXd treatment_cross(const tpcausal::TreatmentModel& m,
                                       const tpcausal::EventHistory& h, double tau) {
  const auto& z = m.state().z;
  Eigen::VectorXd k(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) k[j] = treatment_kernel(z[j], m.config(), h, tau);
  return k;
}

// Phi and Psi by quadrature over [a, b], split at day boundaries.
inline Eigen::VectorXd phi_quadrature(const tpcausal::TreatmentModel& m, double a, double b,
                                      const tpcausal::EventHistory& h) {
  const auto& z = m.state().z;
  std::vector<double> breaks;
  const double T = m.config().day_length;
  for (double d = std::ceil(a / T) * T; d < b; d += T) breaks.push_back(d);
  Eigen::VectorXd out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j)
    out[j] = integrate([&](double t) { return treatment_kernel(z[j], m.config(), h, t); }, a, b,
                       breaks);
  return out;
}

inline Eigen::MatrixXd psi_quadrature(const tpcausal::TreatmentModel& m, double a, double b,
                                      const tpcausal::EventHistory& h) {
  const auto& z = m.state().z;
  std::vector<double> breaks;
  const double T = m.config().day_length;
  for (double d = std::ceil(a / T) * T; d < b; d += T) breaks.push_back(d);
  const long n = static_cast<long>(z.size());
  Eigen::MatrixXd out(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j <= i; ++j)
      out(i, j) = out(j, i) = integrate(
          [&](double t) {
            return treatment_kernel(z[i], m.config(), h, t) * treatment_kernel(z[j], m.config(), h, t);
          },
          a, b, breaks);
  return out;
}

// Three-term latent moments with explicit inverses.
inline std::pair<double, double> dense_latent_moments(const tpcausal::TreatmentModel& m,
                                                      const tpcausal::EventHistory& h, double tau) {
  const auto& c = m.config();
  const auto& z = m.state().z;
  const long n = static_cast<long>(z.size());
  Eigen::MatrixXd kzz(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      const auto &a = z[i], &b = z[j];
      double v = 0.0;
      if (a.component == b.component && a.slot == b.slot) {
        double d = a.time - b.time, dm = a.mark - b.mark;
        switch (a.component) {
          case tpcausal::Component::Baseline:
            v = c.gamma_b * std::exp(-d * d / c.ell_b);
            break;
          case tpcausal::Component::Treatment:
            v = c.gamma_a * std::exp(-d * d / c.ell_a);
            if (c.treatment_use_mark) v *= std::exp(-dm * dm / c.ell_am);
            break;
          case tpcausal::Component::Outcome:
            v = c.gamma_o * std::exp(-d * d / c.ell_ot);
            if (c.outcome_use_mark) v *= std::exp(-dm * dm / c.ell_om);
            break;
        }
      }
      kzz(i, j) = v + (i == j ? c.jitter : 0.0);
    }
  Eigen::MatrixXd inv = kzz.inverse();
  Eigen::VectorXd k = treatment_cross(m, h, tau);
  Eigen::MatrixXd S = m.state().cov();
  double mean = k.dot(inv * m.state().mean);
  double var = treatment_prior_variance(c, h, tau) - k.dot(inv * k) + k.dot(inv * S * inv * k);
  return {mean, var};
}

// Periodic kernel on time of day, written out.
inline double periodic(double d, double var, double ell, double period) {
  double s = std::sin(std::numbers::pi * std::abs(d) / period);
  return var * std::exp(-2.0 * s * s / (ell * ell));
}

// Outcome latent covariance: periodic baseline plus the summed response terms.
inline double outcome_kernel(double t, double u, const std::vector<tpcausal::Treatment>& a,
                             const tpcausal::PatientOutcomeParams& p,
                             const tpcausal::ResponseParams& r) {
  double k = periodic(t - u, p.baseline.periodic_variance, p.baseline.periodic_lengthscale,
                      p.baseline.period);
  for (const auto& x : a)
    for (const auto& y : a) {
      double dx = t - x.time, dy = u - y.time;
      if (dx < 0.0 || dx > r.window || dy < 0.0 || dy > r.window) continue;
      double sx = p.beta0 + p.beta1 * x.dose, sy = p.beta0 + p.beta1 * y.dose;
      double e = dx - dy;
      k += sx * sy * std::exp(-e * e / (r.shape_lengthscale * r.shape_lengthscale));
    }
  return k;
}

struct IntervalInstance {
  tpcausal::TreatmentModel model;
  tpcausal::EventHistory history;
  double a, b;
};

// Random model, history on two days and an event-free interval, which may
// cross midnight.
inline IntervalInstance random_interval_instance(std::uint64_t seed) {
  using namespace tpcausal;
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* names[] = {"b", "ba", "bo", "ao", "bao"};
  TreatmentConfig c = TreatmentConfig::variant(names[g() % 5]);
  c.q_a = 1 + static_cast<int>(g() % 2);
  c.q_o = 1 + static_cast<int>(g() % 2);
  c.treatment_use_mark = u(g) < 0.5;
  c.outcome_use_mark = u(g) < 0.7;
  c.ell_b = 2.0 + 10.0 * u(g);
  c.ell_a = 0.3 + 2.0 * u(g);
  c.ell_ot = 5.0 + 100.0 * u(g);
  c.ell_om = 0.5 + 3.0 * u(g);
  c.ell_am = 50.0 + 200.0 * u(g);
  c.num_inducing = 2 + static_cast<int>(g() % 4);

  EventHistory h;
  int na = static_cast<int>(g() % 8);
  std::vector<double> ts;
  for (int i = 0; i < na; ++i) ts.push_back(48.0 * u(g));
  std::sort(ts.begin(), ts.end());
  for (double t : ts) h.treatments.push_back({t, 20.0 + 40.0 * u(g)});
  double step = 0.6 + 2.0 * u(g);
  for (double t = step * u(g); t < 48.0; t += step) h.outcomes.push_back({t, 4.0 + 6.0 * u(g)});

  std::vector<InducingPoint> z;
  const int m = c.num_inducing;
  if (c.use_baseline)
    for (int i = 0; i < m; ++i) z.push_back({Component::Baseline, 0, 24.0 * (i + u(g)) / m, 0.0});
  for (int s = 0; s < c.treatment_slots(); ++s)
    for (int i = 0; i < m; ++i)
      z.push_back({Component::Treatment, s, 6.0 * (i + u(g)) / m, 20.0 + 40.0 * u(g)});
  for (int s = 0; s < c.outcome_slots(); ++s)
    for (int i = 0; i < m; ++i)
      z.push_back({Component::Outcome, s, 3.0 * (i + u(g)) / m, 4.0 + 6.0 * u(g)});
  TreatmentModel prior = prior_model(c, z, MarkModel{}, "rand");
  const long n = static_cast<long>(z.size());
  Eigen::VectorXd mw(n);
  Eigen::MatrixXd lw = Eigen::MatrixXd::Zero(n, n);
  std::normal_distribution<double> nd;
  for (long i = 0; i < n; ++i) {
    mw[i] = nd(g);
    for (long j = 0; j < i; ++j) lw(i, j) = 0.3 * nd(g);
    lw(i, i) = 0.2 + u(g);
  }
  TreatmentModel model = prior.with_whitened(mw, lw);

  std::vector<double> cuts{0.0, 48.0};
  for (const auto& a : h.treatments) cuts.push_back(a.time);
  for (const auto& o : h.outcomes) cuts.push_back(o.time);
  std::sort(cuts.begin(), cuts.end());
  // Prefer the gap around midnight now and then so day splitting is covered.
  std::size_t k = g() % (cuts.size() - 1);
  if (u(g) < 0.2)
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      if (cuts[i] <= 24.0 && cuts[i + 1] > 24.0) k = i;
  double lo = cuts[k], hi = cuts[k + 1];
  double a = lo + (hi - lo) * (u(g) < 0.5 ? 0.0 : 0.3 * u(g));
  double b = hi - (hi - a) * (u(g) < 0.5 ? 0.0 : 0.3 * u(g));
  return {model, h, a, b};
}

}  // namespace oracle
