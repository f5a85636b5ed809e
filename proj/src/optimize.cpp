#include "tpcausal/optimize.hpp"

#include <cmath>
#include <deque>
#include <string>

#include "tpcausal/errors.hpp"

namespace tpcausal {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

OptimizeResult maximize(const Objective& f, Eigen::VectorXd x0, const OptimizeOptions& opt,
                        const std::optional<Eigen::VectorXd>& lower,
                        const std::optional<Eigen::VectorXd>& upper) {
  const long n = x0.size();
  auto project = [&](Eigen::VectorXd& x) {
    if (lower) x = x.cwiseMax(*lower);
    if (upper) x = x.cwiseMin(*upper);
  };
  project(x0);

  OptimizeResult res;
  res.x = x0;
  if (opt.max_iters <= 0) {
    Eigen::VectorXd g(n);
    res.value = f(x0, g);
    res.trace.push_back(res.value);
    return res;
  }

  // Internally minimise phi = -f.
  Eigen::VectorXd x = x0, g(n);
  double phi = -f(x, g);
  g = -g;
  if (!std::isfinite(phi) || !all_finite(g))
    throw NumericalFailure("objective not finite at iteration 0");
  res.trace.push_back(-phi);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto free_mask = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& gg) {
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
    for (long i = 0; i < n; ++i) {
      if (lower && xx[i] <= (*lower)[i] && gg[i] > 0.0) mask[i] = 0.0;
      if (upper && xx[i] >= (*upper)[i] && gg[i] < 0.0) mask[i] = 0.0;
    }
    return mask;
  };

  int it = 0;
  for (; it < opt.max_iters; ++it) {
    Eigen::VectorXd mask = free_mask(x, g);
    Eigen::VectorXd pg = g.cwiseProduct(mask);
    if (pg.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd q = pg;
    std::vector<double> alpha(s_hist.size());
    for (long k = static_cast<long>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      double beta = rho_hist[k] * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Eigen::VectorXd d = -q.cwiseProduct(mask);
    if (d.dot(pg) >= 0.0) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -pg;
    }

    double t = 1.0;
    if (s_hist.empty()) t = std::min(1.0, opt.initial_step / std::max(d.norm(), 1e-300));

    bool accepted = false;
    Eigen::VectorXd xn, gn(n);
    double phin = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + t * d;
      project(xn);
      Eigen::VectorXd step = xn - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      phin = -f(xn, gn);
      gn = -gn;
      if (std::isfinite(phin) && all_finite(gn) && phin < phi &&
          phin <= phi + 1e-4 * g.dot(step)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd s = xn - x, y = gn - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    double dphi = phi - phin;
    x = xn;
    g = gn;
    phi = phin;
    res.trace.push_back(-phi);
    if (dphi < opt.value_tol * (1.0 + std::abs(phi))) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.x = x;
  res.value = -phi;
  res.iterations = it;
  return res;
}

}  // namespace tpcausal
