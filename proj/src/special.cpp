#include "tpcausal/special.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "tpcausal/errors.hpp"

namespace tpcausal {

namespace {

constexpr int kNodes = 4096;

// E[log z^2], z ~ N(a, 1), a >= 0.
double log_square_unit(double a) {
  boost::math::quadrature::tanh_sinh<double> ts;
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto f = [&](double z) {
    if (z == 0.0) return 0.0;
    double e = z - a;
    return 2.0 * std::log(std::abs(z)) * c * std::exp(-0.5 * e * e);
  };
  const double tail = 40.0;
  double total = 0.0;
  if (a < tail) total += ts.integrate(f, -tail, 0.0);
  if (a > 0.0) total += ts.integrate(f, 0.0, a);
  total += ts.integrate(f, a, a + tail);
  return total;
}

struct Table {
  double du;
  std::vector<double> g;
  std::vector<double> dg;  // dg/dx at the nodes

  Table() {
    const double umax = std::log1p(kLogSquareTableMax);
    du = umax / (kNodes - 1);
    g.resize(kNodes);
    dg.resize(kNodes);
    const double base = std::log(0.5) - kEulerGamma;
    for (int i = 0; i < kNodes; ++i) {
      double x = std::expm1(i * du);
      if (i == kNodes - 1) x = kLogSquareTableMax;
      g[i] = log_square_unit(std::sqrt(2.0 * x)) - base;
    }
    g[0] = 0.0;
    // d/dx = (d/du) / (1 + x); second-order differences in u.
    for (int i = 0; i < kNodes; ++i) {
      double dgdu;
      if (i == 0)
        dgdu = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * du);
      else if (i == kNodes - 1)
        dgdu = (3.0 * g[i] - 4.0 * g[i - 1] + g[i - 2]) / (2.0 * du);
      else
        dgdu = (g[i + 1] - g[i - 1]) / (2.0 * du);
      dg[i] = dgdu / (1.0 + std::expm1(i * du));
    }
    dg[0] = 2.0;  // exact limit
  }

  double interp(const std::vector<double>& v, double x) const {
    double u = std::log1p(x) / du;
    int i = static_cast<int>(u);
    if (i >= kNodes - 1) return v[kNodes - 1];
    double w = u - i;
    return v[i] + w * (v[i + 1] - v[i]);
  }
};

const Table& table() {
  static const Table t;
  return t;
}

double asymptote(double x) {
  return std::log(4.0 * x) + kEulerGamma - 0.5 / x - 0.375 / (x * x);
}

double asymptote_derivative(double x) {
  return 1.0 / x + 0.5 / (x * x) + 0.75 / (x * x * x);
}

}  // namespace

double log_square_correction(double x) {
  if (x > kLogSquareTableMax) return asymptote(x);
  return table().interp(table().g, x);
}

double log_square_correction_derivative(double x) {
  if (x > kLogSquareTableMax) return asymptote_derivative(x);
  return table().interp(table().dg, x);
}

double expected_log_square(double mean, double variance) {
  if (!std::isfinite(mean) || !std::isfinite(variance))
    throw InvalidArgument("expected_log_square: non-finite input");
  if (!(variance > 0.0)) throw InvalidArgument("expected_log_square: variance must be > 0");
  return expected_log_square_grad(mean, variance).value;
}

LogSquareMoments expected_log_square_grad(double mean, double variance) {
  double v = std::max(variance, kVarianceFloor);
  double x = mean * mean / (2.0 * v);
  double g = log_square_correction(x);
  double dg = log_square_correction_derivative(x);
  LogSquareMoments r;
  r.value = std::log(0.5 * v) - kEulerGamma + g;
  r.d_mean = dg * mean / v;
  r.d_variance = 1.0 / v - dg * x / v;
  if (variance < kVarianceFloor) r.d_variance = 0.0;
  return r;
}

}  // namespace tpcausal
