#pragma once

namespace tpcausal {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr double kVarianceFloor = 1e-12;

// E[log f^2] for f ~ N(mean, variance).
double expected_log_square(double mean, double variance);

struct LogSquareMoments {
  double value;
  double d_mean;
  double d_variance;
};

// Same quantity with gradients; variance is floored instead of rejected.
LogSquareMoments expected_log_square_grad(double mean, double variance);

// g(x) = -G(-x): the correction term, g(0) = 0, table-interpolated on [0, 1000]
// and asymptotic beyond.
double log_square_correction(double x);
double log_square_correction_derivative(double x);

inline constexpr double kLogSquareTableMax = 1000.0;

}  // namespace tpcausal
