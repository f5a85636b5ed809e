#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace tpcausal {

struct OptimizeOptions {
  int max_iters = 200;
  double initial_step = 1.0;
  double grad_tol = 1e-6;
  double value_tol = 1e-10;
  int memory = 10;
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective at every accepted iterate, starting with x0
};

// f returns the objective and writes its gradient.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// L-BFGS ascent with backtracking. Only improving steps are accepted, so the
// trace is non-decreasing. Optional box bounds are enforced by projection.
OptimizeResult maximize(const Objective& f, Eigen::VectorXd x0, const OptimizeOptions& opt,
                        const std::optional<Eigen::VectorXd>& lower = std::nullopt,
                        const std::optional<Eigen::VectorXd>& upper = std::nullopt);

}  // namespace tpcausal
