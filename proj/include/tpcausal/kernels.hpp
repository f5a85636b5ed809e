#pragma once

#include <cmath>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace tpcausal {

inline constexpr double kDefaultJitter = 1e-6;

// Generic kernel input. Scalar kernels read `time`; RelTimeMarkSE reads
// (time as relative time, mark); CausalResponseSE reads (time, anchor) where
// anchor is the treatment time t_i.
struct KernelPoint {
  double time = 0.0;
  double mark = 0.0;
  double anchor = 0.0;
};

struct KernelSpec;

namespace kern {
struct Constant {
  double variance = 1.0;
};
struct SquaredExp {
  double variance = 1.0;
  double lengthscale = 1.0;
};
struct Periodic {
  double variance = 1.0;
  double lengthscale = 1.0;
  double period_hours = 24.0;
};
struct RelTimeMarkSE {
  double variance = 1.0;
  double time_lengthscale = 1.0;
  double mark_lengthscale = 1.0;
  bool use_mark = true;
};
struct CausalResponseSE {
  double lengthscale = 0.5;
  double window_hours = 3.0;
};
struct Sum {
  std::vector<KernelSpec> children;
};
struct Product {
  std::vector<KernelSpec> children;
};
}  // namespace kern

struct KernelSpec {
  std::variant<kern::Constant, kern::SquaredExp, kern::Periodic, kern::RelTimeMarkSE,
               kern::CausalResponseSE, kern::Sum, kern::Product>
      node;
};

// exp(-d2/denom). Every SE-type term goes through here.
inline double se(double d2, double denom) { return std::exp(-d2 / denom); }

double eval_se(double d, double variance, double lengthscale);
double eval_periodic(double d, double variance, double lengthscale, double period);
double eval_response_kernel(double tau, double tau_p, double t_i, double t_ip, double lengthscale,
                            double window);

void validate(const KernelSpec& spec);
double evaluate(const KernelSpec& spec, const KernelPoint& x, const KernelPoint& y);

Eigen::MatrixXd gram(std::span<const KernelPoint> inputs, const KernelSpec& spec,
                     double jitter = kDefaultJitter);
Eigen::MatrixXd cross(std::span<const KernelPoint> a, std::span<const KernelPoint> b,
                      const KernelSpec& spec);

namespace reference {
Eigen::MatrixXd gram(std::span<const KernelPoint> inputs, const KernelSpec& spec,
                     double jitter = kDefaultJitter);
}

// Masked regressive treatment kernel.

struct EventSlot {
  bool present = false;
  double rel_time = 0.0;
  double mark = 0.0;
  static EventSlot at(double rel_time, double mark) { return {true, rel_time, mark}; }
};

struct RegressiveInput {
  double absolute_time = 0.0;
  std::vector<EventSlot> treatments;
  std::vector<EventSlot> outcomes;
};

struct SlotKernel {
  double variance = 0.05;
  double time_lengthscale = 1.0;
  double mark_lengthscale = 1.0;
  bool use_mark = false;
};

struct TreatmentKernelParams {
  bool use_baseline = true;
  double baseline_variance = 0.1;
  double baseline_lengthscale = 7.0;
  double day_length = 24.0;
  std::vector<SlotKernel> treatment_slots;
  std::vector<SlotKernel> outcome_slots;
};

double time_of_day(double t, double day_length);
double eval_slot_kernel(const EventSlot& a, const EventSlot& b, const SlotKernel& k);
double eval_treatment_kernel(const RegressiveInput& v, const RegressiveInput& w,
                             const TreatmentKernelParams& params);

void to_json(nlohmann::json& j, const KernelSpec& spec);
void from_json(const nlohmann::json& j, KernelSpec& spec);
void to_json(nlohmann::json& j, const EventSlot& s);
void from_json(const nlohmann::json& j, EventSlot& s);

}  // namespace tpcausal
