#include "tpcausal/kernels.hpp"

#include <numbers>
#include <string>

#include "tpcausal/errors.hpp"

namespace tpcausal {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw InvalidArgument(std::string("non-finite ") + what);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

double eval_se(double d, double variance, double lengthscale) {
  require_finite(d, "distance");
  require_finite(variance, "variance");
  require_finite(lengthscale, "lengthscale");
  if (!(lengthscale > 0.0)) throw InvalidArgument("lengthscale must be positive");
  return variance * se(d * d, lengthscale);
}

double eval_periodic(double d, double variance, double lengthscale, double period) {
  double s = std::sin(std::numbers::pi * std::abs(d) / period);
  return variance * std::exp(-2.0 * s * s / (lengthscale * lengthscale));
}

double eval_response_kernel(double tau, double tau_p, double t_i, double t_ip, double lengthscale,
                            double window) {
  require_finite(tau, "time");
  require_finite(tau_p, "time");
  require_finite(t_i, "time");
  require_finite(t_ip, "time");
  double d1 = tau - t_i;
  double d2 = tau_p - t_ip;
  if (d1 < 0.0 || d1 > window || d2 < 0.0 || d2 > window) return 0.0;
  double diff = d1 - d2;
  return se(diff * diff, lengthscale * lengthscale);
}

void validate(const KernelSpec& spec) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be > 0");
  };
  auto nonneg = [](double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be >= 0");
  };
  std::visit(overloaded{
                 [&](const kern::Constant& k) { nonneg(k.variance, "variance"); },
                 [&](const kern::SquaredExp& k) {
                   nonneg(k.variance, "variance");
                   positive(k.lengthscale, "lengthscale");
                 },
                 [&](const kern::Periodic& k) {
                   nonneg(k.variance, "variance");
                   positive(k.lengthscale, "lengthscale");
                   positive(k.period_hours, "period_hours");
                 },
                 [&](const kern::RelTimeMarkSE& k) {
                   nonneg(k.variance, "variance");
                   positive(k.time_lengthscale, "time_lengthscale");
                   positive(k.mark_lengthscale, "mark_lengthscale");
                 },
                 [&](const kern::CausalResponseSE& k) {
                   positive(k.lengthscale, "lengthscale");
                   positive(k.window_hours, "window_hours");
                 },
                 [&](const kern::Sum& k) {
                   if (k.children.empty()) throw InvalidArgument("empty sum kernel");
                   for (const auto& c : k.children) validate(c);
                 },
                 [&](const kern::Product& k) {
                   if (k.children.empty()) throw InvalidArgument("empty product kernel");
                   for (const auto& c : k.children) validate(c);
                 },
             },
             spec.node);
}

double evaluate(const KernelSpec& spec, const KernelPoint& x, const KernelPoint& y) {
  return std::visit(
      overloaded{
          [&](const kern::Constant& k) { return k.variance; },
          [&](const kern::SquaredExp& k) {
            double d = x.time - y.time;
            return k.variance * se(d * d, k.lengthscale);
          },
          [&](const kern::Periodic& k) {
            return eval_periodic(x.time - y.time, k.variance, k.lengthscale, k.period_hours);
          },
          [&](const kern::RelTimeMarkSE& k) {
            double dt = x.time - y.time;
            double v = k.variance * se(dt * dt, k.time_lengthscale);
            if (k.use_mark) {
              double dm = x.mark - y.mark;
              v *= se(dm * dm, k.mark_lengthscale);
            }
            return v;
          },
          [&](const kern::CausalResponseSE& k) {
            return eval_response_kernel(x.time, y.time, x.anchor, y.anchor, k.lengthscale,
                                        k.window_hours);
          },
          [&](const kern::Sum& k) {
            double s = 0.0;
            for (const auto& c : k.children) s += evaluate(c, x, y);
            return s;
          },
          [&](const kern::Product& k) {
            double p = 1.0;
            for (const auto& c : k.children) p *= evaluate(c, x, y);
            return p;
          },
      },
      spec.node);
}

Eigen::MatrixXd gram(std::span<const KernelPoint> inputs, const KernelSpec& spec, double jitter) {
  if (inputs.empty()) throw InvalidArgument("gram: no inputs");
  if (jitter < 0.0) throw InvalidArgument("gram: negative jitter");
  const long n = static_cast<long>(inputs.size());
  Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j <= i; ++j) {
      double v = evaluate(spec, inputs[i], inputs[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) += jitter;
  }
  return k;
}

Eigen::MatrixXd cross(std::span<const KernelPoint> a, std::span<const KernelPoint> b,
                      const KernelSpec& spec) {
  const long n = static_cast<long>(a.size()), m = static_cast<long>(b.size());
  Eigen::MatrixXd k(n, m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) k(i, j) = evaluate(spec, a[i], b[j]);
  return k;
}

namespace reference {
Eigen::MatrixXd gram(std::span<const KernelPoint> inputs, const KernelSpec& spec, double jitter) {
  if (inputs.empty()) throw InvalidArgument("gram: no inputs");
  if (jitter < 0.0) throw InvalidArgument("gram: negative jitter");
  const long n = static_cast<long>(inputs.size());
  Eigen::MatrixXd k(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j <= i; ++j) {
      double v = evaluate(spec, inputs[i], inputs[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) += jitter;
  }
  return k;
}
}  // namespace reference

double time_of_day(double t, double day_length) {
  double r = std::fmod(t, day_length);
  return r < 0.0 ? r + day_length : r;
}

double eval_slot_kernel(const EventSlot& a, const EventSlot& b, const SlotKernel& k) {
  if (!a.present || !b.present) return 0.0;
  double dt = a.rel_time - b.rel_time;
  double v = k.variance * se(dt * dt, k.time_lengthscale);
  if (k.use_mark) {
    double dm = a.mark - b.mark;
    v *= se(dm * dm, k.mark_lengthscale);
  }
  return v;
}

double eval_treatment_kernel(const RegressiveInput& v, const RegressiveInput& w,
                             const TreatmentKernelParams& params) {
  if (v.treatments.size() != params.treatment_slots.size() ||
      w.treatments.size() != params.treatment_slots.size() ||
      v.outcomes.size() != params.outcome_slots.size() ||
      w.outcomes.size() != params.outcome_slots.size())
    throw InvalidArgument("regressive input slot counts do not match the kernel");
  double k = 0.0;
  if (params.use_baseline) {
    double d = time_of_day(v.absolute_time, params.day_length) -
               time_of_day(w.absolute_time, params.day_length);
    k += params.baseline_variance * se(d * d, params.baseline_lengthscale);
  }
  for (std::size_t i = 0; i < params.treatment_slots.size(); ++i)
    k += eval_slot_kernel(v.treatments[i], w.treatments[i], params.treatment_slots[i]);
  for (std::size_t i = 0; i < params.outcome_slots.size(); ++i)
    k += eval_slot_kernel(v.outcomes[i], w.outcomes[i], params.outcome_slots[i]);
  return k;
}

// JSON

void to_json(nlohmann::json& j, const KernelSpec& spec) {
  std::visit(overloaded{
                 [&](const kern::Constant& k) {
                   j = {{"kind", "constant"}, {"variance", k.variance}};
                 },
                 [&](const kern::SquaredExp& k) {
                   j = {{"kind", "squared_exp"}, {"variance", k.variance},
                        {"lengthscale", k.lengthscale}};
                 },
                 [&](const kern::Periodic& k) {
                   j = {{"kind", "periodic"}, {"variance", k.variance},
                        {"lengthscale", k.lengthscale}, {"period_hours", k.period_hours}};
                 },
                 [&](const kern::RelTimeMarkSE& k) {
                   j = {{"kind", "rel_time_mark_se"}, {"variance", k.variance},
                        {"time_lengthscale", k.time_lengthscale},
                        {"mark_lengthscale", k.mark_lengthscale}, {"use_mark", k.use_mark}};
                 },
                 [&](const kern::CausalResponseSE& k) {
                   j = {{"kind", "causal_response_se"}, {"lengthscale", k.lengthscale},
                        {"window_hours", k.window_hours}};
                 },
                 [&](const kern::Sum& k) {
                   j = {{"kind", "sum"}, {"children", k.children}};
                 },
                 [&](const kern::Product& k) {
                   j = {{"kind", "product"}, {"children", k.children}};
                 },
             },
             spec.node);
}

void from_json(const nlohmann::json& j, KernelSpec& spec) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    spec.node = kern::Constant{j.at("variance").get<double>()};
  } else if (kind == "squared_exp") {
    spec.node = kern::SquaredExp{j.at("variance").get<double>(), j.at("lengthscale").get<double>()};
  } else if (kind == "periodic") {
    spec.node = kern::Periodic{j.at("variance").get<double>(), j.at("lengthscale").get<double>(),
                               j.value("period_hours", 24.0)};
  } else if (kind == "rel_time_mark_se") {
    spec.node = kern::RelTimeMarkSE{j.at("variance").get<double>(),
                                    j.at("time_lengthscale").get<double>(),
                                    j.at("mark_lengthscale").get<double>(),
                                    j.value("use_mark", true)};
  } else if (kind == "causal_response_se") {
    spec.node = kern::CausalResponseSE{j.at("lengthscale").get<double>(),
                                       j.value("window_hours", 3.0)};
  } else if (kind == "sum") {
    spec.node = kern::Sum{j.at("children").get<std::vector<KernelSpec>>()};
  } else if (kind == "product") {
    spec.node = kern::Product{j.at("children").get<std::vector<KernelSpec>>()};
  } else {
    throw InvalidArgument("unknown kernel kind: " + kind);
  }
  validate(spec);
}

void to_json(nlohmann::json& j, const EventSlot& s) {
  if (!s.present)
    j = {{"rel_time", "inf"}, {"mark", "inf"}};
  else
    j = {{"rel_time", s.rel_time}, {"mark", s.mark}};
}

void from_json(const nlohmann::json& j, EventSlot& s) {
  const auto& t = j.at("rel_time");
  if (t.is_string()) {
    if (t.get<std::string>() != "inf") throw InvalidArgument("bad slot placeholder");
    s = EventSlot{};
  } else {
    s = EventSlot::at(t.get<double>(), j.at("mark").get<double>());
  }
}

}  // namespace tpcausal
