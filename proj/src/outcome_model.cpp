#include "tpcausal/outcome_model.hpp"

#include <cmath>
#include <numbers>

#include "tpcausal/errors.hpp"
#include "tpcausal/kernels.hpp"
#include "tpcausal/optimize.hpp"

namespace tpcausal {

const PatientOutcomeParams& OutcomeModel::patient(const std::string& id) const {
  auto it = patients.find(id);
  if (it == patients.end()) throw InvalidArgument("unknown patient: " + id);
  return it->second;
}

void OutcomeModel::validate() const {
  if (!(noise_std > 0.0)) throw InvalidArgument("noise_std must be > 0");
  if (!(response.shape_lengthscale > 0.0) || !(response.window > 0.0))
    throw InvalidArgument("response lengthscale and window must be > 0");
  if (!(response.sigma0 > 0.0) || !(response.sigma1 > 0.0))
    throw InvalidArgument("hierarchy scales must be > 0");
  for (const auto& [id, p] : patients) {
    if (!(p.baseline.periodic_variance >= 0.0) || !(p.baseline.periodic_lengthscale > 0.0) ||
        !(p.baseline.period > 0.0))
      throw InvalidArgument("invalid baseline parameters for patient " + id);
  }
}

double baseline_kernel(double t, double u, const BaselineParams& b) {
  double d = t - u;
  double v = eval_periodic(d, b.periodic_variance, b.periodic_lengthscale, b.period);
  if (b.long_se) v *= se(d * d, b.long_lengthscale * b.long_lengthscale);
  return v;
}

double response_mean_kernel(std::span<const Treatment> treatments, double t, double u,
                            const PatientOutcomeParams& p, const ResponseParams& r) {
  // Pairs (i, j) and (j, i) are added together so swapping t and u only
  // reorders operands of a commutative sum: the result is bit-symmetric.
  auto term = [&](const Treatment& a, const Treatment& b) {
    double da = t - a.time, db = u - b.time;
    if (da < 0.0 || da > r.window || db < 0.0 || db > r.window) return 0.0;
    return p.dose_scale(a.dose) * p.dose_scale(b.dose) *
           eval_response_kernel(t, u, a.time, b.time, r.shape_lengthscale, r.window);
  };
  double k = 0.0;
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    k += term(treatments[i], treatments[i]);
    for (std::size_t j = i + 1; j < treatments.size(); ++j)
      k += term(treatments[i], treatments[j]) + term(treatments[j], treatments[i]);
  }
  return k;
}

namespace {

// Active (time index, offset, scale) triples: treatment windows covering each time.
struct ResponsePair {
  long row;
  double offset;
  double mark;
};

std::vector<ResponsePair> response_pairs(std::span<const double> times,
                                         std::span<const Treatment> treatments, double window) {
  std::vector<ResponsePair> pairs;
  for (std::size_t j = 0; j < times.size(); ++j)
    for (const auto& a : treatments) {
      double d = times[j] - a.time;
      if (d >= 0.0 && d <= window) pairs.push_back({static_cast<long>(j), d, a.dose});
    }
  return pairs;
}

Eigen::MatrixXd latent_cov(std::span<const double> t1, std::span<const double> t2,
                           std::span<const Treatment> treatments, const PatientOutcomeParams& p,
                           const ResponseParams& r) {
  auto p1 = response_pairs(t1, treatments, r.window);
  auto p2 = response_pairs(t2, treatments, r.window);
  Eigen::MatrixXd k(t1.size(), t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i)
    for (std::size_t j = 0; j < t2.size(); ++j) k(i, j) = baseline_kernel(t1[i], t2[j], p.baseline);
  const double l2 = r.shape_lengthscale * r.shape_lengthscale;
  for (const auto& a : p1)
    for (const auto& b : p2) {
      double d = a.offset - b.offset;
      k(a.row, b.row) += p.dose_scale(a.mark) * p.dose_scale(b.mark) * se(d * d, l2);
    }
  return k;
}

std::vector<double> times_of(std::span<const Outcome> o) {
  std::vector<double> t(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) t[i] = o[i].time;
  return t;
}

void check_sorted_times(std::span<const double> t, const char* what) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] < t[i - 1]) throw InvalidArgument(std::string(what) + " are not sorted");
}

}  // namespace

GpPrediction predict(const OutcomeModel& model, const std::string& patient,
                     std::span<const Treatment> treatments, std::span<const Outcome> observed,
                     std::span<const double> query) {
  const auto& p = model.patient(patient);
  auto tobs = times_of(observed);
  check_sorted_times(tobs, "observation times");
  const double b = p.baseline.intercept;
  GpPrediction out;
  Eigen::MatrixXd kqq = latent_cov(query, query, treatments, p, model.response);
  if (observed.empty()) {
    out.mean = Eigen::VectorXd::Constant(query.size(), b);
    out.cov = kqq;
    return out;
  }
  Eigen::MatrixXd k = latent_cov(tobs, tobs, treatments, p, model.response);
  k.diagonal().array() += model.noise_std * model.noise_std;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalFailure("outcome predict: Cholesky failed");
  Eigen::VectorXd r(observed.size());
  for (std::size_t j = 0; j < observed.size(); ++j) r[j] = observed[j].value - b;
  Eigen::MatrixXd kqo = latent_cov(query, tobs, treatments, p, model.response);
  out.mean = Eigen::VectorXd::Constant(query.size(), b) + kqo * llt.solve(r);
  out.cov = kqq - kqo * llt.solve(kqo.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

std::vector<double> sample_trajectory(const OutcomeModel& model, const std::string& patient,
                                      std::span<const Treatment> treatments,
                                      std::span<const double> times, RandomStream* rng,
                                      std::span<const double> fixed_noise) {
  check_sorted_times(times, "sample times");
  const auto& p = model.patient(patient);
  const long n = static_cast<long>(times.size());
  std::vector<double> y(n, p.baseline.intercept);
  if (!fixed_noise.empty()) {
    if (static_cast<long>(fixed_noise.size()) != n)
      throw InvalidArgument("fixed noise length does not match times");
    for (long i = 0; i < n; ++i) y[i] += fixed_noise[i];
    return y;
  }
  if (!rng) throw InvalidArgument("sample_trajectory needs an rng or fixed noise");
  Eigen::MatrixXd k = latent_cov(times, times, treatments, p, model.response);
  k.diagonal().array() += kDefaultJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalFailure("sample_trajectory: Cholesky failed");
  Eigen::VectorXd z(n);
  for (long i = 0; i < n; ++i) z[i] = rng->normal();
  Eigen::VectorXd f = llt.matrixL() * z;
  for (long i = 0; i < n; ++i) y[i] += f[i] + model.noise_std * rng->normal();
  return y;
}

// ---------------------------------------------------------------- posterior

OutcomePosterior::OutcomePosterior(const OutcomeModel& model, const OutcomeData& data)
    : params_(model.patient(data.patient)),
      response_(model.response),
      noise_std_(model.noise_std),
      data_(data) {
  auto t = times_of(data.observations);
  check_sorted_times(t, "observation times");
  const long n = static_cast<long>(t.size());
  alpha_ = Eigen::VectorXd::Zero(n);
  if (n > 0) {
    Eigen::MatrixXd k = latent_cov(t, t, data.treatments, params_, response_);
    k.diagonal().array() += noise_std_ * noise_std_;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) throw NumericalFailure("outcome posterior: Cholesky failed");
    Eigen::VectorXd r(n);
    for (long j = 0; j < n; ++j) r[j] = data.observations[j].value - params_.baseline.intercept;
    alpha_ = llt.solve(r);
  }
  for (const auto& p : response_pairs(t, data.treatments, response_.window))
    pairs_.emplace_back(p.row, p.offset, params_.dose_scale(p.mark));
}

double OutcomePosterior::baseline_mean(double t) const {
  double m = params_.baseline.intercept;
  for (std::size_t j = 0; j < data_.observations.size(); ++j)
    m += alpha_[static_cast<long>(j)] * baseline_kernel(t, data_.observations[j].time, params_.baseline);
  return m;
}

double OutcomePosterior::shape_mean(double delta) const {
  if (delta < 0.0 || delta > response_.window) return 0.0;
  const double l2 = response_.shape_lengthscale * response_.shape_lengthscale;
  double h = 0.0;
  for (const auto& [row, off, s] : pairs_) {
    double d = delta - off;
    h += alpha_[row] * s * se(d * d, l2);
  }
  return h;
}

double OutcomePosterior::mean(double t, std::span<const Treatment> treatments) const {
  double m = baseline_mean(t);
  for (const auto& a : treatments) {
    double d = t - a.time;
    if (d < 0.0 || d > response_.window) continue;
    m += params_.dose_scale(a.dose) * shape_mean(d);
  }
  return m;
}

std::vector<double> OutcomePosterior::residuals() const {
  std::vector<double> r(data_.observations.size());
  for (std::size_t j = 0; j < r.size(); ++j)
    r[j] = data_.observations[j].value - mean(data_.observations[j].time, data_.treatments);
  return r;
}

std::vector<double> outcome_noise_posterior(const OutcomeModel& model, const OutcomeData& data) {
  return OutcomePosterior(model, data).residuals();
}

// ---------------------------------------------------------------- fitting

namespace {

constexpr int kPatientParams = 5;  // b, log alpha_b, log ell_b, beta0_v, beta1_v
constexpr int kSharedParams = 4;   // log ell_t, beta0, beta1, log sigma

struct PatientEval {
  double value = 0.0;
  double grad[kPatientParams] = {0, 0, 0, 0, 0};
  double g_ell_t = 0.0;
  double g_log_sigma = 0.0;
};

PatientEval patient_log_ml(const OutcomeData& d, const PatientOutcomeParams& p,
                           const ResponseParams& r, double sigma) {
  PatientEval out;
  const long n = static_cast<long>(d.observations.size());
  auto t = times_of(d.observations);
  const auto& bp = p.baseline;
  Eigen::MatrixXd pm(n, n), pe(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      double dt = t[i] - t[j];
      double s = std::sin(std::numbers::pi * std::abs(dt) / bp.period);
      double e = 2.0 * s * s / (bp.periodic_lengthscale * bp.periodic_lengthscale);
      double v = bp.periodic_variance * std::exp(-e);
      if (bp.long_se) v *= se(dt * dt, bp.long_lengthscale * bp.long_lengthscale);
      pm(i, j) = v;
      pe(i, j) = 2.0 * e;  // d/dlog ell of the exponent
    }
  auto pairs = response_pairs(t, d.treatments, r.window);
  const long np = static_cast<long>(pairs.size());
  const double l2 = r.shape_lengthscale * r.shape_lengthscale;
  Eigen::MatrixXd g(np, np), gd(np, np);
  for (long a = 0; a < np; ++a)
    for (long b = 0; b < np; ++b) {
      double dd = pairs[a].offset - pairs[b].offset;
      g(a, b) = se(dd * dd, l2);
      gd(a, b) = g(a, b) * 2.0 * dd * dd / l2;
    }
  Eigen::MatrixXd cs = Eigen::MatrixXd::Zero(n, np), c1 = cs, cm = cs;
  for (long a = 0; a < np; ++a) {
    cs(pairs[a].row, a) = p.dose_scale(pairs[a].mark);
    c1(pairs[a].row, a) = 1.0;
    cm(pairs[a].row, a) = pairs[a].mark;
  }
  Eigen::MatrixXd k = pm + cs * g * cs.transpose();
  k.diagonal().array() += sigma * sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  Eigen::VectorXd res(n);
  for (long j = 0; j < n; ++j) res[j] = d.observations[j].value - bp.intercept;
  Eigen::VectorXd alpha = llt.solve(res);
  Eigen::MatrixXd lmat = llt.matrixL();
  double logdet = 0.0;
  for (long i = 0; i < n; ++i) logdet += std::log(lmat(i, i));
  out.value = -0.5 * res.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);

  Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
  out.grad[0] = alpha.sum();
  out.grad[1] = 0.5 * (w.array() * pm.array()).sum();
  out.grad[2] = 0.5 * (w.array() * pm.array() * pe.array()).sum();
  if (np > 0) {
    Eigen::MatrixXd wcs = w * cs;
    out.grad[3] = ((c1.transpose() * wcs).array() * g.array()).sum();
    out.grad[4] = ((cm.transpose() * wcs).array() * g.array()).sum();
    out.g_ell_t = 0.5 * ((cs.transpose() * wcs).array() * gd.array()).sum();
  }
  out.g_log_sigma = sigma * sigma * w.trace();
  return out;
}

constexpr double kMinVariance = 1e-6;
constexpr double kMinLength = 1e-2;
constexpr double kMaxLength = 1e3;
constexpr double kMinNoise = 1e-3;

Eigen::VectorXd pack(const OutcomeModel& m, const std::vector<std::string>& ids) {
  const long v = static_cast<long>(ids.size());
  Eigen::VectorXd x(kPatientParams * v + kSharedParams);
  for (long i = 0; i < v; ++i) {
    const auto& p = m.patient(ids[i]);
    x[kPatientParams * i + 0] = p.baseline.intercept;
    x[kPatientParams * i + 1] = std::log(p.baseline.periodic_variance);
    x[kPatientParams * i + 2] = std::log(p.baseline.periodic_lengthscale);
    x[kPatientParams * i + 3] = p.beta0;
    x[kPatientParams * i + 4] = p.beta1;
  }
  const long s = kPatientParams * v;
  x[s + 0] = std::log(m.response.shape_lengthscale);
  x[s + 1] = m.response.beta0;
  x[s + 2] = m.response.beta1;
  x[s + 3] = std::log(m.noise_std);
  return x;
}

OutcomeModel unpack(const Eigen::VectorXd& x, const OutcomeModel& base,
                    const std::vector<std::string>& ids) {
  OutcomeModel m = base;
  const long v = static_cast<long>(ids.size());
  for (long i = 0; i < v; ++i) {
    auto& p = m.patients[ids[i]];
    p.baseline.intercept = x[kPatientParams * i + 0];
    p.baseline.periodic_variance = std::exp(x[kPatientParams * i + 1]);
    p.baseline.periodic_lengthscale = std::exp(x[kPatientParams * i + 2]);
    p.beta0 = x[kPatientParams * i + 3];
    p.beta1 = x[kPatientParams * i + 4];
  }
  const long s = kPatientParams * v;
  m.response.shape_lengthscale = std::exp(x[s + 0]);
  m.response.beta0 = x[s + 1];
  m.response.beta1 = x[s + 2];
  m.noise_std = std::exp(x[s + 3]);
  return m;
}

double objective(const OutcomeModel& m, std::span<const OutcomeData> data,
                 const std::vector<std::string>& ids, Eigen::VectorXd* grad) {
  const long v = static_cast<long>(ids.size());
  std::vector<PatientEval> evals(v);
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < v; ++i)
    evals[i] = patient_log_ml(data[i], m.patient(ids[i]), m.response, m.noise_std);
  const auto& r = m.response;
  double total = 0.0;
  if (grad) grad->setZero(kPatientParams * v + kSharedParams);
  const long s = kPatientParams * v;
  for (long i = 0; i < v; ++i) {  // ordered reduction
    const auto& p = m.patient(ids[i]);
    double z0 = (p.beta0 - r.beta0) / r.sigma0;
    double z1 = (p.beta1 - r.beta1) / r.sigma1;
    total += evals[i].value - 0.5 * (z0 * z0 + z1 * z1) -
             std::log(2.0 * std::numbers::pi * r.sigma0 * r.sigma1);
    if (grad) {
      for (int k = 0; k < kPatientParams; ++k) (*grad)[kPatientParams * i + k] = evals[i].grad[k];
      (*grad)[kPatientParams * i + 3] -= z0 / r.sigma0;
      (*grad)[kPatientParams * i + 4] -= z1 / r.sigma1;
      (*grad)[s + 0] += evals[i].g_ell_t;
      (*grad)[s + 1] += z0 / r.sigma0;
      (*grad)[s + 2] += z1 / r.sigma1;
      (*grad)[s + 3] += evals[i].g_log_sigma;
    }
  }
  return total;
}

std::vector<std::string> ids_of(std::span<const OutcomeData> data) {
  std::vector<std::string> ids;
  for (const auto& d : data) {
    if (d.observations.size() < 2)
      throw InvalidArgument("patient " + d.patient + " has fewer than 2 observations");
    ids.push_back(d.patient);
  }
  return ids;
}

}  // namespace

OutcomeModel initial_outcome_model(std::span<const OutcomeData> data, const ResponseParams& r) {
  OutcomeModel m;
  m.response = r;
  double pooled = 0.0;
  long count = 0;
  for (const auto& d : data) {
    if (d.observations.empty()) throw InvalidArgument("patient " + d.patient + " has no observations");
    double mean = 0.0;
    for (const auto& o : d.observations) mean += o.value;
    mean /= static_cast<double>(d.observations.size());
    double var = 0.0;
    for (const auto& o : d.observations) var += (o.value - mean) * (o.value - mean);
    pooled += var;
    count += static_cast<long>(d.observations.size());
    var /= std::max<double>(1.0, static_cast<double>(d.observations.size()) - 1.0);
    PatientOutcomeParams p;
    p.baseline.intercept = mean;
    p.baseline.periodic_variance = std::max(0.5 * var, 1e-3);
    p.baseline.periodic_lengthscale = 1.0;
    p.beta0 = r.beta0;
    p.beta1 = r.beta1;
    m.patients[d.patient] = p;
  }
  m.noise_std = std::max(std::sqrt(0.25 * pooled / std::max<long>(count, 1)), 0.05);
  return m;
}

double outcome_objective(const OutcomeModel& model, std::span<const OutcomeData> data) {
  return objective(model, data, ids_of(data), nullptr);
}

OutcomeFitResult fit_outcome_model(const OutcomeModel& init, std::span<const OutcomeData> data,
                                   const OutcomeFitOptions& opt) {
  init.validate();
  auto ids = ids_of(data);
  if (opt.max_iters <= 0) return {init, {objective(init, data, ids, nullptr)}};
  const long v = static_cast<long>(ids.size());
  const long n = kPatientParams * v + kSharedParams;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -1e300), hi = Eigen::VectorXd::Constant(n, 1e300);
  for (long i = 0; i < v; ++i) {
    lo[kPatientParams * i + 1] = std::log(kMinVariance);
    lo[kPatientParams * i + 2] = std::log(kMinLength);
    hi[kPatientParams * i + 2] = std::log(kMaxLength);
  }
  lo[kPatientParams * v + 0] = std::log(kMinLength);
  hi[kPatientParams * v + 0] = std::log(kMaxLength);
  lo[kPatientParams * v + 3] = std::log(kMinNoise);

  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return objective(unpack(x, init, ids), data, ids, &g);
  };
  OptimizeOptions oo;
  oo.max_iters = opt.max_iters;
  oo.initial_step = 0.1;
  oo.grad_tol = 1e-5;
  oo.value_tol = 1e-10;
  OptimizeResult r = maximize(f, pack(init, ids), oo, lo, hi);
  return {unpack(r.x, init, ids), r.trace};
}

// ---------------------------------------------------------------- ablation

ConstantResponsePosterior::ConstantResponsePosterior(const OutcomeModel& model,
                                                     const OutcomeData& data)
    : baseline_(model.patient(data.patient).baseline),
      window_(model.response.window),
      noise_std_(model.noise_std) {
  times_ = times_of(data.observations);
  const long n = static_cast<long>(times_.size());
  if (n == 0) throw InvalidArgument("constant-response model needs observations");
  Eigen::MatrixXd k(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) k(i, j) = baseline_kernel(times_[i], times_[j], baseline_);
  k.diagonal().array() += noise_std_ * noise_std_;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalFailure("constant-response: Cholesky failed");
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (long j = 0; j < n; ++j) {
    x(j, 0) = 1.0;
    double r = 0.0;
    for (const auto& a : data.treatments) {
      double d = times_[j] - a.time;
      if (d >= 0.0 && d <= window_) r += a.dose;
    }
    x(j, 1) = r;
    y[j] = data.observations[j].value;
  }
  Eigen::MatrixXd kx = llt.solve(x);
  Eigen::Matrix2d xtkx = x.transpose() * kx;
  Eigen::Vector2d xtky = kx.transpose() * y;
  if (x.col(1).squaredNorm() > 0.0) {
    Eigen::Vector2d beta = xtkx.ldlt().solve(xtky);
    intercept_ = beta[0];
    height_ = beta[1];
  } else {
    intercept_ = xtky[0] / xtkx(0, 0);
    height_ = 0.0;
  }
  alpha_ = llt.solve(y - x.col(0) * intercept_ - x.col(1) * height_);
}

double ConstantResponsePosterior::mean(double t, std::span<const Treatment> treatments) const {
  double m = intercept_;
  for (std::size_t j = 0; j < times_.size(); ++j)
    m += alpha_[static_cast<long>(j)] * baseline_kernel(t, times_[j], baseline_);
  for (const auto& a : treatments) {
    double d = t - a.time;
    if (d >= 0.0 && d <= window_) m += height_ * a.dose;
  }
  return m;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const OutcomeModel& m) {
  nlohmann::json pats = nlohmann::json::object();
  for (const auto& [id, p] : m.patients)
    pats[id] = {{"intercept", p.baseline.intercept},
                {"periodic_variance", p.baseline.periodic_variance},
                {"periodic_lengthscale", p.baseline.periodic_lengthscale},
                {"period", p.baseline.period},
                {"long_se", p.baseline.long_se},
                {"long_lengthscale", p.baseline.long_lengthscale},
                {"beta0", p.beta0},
                {"beta1", p.beta1}};
  j = {{"response",
        {{"shape_lengthscale", m.response.shape_lengthscale},
         {"window", m.response.window},
         {"beta0", m.response.beta0},
         {"beta1", m.response.beta1},
         {"sigma0", m.response.sigma0},
         {"sigma1", m.response.sigma1}}},
       {"noise_std", m.noise_std},
       {"patients", pats}};
}

void from_json(const nlohmann::json& j, OutcomeModel& m) {
  const auto& r = j.at("response");
  m.response.shape_lengthscale = r.at("shape_lengthscale").get<double>();
  m.response.window = r.at("window").get<double>();
  m.response.beta0 = r.at("beta0").get<double>();
  m.response.beta1 = r.at("beta1").get<double>();
  m.response.sigma0 = r.at("sigma0").get<double>();
  m.response.sigma1 = r.at("sigma1").get<double>();
  m.noise_std = j.at("noise_std").get<double>();
  m.patients.clear();
  for (const auto& [id, p] : j.at("patients").items()) {
    PatientOutcomeParams q;
    q.baseline.intercept = p.at("intercept").get<double>();
    q.baseline.periodic_variance = p.at("periodic_variance").get<double>();
    q.baseline.periodic_lengthscale = p.at("periodic_lengthscale").get<double>();
    q.baseline.period = p.value("period", 24.0);
    q.baseline.long_se = p.value("long_se", false);
    q.baseline.long_lengthscale = p.value("long_lengthscale", 100.0);
    q.beta0 = p.at("beta0").get<double>();
    q.beta1 = p.at("beta1").get<double>();
    m.patients[id] = q;
  }
  m.validate();
}

}  // namespace tpcausal
