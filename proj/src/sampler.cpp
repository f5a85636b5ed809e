#include "tpcausal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "tpcausal/errors.hpp"

namespace tpcausal {

FunctionProcess::FunctionProcess(Fn f, std::vector<double> initial, double step)
    : f_(std::move(f)), points_(std::move(initial)), step_(step) {
  if (!(step_ > 0.0)) throw InvalidArgument("step must be > 0");
  if (!std::is_sorted(points_.begin(), points_.end()))
    throw InvalidArgument("initial points are not sorted");
}

double FunctionProcess::intensity(double t) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), t);
  return f_(t, std::span<const double>(points_.data(), static_cast<std::size_t>(it - points_.begin())));
}

void FunctionProcess::accept(double t) {
  if (points_.empty() || t > points_.back()) points_.push_back(t);
}

std::vector<double> NoiseRecord::rejected_times() const {
  std::vector<double> v;
  for (const auto& c : candidates)
    if (c.kind == CandidateKind::Rejected) v.push_back(c.t);
  return v;
}

std::vector<double> NoiseRecord::accepted_times() const {
  std::vector<double> v;
  for (const auto& c : candidates)
    if (c.kind == CandidateKind::Accepted) v.push_back(c.t);
  return v;
}

double upper_bound(const PointProcess& p, double a, double b) {
  if (!(b >= a)) throw InvalidArgument("upper_bound: empty interval");
  double mx = 0.0;
  for (int i = 0; i < kBoundGrid; ++i) {
    double t = (i == kBoundGrid - 1) ? b : a + (b - a) * i / (kBoundGrid - 1);
    double v = p.intensity(t);
    if (!std::isfinite(v)) throw NumericalFailure("non-finite intensity");
    if (v < 0.0) throw InconsistencyError("negative intensity");
    mx = std::max(mx, v);
  }
  return mx * kBoundSafety;
}

namespace {

double checked_rate(const PointProcess& p, double t, double bound) {
  double v = p.intensity(t);
  if (!std::isfinite(v)) throw NumericalFailure("non-finite intensity");
  if (v < 0.0) throw InconsistencyError("negative intensity");
  if (v > bound) throw InconsistencyError("intensity exceeds its thinning bound");
  return v;
}

double waiting_time(double u, double rate) {
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(u) / rate;
}

double interval_end(double tau, double t2, double l) {
  if (!(l > 0.0)) throw InvalidArgument("interval function must be positive");
  return std::min(t2, tau + l);
}

// Shared thinning loop for one or more processes.
std::vector<std::vector<double>> thin(double t1, double t2, std::span<PointProcess* const> ps,
                                      RandomStream& rng, NoiseRecord* record,
                                      std::size_t leaders = 0) {
  if (!(t1 <= t2)) throw InvalidArgument("T1 must not exceed T2");
  if (ps.empty()) throw InvalidArgument("no processes");
  if (leaders == 0 || leaders > ps.size()) leaders = ps.size();
  std::vector<std::vector<double>> out(ps.size());
  double tau = t1;
  while (tau < t2) {
    double l = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      ps[k]->advance(tau);
      if (k < leaders) l = std::min(l, ps[k]->horizon(tau));
    }
    double end = interval_end(tau, t2, l);
    double ub = 0.0;
    for (std::size_t k = 0; k < leaders; ++k) ub = std::max(ub, upper_bound(*ps[k], tau, end));
    double u_ub = rng.uniform_open();
    double u_a = rng.uniform_open();
    double t = tau + waiting_time(u_ub, ub);
    if (t >= end) {
      tau = end;
      continue;
    }
    double u = u_a * ub;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      ps[k]->advance(t);
      double rate = k < leaders ? checked_rate(*ps[k], t, ub) : ps[k]->intensity(t);
      if (!std::isfinite(rate)) throw NumericalFailure("non-finite intensity");
      bool keep = u <= rate;
      if (keep) {
        ps[k]->accept(t);
        out[k].push_back(t);
      }
      if (record && k == 0)
        record->candidates.push_back(keep ? NoiseCandidate{t, CandidateKind::Accepted, 0.0, rate, u, ub}
                                          : NoiseCandidate{t, CandidateKind::Rejected, rate, ub, u, ub});
    }
    tau = t;
  }
  for (auto* p : ps) p->advance(t2);
  return out;
}

// Counterfactual thinning; `cf` may be null for pure abduction.
SampleResult counterfactual_core(PointProcess& obs, PointProcess* cf,
                                 std::span<const double> observed, double t1, double t2,
                                 RandomStream& rng, NoiseMode mode) {
  if (!(t1 <= t2)) throw InvalidArgument("T1 must not exceed T2");
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] <= t1 || observed[i] > t2)
      throw InvalidArgument("observed point outside (T1, T2]");
    if (i > 0 && observed[i] <= observed[i - 1])
      throw InvalidArgument("observed points must be strictly increasing");
  }
  SampleResult res;
  std::size_t next = 0;
  double tau = t1;
  auto decide = [&](double t, double u) {
    if (!cf) return;
    cf->advance(t);
    double rate = cf->intensity(t);
    if (!std::isfinite(rate) || rate < 0.0) throw NumericalFailure("bad counterfactual intensity");
    if (u <= rate) {
      cf->accept(t);
      res.points.push_back(t);
    }
  };
  while (tau < t2) {
    obs.advance(tau);
    double l = obs.horizon(tau);
    if (cf) {
      cf->advance(tau);
      l = std::min(l, cf->horizon(tau));
    }
    double end = interval_end(tau, t2, l);
    if (next < observed.size() && observed[next] <= end) end = observed[next];
    double ub = upper_bound(obs, tau, end);
    if (cf) ub = std::max(ub, upper_bound(*cf, tau, end));

    // First rejected point of the observed process inside (tau, end).
    bool found = false;
    double t = tau, rate_obs = 0.0;
    while (true) {
      double u_ub = rng.uniform_open();
      double u_a = rng.uniform_open();
      t += waiting_time(u_ub, ub);
      if (t >= end) break;
      rate_obs = checked_rate(obs, t, ub);
      if (u_a * ub > rate_obs) {
        found = true;
        break;
      }
    }
    if (found) {
      double u = mode == NoiseMode::Prior ? ub * rng.uniform_open()
                                          : rate_obs + (ub - rate_obs) * rng.uniform_open();
      if (mode == NoiseMode::Posterior && u <= rate_obs)
        u = std::nextafter(rate_obs, std::numeric_limits<double>::infinity());
      res.noise.candidates.push_back({t, CandidateKind::Rejected, rate_obs, ub, u, ub});
      decide(t, u);
      tau = t;
      continue;
    }
    tau = end;
    if (next < observed.size() && observed[next] == end) {
      obs.advance(end);
      double r = checked_rate(obs, end, ub);
      if (!(r > 0.0)) throw InconsistencyError("observed point where the observed intensity is zero");
      double u = mode == NoiseMode::Prior ? ub * rng.uniform_open() : r * rng.uniform_open();
      res.noise.candidates.push_back({end, CandidateKind::Accepted, 0.0, r, u, ub});
      decide(end, u);
      obs.accept(end);
      ++next;
    }
  }
  obs.advance(t2);
  if (cf) cf->advance(t2);
  return res;
}

}  // namespace

SampleResult sample_ogata(double t1, double t2, PointProcess& p, RandomStream& rng) {
  SampleResult res;
  PointProcess* ps[1] = {&p};
  res.points = std::move(thin(t1, t2, ps, rng, &res.noise)[0]);
  return res;
}

std::vector<std::vector<double>> sample_fixed_noise(double t1, double t2,
                                                    std::span<PointProcess* const> processes,
                                                    RandomStream& rng, std::size_t leaders) {
  return thin(t1, t2, processes, rng, nullptr, leaders);
}

std::vector<double> replay(const NoiseRecord& record, PointProcess& p) {
  std::vector<double> out;
  for (const auto& c : record.candidates) {
    p.advance(c.t);
    double rate = p.intensity(c.t);
    if (c.u <= rate) {
      p.accept(c.t);
      out.push_back(c.t);
    }
  }
  return out;
}

NoiseRecord abduce_noise(PointProcess& obs, std::span<const double> observed, double t1, double t2,
                         RandomStream& rng) {
  return counterfactual_core(obs, nullptr, observed, t1, t2, rng, NoiseMode::Posterior).noise;
}

SampleResult sample_counterfactual(PointProcess& obs, PointProcess& cf,
                                   std::span<const double> observed, double t1, double t2,
                                   RandomStream& rng, NoiseMode mode) {
  return counterfactual_core(obs, &cf, observed, t1, t2, rng, mode);
}

void write_noise_record(std::ostream& os, const NoiseRecord& record) {
  for (const auto& c : record.candidates) {
    nlohmann::json j = {{"t", c.t},
                        {"kind", c.kind == CandidateKind::Accepted ? "accepted" : "rejected"},
                        {"lo", c.lo},
                        {"hi", c.hi},
                        {"u", c.u},
                        {"bound", c.bound}};
    os << j.dump() << '\n';
  }
}

NoiseRecord read_noise_record(std::istream& is) {
  NoiseRecord r;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      std::string kind = j.at("kind").get<std::string>();
      if (kind != "accepted" && kind != "rejected") throw InvalidArgument("bad kind");
      r.candidates.push_back({j.at("t").get<double>(),
                              kind == "accepted" ? CandidateKind::Accepted : CandidateKind::Rejected,
                              j.at("lo").get<double>(), j.at("hi").get<double>(),
                              j.at("u").get<double>(), j.value("bound", j.at("hi").get<double>())});
    } catch (const std::exception& e) {
      throw ParseError("noise record", n, e.what());
    }
  }
  return r;
}

}  // namespace tpcausal
