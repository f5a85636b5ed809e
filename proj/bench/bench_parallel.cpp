// Serial reference vs OpenMP timings for the parallel kernels.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "tpcausal/causal_engine.hpp"
#include "tpcausal/harness.hpp"
#include "tpcausal/kernels.hpp"
#include "tpcausal/treatment_model.hpp"

using namespace tpcausal;

namespace {

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-28s %12.6f %12.6f %8.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-28s %12s %12s %9s\n", "kernel", "serial [s]", "openmp [s]", "speedup");

  // gram matrix of a composite kernel
  {
    RandomStream rng(1);
    std::vector<KernelPoint> pts(1200);
    for (auto& p : pts) p = {48.0 * rng.uniform(), 0.0, 0.0};
    KernelSpec spec{kern::Sum{{KernelSpec{kern::Periodic{1.0, 1.0, 24.0}},
                               KernelSpec{kern::SquaredExp{0.5, 2.0}}}}};
    volatile double sink = 0.0;
    double s = best_of(3, [&] { sink = sink + reference::gram(pts, spec, 1e-6)(0, 0); });
    double p = best_of(3, [&] { sink = sink + gram(pts, spec, 1e-6)(0, 0); });
    row("gram 1200x1200", s, p);
  }

  // Psi over one day of a fitted-size model
  {
    ExperimentConfig c;
    Simulator sim = build_simulator(c, 1);
    PatientRecord r = simulate_patient(sim, sim.patients[0], 0, 2, c, 1);
    TreatmentConfig cfg = TreatmentConfig::variant("bao");
    cfg.num_inducing = 30;
    std::vector<Trajectory> data{r.day(0), r.day(1)};
    TreatmentModel m = prior_model(cfg, place_inducing(cfg, data), fit_mark_model(data), "A");
    EventHistory h = r.history();
    // longest event-free stretch of day 1
    double a = 0.0, b = 0.0, prev = 0.0;
    std::vector<double> cuts{0.0};
    for (const auto& x : h.treatments) cuts.push_back(x.time);
    for (const auto& x : h.outcomes) cuts.push_back(x.time);
    std::sort(cuts.begin(), cuts.end());
    for (double t : cuts) {
      if (t > 24.0) break;
      if (t - prev > b - a) a = prev, b = t;
      prev = t;
    }
    volatile double sink = 0.0;
    double s = best_of(20, [&] { sink = sink + reference::psi_matrix(m, a, b, h)(0, 0); });
    double p = best_of(20, [&] { sink = sink + psi_matrix(m, a, b, h)(0, 0); });
    row("psi 90x90", s, p);
  }

  // counterfactual query rollouts
  {
    ExperimentConfig c;
    Simulator sim = build_simulator(c, 1);
    PatientRecord r = simulate_patient(sim, sim.patients[0], 0, 1, c, 1);
    PatientModel pm{&sim.policies[0], &sim.groups[0]};
    auto run = [&] {
      policy_counterfactual_query(pm, r.id, r.history(), 0.0, 24.0, sim.policies[1], 64, 1);
    };
    const int threads = omp_get_max_threads();
    omp_set_num_threads(1);
    double s = best_of(3, run);
    omp_set_num_threads(threads);
    double p = best_of(3, run);
    row("counterfactual 64 rollouts", s, p);
  }
  return 0;
}
