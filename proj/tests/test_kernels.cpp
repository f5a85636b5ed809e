#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tpcausal/errors.hpp"
#include "tpcausal/kernels.hpp"

using namespace tpcausal;

namespace {

KernelSpec mixed_kernel() {
  return {kern::Sum{{KernelSpec{kern::SquaredExp{1.3, 0.7}},
                     KernelSpec{kern::Product{{KernelSpec{kern::Periodic{0.5, 1.1, 24.0}},
                                               KernelSpec{kern::Constant{2.0}}}}},
                     KernelSpec{kern::RelTimeMarkSE{0.4, 2.0, 3.0, true}}}}};
}

std::vector<KernelPoint> random_points(std::mt19937_64& g, int n) {
  std::uniform_real_distribution<double> t(0.0, 24.0), m(0.0, 10.0);
  std::vector<KernelPoint> v;
  for (int i = 0; i < n; ++i) v.push_back({t(g), m(g), 0.0});
  return v;
}

TreatmentKernelParams params_1_1() {
  TreatmentKernelParams p;
  p.baseline_variance = 0.1;
  p.baseline_lengthscale = 7.0;
  p.treatment_slots = {SlotKernel{0.05, 1.0, 1.0, false}};
  p.outcome_slots = {SlotKernel{0.15, 100.0, 2.5, true}};
  return p;
}

}  // namespace

TEST_CASE("eval_se examples") {
  CHECK(eval_se(0.0, 1.7, 3.0) == 1.7);
  CHECK(eval_se(1.0, 1.0, 1.0) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK(eval_se(1e6, 1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(eval_se(std::nan(""), 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(eval_se(1.0, 1.0, 0.0), InvalidArgument);
}

TEST_CASE("eval_se stays in [0, variance]") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    double v = u(g), k = eval_se(u(g) - 10.0, v, 0.1 + u(g));
    CHECK(k >= 0.0);
    CHECK(k <= v);
  }
}

TEST_CASE("response kernel examples") {
  const double ti = 8.0, tj = 12.0;
  CHECK(eval_response_kernel(ti - 0.5, tj + 1.0, ti, tj, 0.5, 3.0) == 0.0);
  CHECK(eval_response_kernel(ti + 1.0, tj + 1.0, ti, tj, 0.5, 3.0) == 1.0);
  CHECK(eval_response_kernel(ti + 1.0, tj + 2.0, ti, tj, 0.5, 3.0) ==
        doctest::Approx(std::exp(-4.0)).epsilon(1e-12));
  CHECK(eval_response_kernel(ti + 3.5, tj + 1.0, ti, tj, 0.5, 3.0) == 0.0);
}

TEST_CASE("response kernel is zero before the treatment") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.0, 24.0), l(0.05, 3.0);
  for (int i = 0; i < 1000; ++i) {
    double ti = u(g), tau = ti - 1e-9 - u(g);
    CHECK(eval_response_kernel(tau, u(g), ti, u(g), l(g), 0.5 + l(g)) == 0.0);
  }
}

TEST_CASE("periodic kernel is exp-sine-squared") {
  double k = eval_periodic(6.0, 2.0, 1.5, 24.0);
  double s = std::sin(std::numbers::pi * 6.0 / 24.0);
  CHECK(k == doctest::Approx(2.0 * std::exp(-2.0 * s * s / 2.25)).epsilon(1e-14));
  CHECK(eval_periodic(24.0, 2.0, 1.5, 24.0) == doctest::Approx(2.0));
}

TEST_CASE("treatment kernel masking and symmetry") {
  auto p = params_1_1();
  RegressiveInput a{10.0, {EventSlot{}}, {EventSlot{}}};
  RegressiveInput b{10.0, {EventSlot{}}, {EventSlot{}}};
  CHECK(eval_treatment_kernel(a, b, p) == doctest::Approx(0.1));

  a.treatments[0] = EventSlot::at(1.5, 40.0);
  CHECK(eval_treatment_kernel(a, b, p) == doctest::Approx(0.1));

  RegressiveInput c{13.0, {EventSlot::at(0.5, 30.0)}, {EventSlot::at(2.0, 6.1)}};
  RegressiveInput d{9.0, {EventSlot::at(2.5, 50.0)}, {EventSlot::at(0.25, 7.3)}};
  // Term-by-term expansion with the slot conventions written out here.
  double expect = 0.1 * std::exp(-16.0 / 7.0) + 0.05 * std::exp(-4.0 / 1.0) +
                  0.15 * std::exp(-(1.75 * 1.75) / 100.0) * std::exp(-(1.2 * 1.2) / 2.5);
  CHECK(eval_treatment_kernel(c, d, p) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(eval_treatment_kernel(c, d, p) == eval_treatment_kernel(d, c, p));

  RegressiveInput wrong{1.0, {}, {EventSlot{}}};
  CHECK_THROWS_AS(eval_treatment_kernel(wrong, d, p), InvalidArgument);
}

TEST_CASE("flipping a slot to placeholder removes exactly its contribution") {
  auto p = params_1_1();
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> t(0.0, 24.0), r(0.0, 6.0), m(2.0, 12.0);
  for (int i = 0; i < 500; ++i) {
    RegressiveInput v{t(g), {EventSlot::at(r(g), m(g))}, {EventSlot::at(r(g), m(g))}};
    RegressiveInput w{t(g), {EventSlot::at(r(g), m(g))}, {EventSlot::at(r(g), m(g))}};
    double full = eval_treatment_kernel(v, w, p);
    double slot = eval_slot_kernel(v.treatments[0], w.treatments[0], p.treatment_slots[0]);
    RegressiveInput v2 = v;
    v2.treatments[0] = EventSlot{};
    double masked = eval_treatment_kernel(v2, w, p);
    CHECK(masked <= full + p.treatment_slots[0].variance);
    CHECK(masked == doctest::Approx(full - slot).epsilon(1e-12));
    CHECK(eval_slot_kernel(v2.treatments[0], w.treatments[0], p.treatment_slots[0]) == 0.0);
  }
}

TEST_CASE("kernels are exactly symmetric") {
  std::mt19937_64 g(7);
  auto k = mixed_kernel();
  auto pts = random_points(g, 2000);
  for (int i = 0; i < 1000; ++i) {
    const auto &x = pts[2 * i], &y = pts[2 * i + 1];
    CHECK(evaluate(k, x, y) == evaluate(k, y, x));
  }
}

TEST_CASE("gram examples") {
  KernelSpec se{kern::SquaredExp{2.0, 1.0}};
  std::vector<KernelPoint> one{{3.0, 0.0, 0.0}};
  auto k1 = gram(one, se, 1e-6);
  CHECK(k1.rows() == 1);
  CHECK(k1(0, 0) == doctest::Approx(2.0 + 1e-6).epsilon(1e-15));

  std::vector<KernelPoint> dup{{3.0, 0.0, 0.0}, {3.0, 0.0, 0.0}};
  auto k2 = gram(dup, se, 1e-6);
  CHECK(k2(0, 1) == 2.0);
  CHECK(k2(0, 0) == doctest::Approx(2.0 + 1e-6).epsilon(1e-15));

  CHECK_THROWS_AS(gram(std::vector<KernelPoint>{}, se), InvalidArgument);
  CHECK_THROWS_AS(gram(one, se, -1.0), InvalidArgument);
}

TEST_CASE("gram entries, Cholesky and PSD") {
  std::mt19937_64 g(9);
  auto k = mixed_kernel();
  auto pts = random_points(g, 8);
  auto K = gram(pts, k, 1e-6);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(K(i, j) == evaluate(k, pts[i], pts[j]) + (i == j ? 1e-6 : 0.0));
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  REQUIRE(llt.info() == Eigen::Success);
  Eigen::MatrixXd L = llt.matrixL();
  CHECK((L * L.transpose() - K).cwiseAbs().maxCoeff() <= 1e-10);

  for (int n : {16, 40, 64}) {
    auto p = random_points(g, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram(p, k, 0.0));
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("parallel gram matches the serial reference") {
  std::mt19937_64 g(13);
  auto k = mixed_kernel();
  auto pts = random_points(g, 300);
  Eigen::MatrixXd a = gram(pts, k), b = reference::gram(pts, k);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kernel spec JSON") {
  nlohmann::json j = mixed_kernel();
  KernelSpec back = j.get<KernelSpec>();
  std::mt19937_64 g(1);
  auto pts = random_points(g, 10);
  for (int i = 0; i + 1 < 10; ++i)
    CHECK(evaluate(back, pts[i], pts[i + 1]) == evaluate(mixed_kernel(), pts[i], pts[i + 1]));

  CHECK_THROWS_AS(nlohmann::json({{"kind", "sum"}, {"children", nlohmann::json::array()}})
                      .get<KernelSpec>(),
                  InvalidArgument);
  CHECK_THROWS_AS(nlohmann::json({{"kind", "squared_exp"}, {"variance", 1.0}, {"lengthscale", -1.0}})
                      .get<KernelSpec>(),
                  InvalidArgument);

  nlohmann::json slot = EventSlot{};
  CHECK(slot["rel_time"] == "inf");
  CHECK_FALSE(slot.get<EventSlot>().present);
}
