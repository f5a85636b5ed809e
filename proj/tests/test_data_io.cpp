#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tpcausal/data_io.hpp"
#include "tpcausal/errors.hpp"

using namespace tpcausal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("tpcausal_test_data_io_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

PatientRecord random_record(std::mt19937_64& g, const std::string& id) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PatientRecord r;
  r.id = id;
  r.policy = u(g) < 0.5 ? "A" : "B";
  r.group = static_cast<int>(g() % 3);
  r.days = 1 + static_cast<int>(g() % 3);
  double end = 24.0 * r.days;
  for (double t = 0.5 + 4.0 * u(g); t < end; t += 1.0 + 5.0 * u(g)) r.treatments.push_back({round6(t), round6(100.0 * u(g))});
  for (double t = 0.25 * u(g); t < end; t += 0.25) r.outcomes.push_back({round6(t), round6(4.0 + 6.0 * u(g))});
  return r;
}

void save_files(const fs::path& dir, const std::string& manifest, const std::string& csv) {
  write(dir / "manifest.json", manifest);
  write(dir / "p.csv", csv);
}

const char* kOneManifest = R"({"patients": [{"id": "p", "policy": "A", "group": 1, "days": 1}]})";

// Greedy clustering written independently: each cluster is anchored at its
// first event and absorbs everything that starts within the window of it.
std::vector<Treatment> dedup_oracle(const std::vector<Treatment>& a, double w) {
  std::vector<Treatment> out;
  std::size_t i = 0;
  while (i < a.size()) {
    Treatment c = a[i];
    std::size_t j = i + 1;
    while (j < a.size() && a[j].time < a[i].time + w) c.dose += a[j++].dose;
    out.push_back(c);
    i = j;
  }
  return out;
}

double printed_derivative(const std::vector<Outcome>& o, std::size_t i) {
  if (i == 0) return (o[1].value - o[0].value) / (o[1].time - o[0].time);
  if (i + 1 == o.size()) return (o[i].value - o[i - 1].value) / (o[i].time - o[i - 1].time);
  return 0.5 * ((o[i].value - o[i - 1].value) / (o[i].time - o[i - 1].time) +
                (o[i + 1].value - o[i].value) / (o[i + 1].time - o[i].time));
}

// Scan oracle: a meal moves to the first grid point at or after it whose
// derivative is below threshold and which precedes the next (moved) meal.
std::vector<Treatment> shift_oracle(const std::vector<Treatment>& a, const std::vector<Outcome>& o, double thr) {
  std::vector<Treatment> out = a;
  if (o.size() < 2) return out;
  for (std::size_t k = out.size(); k-- > 0;) {
    double next = k + 1 < out.size() ? out[k + 1].time : 1e300;
    for (std::size_t j = 0; j < o.size(); ++j)
      if (o[j].time >= a[k].time && o[j].time < next && printed_derivative(o, j) < thr) {
        out[k].time = o[j].time;
        break;
      }
  }
  return out;
}

}  // namespace

TEST_CASE("save and load round trip byte for byte") {
  std::mt19937_64 g(1);
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(random_record(g, "patient" + std::to_string(i)));
  auto d1 = scratch("rt1"), d2 = scratch("rt2");
  save_dataset(recs, d1);
  auto back = load_dataset(d1);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].id == recs[i].id);
    CHECK(back[i].policy == recs[i].policy);
    CHECK(back[i].group == recs[i].group);
    CHECK(back[i].days == recs[i].days);
    REQUIRE(back[i].treatments.size() == recs[i].treatments.size());
    REQUIRE(back[i].outcomes.size() == recs[i].outcomes.size());
    for (std::size_t k = 0; k < recs[i].outcomes.size(); ++k)
      CHECK(std::abs(back[i].outcomes[k].time - recs[i].outcomes[k].time) <= 1e-9);
  }
  save_dataset(back, d2);
  CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
  for (const auto& r : recs) CHECK(slurp(d1 / (r.id + ".csv")) == slurp(d2 / (r.id + ".csv")));
  CHECK(load_dataset(d1 / "manifest.json").size() == recs.size());
}

TEST_CASE("empty and single-patient datasets") {
  auto d = scratch("empty");
  save_dataset({}, d);
  CHECK(load_dataset(d).empty());

  auto s = scratch("single");
  save_files(s, kOneManifest, "day,kind,time,value\n0,outcome,7.000000,5.2\n0,treatment,7.500000,45\n0,outcome,8.000000,6.1\n");
  auto r = load_dataset(s);
  REQUIRE(r.size() == 1);
  CHECK(r[0].id == "p");
  CHECK(r[0].policy == "A");
  CHECK(r[0].group == 1);
  CHECK(r[0].treatments == std::vector<Treatment>{{7.5, 45.0}});
  CHECK(r[0].outcomes == std::vector<Outcome>{{7.0, 5.2}, {8.0, 6.1}});
}

TEST_CASE("ingestion errors name the line or record") {
  auto d = scratch("bad");
  save_files(d, kOneManifest, "day,kind,time,value\n0,outcome,7.0,5.2\n0,outcome,6.0,6.1\n");
  try {
    load_dataset(d);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(e.record == "p");
  }
  save_files(d, kOneManifest, "day,kind,time,value\n0,outcome,7.0,5.2\n0,snack,7.5,1\n");
  try {
    load_dataset(d);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
  save_files(d, kOneManifest, "day,kind,time,value\n0,outcome,seven,5.2\n");
  CHECK_THROWS_AS(load_dataset(d), ParseError);
  save_files(d, kOneManifest, "day,kind,time\n");
  CHECK_THROWS_AS(load_dataset(d), ParseError);
  save_files(d, kOneManifest, "day,kind,time,value\n0,treatment,7.0,-3\n");
  CHECK_THROWS_AS(load_dataset(d), ValidationError);
  save_files(d, kOneManifest, "day,kind,time,value\n1,treatment,7.0,3\n");
  CHECK_THROWS_AS(load_dataset(d), ValidationError);
  save_files(d, kOneManifest, "day,kind,time,value\n0,outcome,7.0,5\n0,outcome,7.0,6\n");
  CHECK_THROWS_AS(load_dataset(d), ValidationError);
  save_files(d, R"({"patients": [{"id": "p"}]})", "day,kind,time,value\n");
  CHECK_THROWS_AS(load_dataset(d), ParseError);
  save_files(d, "not json", "");
  CHECK_THROWS_AS(load_dataset(d), ParseError);
  CHECK_THROWS_AS(load_dataset(scratch("missing")), ParseError);
}

TEST_CASE("validation is total") {
  // Random corruptions either load into fully valid records or throw.
  std::mt19937_64 g(2);
  auto d = scratch("fuzz");
  const char* rows[] = {"0,outcome,1.0,5", "0,treatment,2.0,30", "0,outcome,0.5,5", "0,treatment,-1,3",
                        "0,outcome,23.999,5", "0,outcome,24.0,5", "0,treatment,3.0,nan", "0,outcome,x,1",
                        "0,treatment,5.0,0", "0,outcome,9,inf"};
  int loaded = 0, rejected = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::string csv = "day,kind,time,value\n";
    int n = static_cast<int>(g() % 5);
    for (int i = 0; i < n; ++i) csv += std::string(rows[g() % 10]) + "\n";
    save_files(d, kOneManifest, csv);
    try {
      for (const auto& r : load_dataset(d)) validate_record(r);
      ++loaded;
    } catch (const ParseError&) {
      ++rejected;
    } catch (const ValidationError&) {
      ++rejected;
    }
  }
  CHECK(loaded > 0);
  CHECK(rejected > 0);
}

TEST_CASE("dedup_meals examples and oracle") {
  auto times = [](const std::vector<Treatment>& v) {
    std::vector<double> t;
    for (const auto& a : v) t.push_back(a.time);
    return t;
  };
  CHECK(times(dedup_meals(std::vector<Treatment>{{8.0, 10}, {9.0, 20}})) == std::vector<double>{8.0});
  CHECK(dedup_meals(std::vector<Treatment>{{8.0, 10}, {9.0, 20}})[0].dose == 30.0);
  CHECK(times(dedup_meals(std::vector<Treatment>{{8.0, 10}, {11.0, 20}})) == std::vector<double>{8.0, 11.0});
  CHECK(times(dedup_meals(std::vector<Treatment>{{8.0, 1}, {9.5, 1}, {10.5, 1}})) == std::vector<double>{8.0, 10.5});
  CHECK(dedup_meals(std::vector<Treatment>{}).empty());

  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Treatment> a;
    for (double t = 3.0 * u(g); t < 48.0; t += 0.1 + 3.0 * u(g)) a.push_back({t, 50.0 * u(g)});
    auto got = dedup_meals(a);
    CHECK(got == dedup_oracle(a, 2.0));
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i].time - got[i - 1].time >= 2.0);
    CHECK(dedup_meals(got) == got);
  }
  std::vector<Treatment> unsorted{{2.0, 1}, {1.0, 1}};
  CHECK_THROWS_AS(dedup_meals(unsorted), InvalidArgument);
}

TEST_CASE("glucose_derivative examples") {
  std::vector<Outcome> flat{{0, 5}, {1, 5}, {2, 5}, {3, 5}};
  for (std::size_t i = 0; i < flat.size(); ++i) CHECK(glucose_derivative(flat, i) == 0.0);
  std::vector<Outcome> line;
  for (int i = 0; i < 6; ++i) line.push_back({0.5 * i, 2.0 * 0.5 * i});
  for (std::size_t i = 0; i < line.size(); ++i) CHECK(glucose_derivative(line, i) == doctest::Approx(2.0));
  std::vector<Outcome> hand{{0, 1}, {1, 3}, {3, 4}};
  CHECK(glucose_derivative(hand, 1) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(glucose_derivative(hand, 0) == 2.0);
  CHECK(glucose_derivative(hand, 2) == 0.5);
  CHECK_THROWS_AS(glucose_derivative(hand, 3), InvalidArgument);
  std::vector<Outcome> one{{0, 1}};
  CHECK_THROWS_AS(glucose_derivative(one, 0), InvalidArgument);
}

TEST_CASE("shift_meal_times examples and oracle") {
  // Derivatives on this grid: 0.05, 1.0, 0.2, -0.4, 0.7.
  std::vector<Outcome> o{{7.0, 5.0}, {7.5, 5.0}, {8.0, 5.05}, {8.5, 6.0}, {9.0, 5.25}, {9.5, 5.6}};
  CHECK(glucose_derivative(o, 1) == doctest::Approx(0.05));
  CHECK(glucose_derivative(o, 2) == doctest::Approx(1.0));
  CHECK(glucose_derivative(o, 3) == doctest::Approx(0.2));
  CHECK(glucose_derivative(o, 5) == doctest::Approx(0.7));
  CHECK(shift_meal_times(std::vector<Treatment>{{7.5, 40}}, o)[0].time == 7.5);
  CHECK(shift_meal_times(std::vector<Treatment>{{8.0, 40}}, o)[0].time == 8.5);
  CHECK(shift_meal_times(std::vector<Treatment>{{7.8, 40}}, o)[0].time == 8.5);
  CHECK(shift_meal_times(std::vector<Treatment>{{9.2, 40}}, o)[0].time == 9.2);
  CHECK(shift_meal_times(std::vector<Treatment>{{9.7, 40}}, o)[0].time == 9.7);
  // A later meal blocks the move.
  auto two = shift_meal_times(std::vector<Treatment>{{8.0, 40}, {8.2, 10}}, o);
  CHECK(two[0].time == 8.0);
  CHECK(two[1].time == 8.5);

  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Outcome> grid;
    double y = 5.0;
    for (double t = 0.0; t < 24.0; t += 0.25) grid.push_back({t, y += 0.6 * (u(g) - 0.45)});
    std::vector<Treatment> a;
    for (double t = 1.0 + 3.0 * u(g); t < 24.0; t += 2.0 + 4.0 * u(g)) a.push_back({t, 40.0});
    auto got = shift_meal_times(a, grid);
    CHECK(got == shift_oracle(a, grid, 0.5));
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].time >= a[k].time);
      if (k) CHECK(got[k].time > got[k - 1].time);
    }
    CHECK(shift_meal_times(got, grid) == got);
  }
}

TEST_CASE("preprocess_record works per day") {
  PatientRecord r;
  r.id = "p";
  r.days = 2;
  r.treatments = {{8.0, 10}, {9.0, 20}, {23.5, 5}, {24.5, 7}};
  for (double t = 0.0; t < 48.0; t += 0.5) r.outcomes.push_back({t, 5.0});
  auto p = preprocess_record(r);
  // 23.5 and 24.5 are within two hours but on different days.
  CHECK(p.treatments == std::vector<Treatment>{{8.0, 30}, {23.5, 5}, {24.5, 7}});
  auto tr = p.day(1);
  CHECK(tr.start == 24.0);
  CHECK(tr.end == 48.0);
  CHECK(tr.history.treatments.size() == 3);
  CHECK_THROWS_AS(p.day(2), InvalidArgument);
}
