#include "tpcausal/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tpcausal/errors.hpp"

namespace tpcausal {

namespace fs = std::filesystem;

Trajectory PatientRecord::day(int d) const {
  if (d < 0 || d >= days) throw InvalidArgument("day out of range");
  Trajectory tr;
  tr.start = d * day_length;
  tr.end = (d + 1) * day_length;
  for (const auto& a : treatments)
    if (a.time < tr.end) tr.history.treatments.push_back(a);
  for (const auto& o : outcomes)
    if (o.time < tr.end) tr.history.outcomes.push_back(o);
  return tr;
}

void validate_record(const PatientRecord& r) {
  if (r.id.empty()) throw ValidationError("<unnamed>", "empty patient id");
  if (r.days < 1) throw ValidationError(r.id, "days must be >= 1");
  if (!(r.day_length > 0.0)) throw ValidationError(r.id, "day length must be positive");
  const double end = r.days * r.day_length;
  auto check_time = [&](double t, const char* kind) {
    if (!std::isfinite(t) || t < 0.0 || t >= end)
      throw ValidationError(r.id, std::string(kind) + " time outside the record");
  };
  for (std::size_t i = 0; i < r.treatments.size(); ++i) {
    check_time(r.treatments[i].time, "treatment");
    if (!std::isfinite(r.treatments[i].dose) || r.treatments[i].dose < 0.0)
      throw ValidationError(r.id, "negative or non-finite dosage");
    if (i > 0 && !(r.treatments[i].time > r.treatments[i - 1].time))
      throw ValidationError(r.id, "treatment times not strictly increasing");
  }
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    check_time(r.outcomes[i].time, "outcome");
    if (!std::isfinite(r.outcomes[i].value)) throw ValidationError(r.id, "non-finite outcome");
    if (i > 0 && !(r.outcomes[i].time > r.outcomes[i - 1].time))
      throw ValidationError(r.id, "outcome times not strictly increasing");
  }
}

namespace {

double parse_double(std::string_view s, const std::string& file, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(file, line, "bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto c = line.find(',', pos);
    out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

void load_events(PatientRecord& r, const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(file.string(), 0, "cannot open");
  const std::string name = file.string();
  std::string line;
  std::size_t n = 0;
  if (!std::getline(in, line)) throw ParseError(name, 1, "missing header");
  ++n;
  if (line != "day,kind,time,value") throw ParseError(name, 1, "expected header day,kind,time,value");
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) throw ParseError(name, n, "empty line");
    if (line.back() == '\r') throw ParseError(name, n, "CR line ending");
    auto f = split(line);
    if (f.size() != 4) throw ParseError(name, n, "expected 4 fields");
    int day = 0;
    auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), day);
    if (ec != std::errc() || p != f[0].data() + f[0].size()) throw ParseError(name, n, "bad day");
    double t = parse_double(f[2], name, n);
    double v = parse_double(f[3], name, n);
    if (day < 0 || day >= r.days) throw ValidationError(r.id, "line " + std::to_string(n) + ": day out of range");
    if (t < 0.0 || t >= r.day_length)
      throw ValidationError(r.id, "line " + std::to_string(n) + ": time outside the day");
    double abs = day * r.day_length + t;
    if (f[1] == "treatment") {
      if (!r.treatments.empty() && !(abs > r.treatments.back().time))
        throw ValidationError(r.id, "line " + std::to_string(n) + ": treatment times not strictly increasing");
      if (v < 0.0) throw ValidationError(r.id, "line " + std::to_string(n) + ": negative dosage");
      r.treatments.push_back({abs, v});
    } else if (f[1] == "outcome") {
      if (!r.outcomes.empty() && !(abs > r.outcomes.back().time))
        throw ValidationError(r.id, "line " + std::to_string(n) + ": outcome times not strictly increasing");
      r.outcomes.push_back({abs, v});
    } else {
      throw ParseError(name, n, "unknown kind '" + std::string(f[1]) + "'");
    }
  }
}

}  // namespace

std::vector<PatientRecord> load_dataset(const fs::path& path) {
  fs::path manifest = fs::is_directory(path) ? path / "manifest.json" : path;
  fs::path dir = manifest.parent_path();
  std::ifstream in(manifest);
  if (!in) throw ParseError(manifest.string(), 0, "cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest.string(), 0, e.what());
  }
  if (!j.is_object() || !j.contains("patients") || !j["patients"].is_array())
    throw ParseError(manifest.string(), 0, "manifest needs a patients array");
  std::vector<PatientRecord> out;
  for (const auto& p : j["patients"]) {
    PatientRecord r;
    try {
      r.id = p.at("id").get<std::string>();
      r.policy = p.at("policy").get<std::string>();
      r.group = p.at("group").get<int>();
      r.days = p.at("days").get<int>();
      if (p.contains("day_length")) r.day_length = p["day_length"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(manifest.string(), 0, e.what());
    }
    if (r.id.empty() || r.id.find_first_of("/\\") != std::string::npos || r.id[0] == '.')
      throw ValidationError(r.id.empty() ? "<unnamed>" : r.id, "invalid patient id");
    if (r.days < 1) throw ValidationError(r.id, "days must be >= 1");
    load_events(r, dir / (r.id + ".csv"));
    validate_record(r);
    out.push_back(std::move(r));
  }
  return out;
}

void save_dataset(std::span<const PatientRecord> records, const fs::path& dir) {
  for (const auto& r : records) validate_record(r);
  fs::create_directories(dir);
  nlohmann::json j;
  j["patients"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json p{{"id", r.id}, {"policy", r.policy}, {"group", r.group}, {"days", r.days}};
    if (r.day_length != 24.0) p["day_length"] = r.day_length;
    j["patients"].push_back(p);
  }
  {
    std::ofstream os(dir / "manifest.json", std::ios::binary);
    os << j.dump(2) << '\n';
  }
  for (const auto& r : records) {
    std::ofstream os(dir / (r.id + ".csv"), std::ios::binary);
    os << "day,kind,time,value\n";
    char buf[128];
    auto emit = [&](const char* kind, double abs, double v) {
      int day = std::min(r.days - 1, static_cast<int>(std::floor(abs / r.day_length)));
      double t = abs - day * r.day_length;
      std::snprintf(buf, sizeof buf, "%d,%s,%.6f,%.6f\n", day, kind, t, v);
      os << buf;
    };
    // merged by time, treatments first on ties
    std::size_t i = 0, k = 0;
    while (i < r.treatments.size() || k < r.outcomes.size()) {
      if (k == r.outcomes.size() ||
          (i < r.treatments.size() && r.treatments[i].time <= r.outcomes[k].time)) {
        emit("treatment", r.treatments[i].time, r.treatments[i].dose);
        ++i;
      } else {
        emit("outcome", r.outcomes[k].time, r.outcomes[k].value);
        ++k;
      }
    }
  }
}

std::vector<Treatment> dedup_meals(std::span<const Treatment> treatments, double window) {
  if (!is_sorted_strict(treatments)) throw InvalidArgument("treatments must be sorted");
  std::vector<Treatment> out;
  for (const auto& a : treatments) {
    if (!out.empty() && a.time - out.back().time < window)
      out.back().dose += a.dose;
    else
      out.push_back(a);
  }
  return out;
}

double glucose_derivative(std::span<const Outcome> o, std::size_t i) {
  if (o.size() < 2 || i >= o.size()) throw InvalidArgument("need two outcomes and a valid index");
  auto slope = [&](std::size_t a, std::size_t b) {
    return (o[b].value - o[a].value) / (o[b].time - o[a].time);
  };
  if (i == 0) return slope(0, 1);
  if (i + 1 == o.size()) return slope(i - 1, i);
  return 0.5 * (slope(i - 1, i) + slope(i, i + 1));
}

std::vector<Treatment> shift_meal_times(std::span<const Treatment> treatments,
                                        std::span<const Outcome> outcomes, double threshold) {
  if (!is_sorted_strict(treatments) || !is_sorted_strict(outcomes))
    throw InvalidArgument("inputs must be sorted");
  std::vector<Treatment> out(treatments.begin(), treatments.end());
  if (outcomes.size() < 2) return out;
  double limit = std::numeric_limits<double>::infinity();
  for (std::size_t k = out.size(); k-- > 0;) {
    const double t = out[k].time;
    auto it = std::lower_bound(outcomes.begin(), outcomes.end(), t,
                               [](const Outcome& o, double x) { return o.time < x; });
    for (; it != outcomes.end() && it->time < limit; ++it) {
      std::size_t j = static_cast<std::size_t>(it - outcomes.begin());
      if (glucose_derivative(outcomes, j) < threshold) {
        out[k].time = it->time;
        break;
      }
    }
    limit = out[k].time;
  }
  return out;
}

PatientRecord preprocess_record(const PatientRecord& r) {
  validate_record(r);
  PatientRecord p = r;
  p.treatments.clear();
  for (int d = 0; d < r.days; ++d) {
    const double a = d * r.day_length, b = (d + 1) * r.day_length;
    std::vector<Treatment> ta;
    std::vector<Outcome> oa;
    for (const auto& x : r.treatments)
      if (x.time >= a && x.time < b) ta.push_back(x);
    for (const auto& x : r.outcomes)
      if (x.time >= a && x.time < b) oa.push_back(x);
    auto shifted = shift_meal_times(dedup_meals(ta), oa);
    p.treatments.insert(p.treatments.end(), shifted.begin(), shifted.end());
  }
  validate_record(p);
  return p;
}

}  // namespace tpcausal
