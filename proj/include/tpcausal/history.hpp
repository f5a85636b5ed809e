#pragma once

#include <span>
#include <vector>

namespace tpcausal {

struct Treatment {
  double time;
  double dose;
  bool operator==(const Treatment&) const = default;
};

struct Outcome {
  double time;
  double value;
  bool operator==(const Outcome&) const = default;
};

// Absolute times in hours since the patient's record start.
struct EventHistory {
  std::vector<Treatment> treatments;
  std::vector<Outcome> outcomes;
};

// One observation window. Events before `start` are context only.
struct Trajectory {
  double start = 0.0;
  double end = 24.0;
  EventHistory history;
};

bool is_sorted_strict(std::span<const Treatment> a);
bool is_sorted_strict(std::span<const Outcome> o);
std::vector<double> treatment_times(std::span<const Treatment> a);

}  // namespace tpcausal
