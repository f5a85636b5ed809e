#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tpcausal/history.hpp"

namespace tpcausal {

// Times are absolute hours since the start of day 0; day d covers
// [d * day_length, (d + 1) * day_length).
struct PatientRecord {
  std::string id;
  std::string policy;
  int group = 0;
  int days = 1;
  double day_length = 24.0;
  std::vector<Treatment> treatments;
  std::vector<Outcome> outcomes;

  EventHistory history() const { return {treatments, outcomes}; }
  // Events of one day, with earlier days as context.
  Trajectory day(int d) const;
};

// Throws ValidationError naming the record.
void validate_record(const PatientRecord& r);

// `path` is a dataset directory or its manifest.json.
std::vector<PatientRecord> load_dataset(const std::filesystem::path& path);
void save_dataset(std::span<const PatientRecord> records, const std::filesystem::path& dir);

std::vector<Treatment> dedup_meals(std::span<const Treatment> treatments, double window = 2.0);
double glucose_derivative(std::span<const Outcome> outcomes, std::size_t index);
std::vector<Treatment> shift_meal_times(std::span<const Treatment> treatments,
                                        std::span<const Outcome> outcomes, double threshold = 0.5);

// dedup then shift, per day.
PatientRecord preprocess_record(const PatientRecord& r);

}  // namespace tpcausal
