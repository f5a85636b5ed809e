#pragma once

#include <span>
#include <string>

#include "tpcausal/history.hpp"
#include "tpcausal/random.hpp"

namespace tpcausal {

// A treatment mechanism: conditional intensity plus dosage distribution.
class TreatmentPolicy {
 public:
  virtual ~TreatmentPolicy() = default;
  // Rate at t given events strictly before t; `history` may also hold later
  // events, which are ignored.
  virtual double intensity(const EventHistory& history, double t) const = 0;
  virtual double sample_mark(double t, RandomStream& rng) const = 0;
  virtual const std::string& label() const = 0;
};

// Noise-free outcome mean under a given treatment sequence.
class OutcomePredictor {
 public:
  virtual ~OutcomePredictor() = default;
  virtual double mean(double t, std::span<const Treatment> treatments) const = 0;
  virtual double noise_std() const = 0;
};

}  // namespace tpcausal
