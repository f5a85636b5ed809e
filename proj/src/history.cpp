#include "tpcausal/history.hpp"

namespace tpcausal {

bool is_sorted_strict(std::span<const Treatment> a) {
  for (std::size_t i = 1; i < a.size(); ++i)
    if (!(a[i].time > a[i - 1].time)) return false;
  return true;
}

bool is_sorted_strict(std::span<const Outcome> o) {
  for (std::size_t i = 1; i < o.size(); ++i)
    if (!(o[i].time > o[i - 1].time)) return false;
  return true;
}

std::vector<double> treatment_times(std::span<const Treatment> a) {
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) t[i] = a[i].time;
  return t;
}

}  // namespace tpcausal
