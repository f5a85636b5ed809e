#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace tpcausal {

std::uint64_t mix64(std::uint64_t x);

// Counter-based stream: output i is a hash of (key, i). Streams derived from
// the same path are identical, so two runs that ask for the same purpose see
// the same numbers no matter what else was drawn in between.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key = 0) : key_(mix64(key)) {}
  static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  RandomStream child(std::uint64_t tag) const;

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1)
  double normal();
  double exponential(double rate);  // +inf when rate == 0

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Purpose tags for stream derivation.
namespace stream_tag {
inline constexpr std::uint64_t thinning = 1;
inline constexpr std::uint64_t outcome_noise = 2;
inline constexpr std::uint64_t marks = 3;
inline constexpr std::uint64_t abduction = 4;
inline constexpr std::uint64_t simulator = 5;
inline constexpr std::uint64_t rollout = 6;
inline constexpr std::uint64_t trajectory = 7;
}  // namespace stream_tag

}  // namespace tpcausal
