#pragma once

// Counter-based random streams addressed by structured labels.
//
// Every draw is a pure function of (label, counter), so results never depend
// on which worker runs a replay or in what order replays are scheduled.

#include <cmath>
#include <cstdint>
#include <limits>

namespace c3 {

enum class Purpose : std::uint8_t {
  rollout,
  alt_sample,
  replay,
  env_noise,
  task_generation,
  task_order,
  evaluation,
  diagnostic,
};

inline constexpr std::uint64_t kNoIndex = std::numeric_limits<std::uint64_t>::max();

struct StreamLabel {
  std::uint64_t run_seed = 0;
  Purpose purpose = Purpose::rollout;
  // Update counter within a run; keeps successive updates on fresh streams.
  std::uint64_t step = 0;
  std::uint64_t task_id = 0;
  std::uint64_t bucket_key = 0;
  std::uint64_t replay_index = 0;
  // Candidate index when replays are not coupled; kNoIndex otherwise.
  std::uint64_t candidate = kNoIndex;

  StreamLabel with_purpose(Purpose p) const {
    StreamLabel out = *this;
    out.purpose = p;
    return out;
  }

  friend bool operator==(const StreamLabel&, const StreamLabel&) = default;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t absorb(std::uint64_t state, std::uint64_t word) {
  return splitmix64(state ^ splitmix64(word));
}

}  // namespace detail

inline std::uint64_t stream_key(const StreamLabel& label) {
  std::uint64_t k = 0x6333637265646974ULL;
  k = detail::absorb(k, label.run_seed);
  k = detail::absorb(k, static_cast<std::uint64_t>(label.purpose));
  k = detail::absorb(k, label.step);
  k = detail::absorb(k, label.task_id);
  k = detail::absorb(k, label.bucket_key);
  k = detail::absorb(k, label.replay_index);
  k = detail::absorb(k, label.candidate);
  return k;
}

// Satisfies UniformRandomBitGenerator, but library code only uses uniform()
// so that sampled values are identical across standard library vendors.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(const StreamLabel& label)
      : label_(label), key_(stream_key(label)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::splitmix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  const StreamLabel& label() const { return label_; }
  std::uint64_t counter() const { return counter_; }

 private:
  StreamLabel label_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace c3
