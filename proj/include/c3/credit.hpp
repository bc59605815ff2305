#pragma once

// Bucket returns to advantages: clipping, aggregation, leave-one-out and
// full-sample baselines.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "c3/errors.hpp"
#include "c3/protocol.hpp"

namespace c3 {

inline constexpr double kReturnClip = 10.0;

struct CreditTuple {
  int event_type = 0;
  int role = 0;
  ContextKey key;
  Token candidate = 0;
  double advantage = 0.0;
  double behavior_log_prob = 0.0;
};

inline double clip_return(double r) { return std::clamp(r, -kReturnClip, kReturnClip); }

// Mean of clipped returns.
inline double aggregate(std::span<const double> returns) {
  if (returns.empty()) throw InputError("cannot aggregate an empty return list");
  double s = 0.0;
  for (double r : returns) s += clip_return(r);
  return s / static_cast<double>(returns.size());
}

namespace detail {

inline void check_bucket(std::span<const double> means, std::span<const int> counts,
                         std::size_t min_size) {
  if (means.size() != counts.size())
    throw InputError("means and counts must have the same length");
  if (means.size() < min_size)
    throw InputError(min_size == 2 ? "leave-one-out needs at least two candidates"
                                   : "bucket has no candidates");
  for (int c : counts)
    if (c < 1) throw InputError("every candidate needs at least one replay");
}

}  // namespace detail

// Count-weighted mean of every candidate except j.
inline double loo_baseline(std::span<const double> means, std::span<const int> counts,
                           std::size_t j) {
  detail::check_bucket(means, counts, 2);
  if (j >= means.size()) throw InputError("candidate index out of range");
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (i == j) continue;
    weighted += counts[i] * means[i];
    total += counts[i];
  }
  return weighted / total;
}

inline std::vector<double> c3_credit(std::span<const double> means, std::span<const int> counts) {
  detail::check_bucket(means, counts, 2);
  std::vector<double> out(means.size());
  for (std::size_t j = 0; j < means.size(); ++j)
    out[j] = means[j] - loo_baseline(means, counts, j);
  return out;
}

// Ablation baseline: count-weighted mean over all candidates, self included.
inline std::vector<double> full_sample_credit(std::span<const double> means,
                                              std::span<const int> counts) {
  detail::check_bucket(means, counts, 1);
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    weighted += counts[i] * means[i];
    total += counts[i];
  }
  const double b = weighted / total;
  std::vector<double> out(means.size());
  for (std::size_t j = 0; j < means.size(); ++j) out[j] = means[j] - b;
  return out;
}

}  // namespace c3
