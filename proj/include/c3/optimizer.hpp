#pragma once

// Clipped-surrogate policy update with KL anchoring, plus the credit rules of
// the trajectory-centering and critic baselines.

#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "c3/credit.hpp"
#include "c3/errors.hpp"
#include "c3/policy.hpp"

namespace c3 {

struct OptimConfig {
  double clip_epsilon = 0.2;
  double kl_coefficient = 0.01;
  double learning_rate = 0.05;
  int epochs_per_update = 1;
  // Terminal-only supervision fixes both at 1.
  double gamma = 1.0;
  double lambda = 1.0;
  // <= 0 disables gradient-norm clipping.
  double max_grad_norm = 0.0;

  void validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
      throw InputError("clip epsilon must lie in (0, 1)");
    if (kl_coefficient < 0.0) throw InputError("KL coefficient must be non-negative");
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
    if (epochs_per_update < 1) throw InputError("need at least one epoch per update");
    if (gamma != 1.0 || lambda != 1.0)
      throw InputError("gamma and lambda are fixed at 1 under terminal-only returns");
  }
};

using LogitGradient = std::map<PolicyTable::RowKey, std::vector<double>>;

// Gradient of sum_tuples [min(r A, clip(r) A) - beta KL(pi_theta || pi_ref)]
// with respect to the logits of theta.
inline LogitGradient surrogate_gradient(const PolicyTable& theta, const Snapshot& reference,
                                        std::span<const CreditTuple> tuples,
                                        const OptimConfig& cfg) {
  LogitGradient grad;
  for (const auto& t : tuples) {
    const auto lp = theta.log_probabilities(t.role, t.key.kappa);
    if (t.candidate < 0 || static_cast<std::size_t>(t.candidate) >= lp.size())
      throw InputError("credit tuple candidate out of vocabulary");
    auto& g = grad.try_emplace({t.role, t.key.kappa}, lp.size(), 0.0).first->second;
    std::vector<double> pi(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) pi[k] = std::exp(lp[k]);

    const double r = std::exp(lp[static_cast<std::size_t>(t.candidate)] - t.behavior_log_prob);
    const double clipped = std::clamp(r, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    if (r * t.advantage <= clipped * t.advantage) {
      // d(r A)/dz_k = A r (1[k = a] - pi_k)
      for (std::size_t k = 0; k < lp.size(); ++k)
        g[k] -= t.advantage * r * pi[k];
      g[static_cast<std::size_t>(t.candidate)] += t.advantage * r;
    }

    if (cfg.kl_coefficient > 0.0) {
      const auto lq = reference.table().log_probabilities(t.role, t.key.kappa);
      double kl = 0.0;
      for (std::size_t k = 0; k < lp.size(); ++k) kl += pi[k] * (lp[k] - lq[k]);
      // dKL/dz_k = pi_k (log pi_k - log q_k - KL)
      for (std::size_t k = 0; k < lp.size(); ++k)
        g[k] -= cfg.kl_coefficient * pi[k] * (lp[k] - lq[k] - kl);
    }
  }
  return grad;
}

inline double gradient_norm(const LogitGradient& grad) {
  double s = 0.0;
  for (const auto& [key, g] : grad)
    for (double v : g) s += v * v;
  return std::sqrt(s);
}

// Ratios are taken against each tuple's recorded behavior log-likelihood,
// which must come from `behavior`.
inline PolicyTable ppo_update(PolicyTable theta, const Snapshot& behavior,
                              const Snapshot& reference, std::span<const CreditTuple> tuples,
                              const OptimConfig& cfg) {
  cfg.validate();
  if (tuples.empty()) throw InputError("policy update needs at least one tuple");
  for (const auto& t : tuples) {
    if (std::abs(log_prob(behavior, t.role, t.key, t.candidate) - t.behavior_log_prob) > 1e-9)
      throw InputError("credit tuple was not generated by the behavior snapshot");
  }
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    const auto grad = surrogate_gradient(theta, reference, tuples, cfg);
    double scale = cfg.learning_rate;
    if (cfg.max_grad_norm > 0.0) {
      const double norm = gradient_norm(grad);
      if (norm > cfg.max_grad_norm) scale *= cfg.max_grad_norm / norm;
    }
    for (const auto& [key, g] : grad) {
      auto& row = theta.mutable_row(key.first, key.second);
      for (std::size_t k = 0; k < g.size(); ++k) row[k] += scale * g[k];
    }
  }
  return theta;
}

// Group-centered episode returns; each value is shared by every decision of
// its episode.
inline std::vector<double> magrpo_credits(std::span<const double> group_returns) {
  if (group_returns.size() < 2) throw InputError("group needs at least two episodes");
  double mean = 0.0;
  for (double r : group_returns) mean += r;
  mean /= static_cast<double>(group_returns.size());
  std::vector<double> out;
  out.reserve(group_returns.size());
  for (double r : group_returns) out.push_back(r - mean);
  return out;
}

class CriticTable {
 public:
  using Key = std::pair<int, std::uint64_t>;

  explicit CriticTable(double step_size = 0.1) : step_size_(step_size) {
    if (!(step_size > 0.0 && step_size <= 1.0))
      throw InputError("critic step size must lie in (0, 1]");
  }

  double value(int event_type, const ContextKey& key) const {
    auto it = values_.find({event_type, key.kappa});
    return it == values_.end() ? 0.0 : it->second;
  }

  void set(int event_type, const ContextKey& key, double v) {
    values_[{event_type, key.kappa}] = v;
  }

  double step_size() const { return step_size_; }
  std::size_t size() const { return values_.size(); }

 private:
  double step_size_;
  std::map<Key, double> values_;
};

inline double mappo_advantage(const CriticTable& critic, int event_type, const ContextKey& key,
                              double observed_return) {
  return clip_return(observed_return) - critic.value(event_type, key);
}

inline void critic_update(CriticTable& critic, int event_type, const ContextKey& key,
                          double observed_return) {
  const double v = critic.value(event_type, key);
  critic.set(event_type, key, v + critic.step_size() * (clip_return(observed_return) - v));
}

}  // namespace c3
