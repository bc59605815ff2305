#pragma once

// Role-conditioned tabular softmax policy keyed by context key.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "c3/errors.hpp"
#include "c3/protocol.hpp"
#include "c3/rng.hpp"

namespace c3 {

// Stable log-softmax with max subtraction.
inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  const double log_norm = top + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_norm;
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

class PolicyTable {
 public:
  using RowKey = std::pair<int, std::uint64_t>;

  explicit PolicyTable(std::vector<int> role_vocab) : role_vocab_(std::move(role_vocab)) {
    if (role_vocab_.empty()) throw InputError("policy needs at least one role");
    for (int v : role_vocab_)
      if (v < 1) throw InputError("role vocabulary must be non-empty");
  }

  int role_count() const { return static_cast<int>(role_vocab_.size()); }
  const std::vector<int>& role_vocab() const { return role_vocab_; }

  int vocab(int role) const {
    if (role < 0 || role >= role_count())
      throw InputError("role " + std::to_string(role) + " out of range");
    return role_vocab_[static_cast<std::size_t>(role)];
  }

  bool has_row(int role, std::uint64_t kappa) const {
    return rows_.contains({role, kappa});
  }

  // Unseen contexts read as the zero row (uniform policy).
  std::vector<double> logits(int role, std::uint64_t kappa) const {
    auto it = rows_.find({role, kappa});
    if (it == rows_.end())
      return std::vector<double>(static_cast<std::size_t>(vocab(role)), 0.0);
    return it->second;
  }

  std::vector<double>& mutable_row(int role, std::uint64_t kappa) {
    auto [it, inserted] = rows_.try_emplace(
        {role, kappa}, static_cast<std::size_t>(vocab(role)), 0.0);
    return it->second;
  }

  std::vector<double> probabilities(int role, std::uint64_t kappa) const {
    return softmax(logits(role, kappa));
  }

  std::vector<double> log_probabilities(int role, std::uint64_t kappa) const {
    return log_softmax(logits(role, kappa));
  }

  const std::map<RowKey, std::vector<double>>& rows() const { return rows_; }

  // One line per stored row: role,kappa,logit_0,...,logit_{V-1}
  void save(std::ostream& os) const {
    for (const auto& [key, row] : rows_) {
      os << key.first << ',' << key.second;
      for (double z : row) os << ',' << format_exact(z);
      os << '\n';
    }
  }

  static PolicyTable load(std::istream& is, std::vector<int> role_vocab) {
    PolicyTable table(std::move(role_vocab));
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string field;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      if (fields.size() < 3) throw InputError("malformed policy row: " + line);
      const int role = std::stoi(fields[0]);
      const std::uint64_t kappa = std::stoull(fields[1]);
      auto& row = table.mutable_row(role, kappa);
      if (fields.size() - 2 != row.size())
        throw InputError("policy row has the wrong vocabulary size: " + line);
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = std::stod(fields[i + 2]);
    }
    return table;
  }

  friend bool operator==(const PolicyTable&, const PolicyTable&) = default;

 private:
  static std::string format_exact(double z) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", z);
    return buf;
  }

  std::vector<int> role_vocab_;
  std::map<RowKey, std::vector<double>> rows_;
};

// Frozen copy of a policy; shares storage, never changes.
class Snapshot {
 public:
  explicit Snapshot(const PolicyTable& live)
      : table_(std::make_shared<const PolicyTable>(live)) {}

  const PolicyTable& table() const { return *table_; }
  operator const PolicyTable&() const { return *table_; }

 private:
  std::shared_ptr<const PolicyTable> table_;
};

inline Token sample_from(std::span<const double> probs, RngStream& stream) {
  const double u = stream.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<Token>(i);
  }
  // u landed in the rounding gap above the last partial sum.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<Token>(i);
  return 0;
}

inline Token sample_action(const PolicyTable& policy, int role,
                           const ContextKey& key, RngStream& stream) {
  const auto probs = policy.probabilities(role, key.kappa);
  return sample_from(probs, stream);
}

// Ties go to the lowest token index.
inline Token greedy_action(const PolicyTable& policy, int role, const ContextKey& key) {
  const auto row = policy.logits(role, key.kappa);
  return static_cast<Token>(std::max_element(row.begin(), row.end()) - row.begin());
}

inline double log_prob(const PolicyTable& policy, int role, const ContextKey& key,
                       Token token) {
  if (token < 0 || token >= policy.vocab(role))
    throw InputError("token " + std::to_string(token) + " out of vocabulary");
  return policy.log_probabilities(role, key.kappa)[static_cast<std::size_t>(token)];
}

inline double ratio(const PolicyTable& theta, const Snapshot& behavior, int role,
                    const ContextKey& key, Token token) {
  return std::exp(log_prob(theta, role, key, token) -
                  log_prob(behavior, role, key, token));
}

// KL(theta || reference) at one context.
inline double kl_to_reference(const PolicyTable& theta, const Snapshot& reference,
                              int role, const ContextKey& key) {
  const auto lp = theta.log_probabilities(role, key.kappa);
  const auto lq = reference.table().log_probabilities(role, key.kappa);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const double p = std::exp(lp[i]);
    if (p > 0.0) kl += p * (lp[i] - lq[i]);
  }
  return std::max(kl, 0.0);
}

}  // namespace c3
