#pragma once

// Mechanistic estimators: target advantages (replay and exact enumeration),
// credit fidelity, within-context variance, influence and pass@k.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "c3/errors.hpp"
#include "c3/game.hpp"
#include "c3/policy.hpp"
#include "c3/replay.hpp"
#include "c3/rng.hpp"

namespace c3 {

struct TargetAdvantage {
  double q_hat = 0.0;
  double v_hat = 0.0;
  double delta = 0.0;
};

namespace detail {

inline double expected_return(const Game& game, const Snapshot& behavior,
                              const TaskInstance& task, Transcript& transcript, int node) {
  if (node == game.node_count()) {
    double e = 0.0;
    for (const auto& [noise, p] : noise_support(game.env()))
      e += p * game.score(task, transcript, noise);
    return e;
  }
  const auto& event = game.event_at(node);
  const ContextKey k = game.key(game.context(task, transcript, node));
  const auto probs = behavior.table().probabilities(event.role, k.kappa);
  double e = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] == 0.0) continue;
    const Token t = static_cast<Token>(a);
    transcript.push_back({node, event.id, t, game.action_text(event.id, t)});
    e += probs[a] * expected_return(game, behavior, task, transcript, node + 1);
    transcript.pop_back();
  }
  return e;
}

}  // namespace detail

// Exact Q over every action at the state's target occurrence, by enumerating
// downstream decisions under the snapshot and the finite noise support.
inline std::vector<TargetAdvantage> target_advantage_exact(const Game& game,
                                                           const Snapshot& behavior,
                                                           const TaskInstance& task,
                                                           const ReplayState& state) {
  const auto& event = game.event_at(state.target_node);
  const ContextKey k =
      game.key(game.context(task, state.transcript_prefix, state.target_node));
  const auto probs = behavior.table().probabilities(event.role, k.kappa);
  std::vector<TargetAdvantage> out(probs.size());
  double v = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    Transcript transcript = state.transcript_prefix;
    const Token t = static_cast<Token>(a);
    transcript.push_back({state.target_node, event.id, t, game.action_text(event.id, t)});
    out[a].q_hat = detail::expected_return(game, behavior, task, transcript, state.target_node + 1);
    v += probs[a] * out[a].q_hat;
  }
  for (auto& ta : out) {
    ta.v_hat = v;
    ta.delta = ta.q_hat - v;
  }
  return out;
}

// Actions used only to estimate V at a bucket context, with their weights in
// the count-weighted mean.
struct ValueActionSet {
  std::vector<Token> tokens;
  std::vector<double> weights;
};

inline ValueActionSet sample_value_actions(const Snapshot& behavior, const Bucket& bucket,
                                           int J_V, const StreamLabel& label) {
  if (J_V < 1) throw InputError("need at least one value-only action");
  RngStream stream(label);
  const auto probs = behavior.table().probabilities(bucket.role, bucket.key.kappa);
  ValueActionSet out;
  for (int i = 0; i < J_V; ++i) {
    out.tokens.push_back(sample_from(probs, stream));
    out.weights.push_back(1.0);
  }
  return out;
}

// Every token once, weighted by its snapshot probability.
inline ValueActionSet exhaustive_value_actions(const Snapshot& behavior, const Bucket& bucket) {
  const auto probs = behavior.table().probabilities(bucket.role, bucket.key.kappa);
  ValueActionSet out;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    out.tokens.push_back(static_cast<Token>(a));
    out.weights.push_back(probs[a]);
  }
  return out;
}

// q_hat is the candidate's replay mean from the bucket; v_hat replays each
// value-only action c times. Value-only replays use candidate indices after
// the bucket's own, so they share streams with candidates under CRN.
inline std::vector<TargetAdvantage> target_advantage_replay(
    const Game& game, const Snapshot& behavior, const TaskInstance& task, const Bucket& bucket,
    const ValueActionSet& value_actions, int c, bool crn, std::uint64_t seed,
    std::uint64_t step = 0, ExecutionStats* stats = nullptr) {
  if (value_actions.tokens.empty()) throw InputError("need at least one value-only action");
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < value_actions.tokens.size(); ++i) {
    const auto outcomes = replay(game, behavior, task, bucket, bucket.size() + i,
                                 value_actions.tokens[i], c, crn, seed, step, stats);
    double mean = 0.0;
    for (const auto& o : outcomes) mean += o.r;
    mean /= static_cast<double>(outcomes.size());
    weighted += value_actions.weights[i] * c * mean;
    total += value_actions.weights[i] * c;
  }
  if (!(total > 0.0)) throw InputError("value-only action weights must be positive");
  const double v = weighted / total;
  const auto means = bucket.means();
  std::vector<TargetAdvantage> out;
  for (double q : means) out.push_back({q, v, q - v});
  return out;
}

inline std::vector<TargetAdvantage> target_advantage_replay(
    const Game& game, const Snapshot& behavior, const TaskInstance& task, const Bucket& bucket,
    int J_V, int c, bool crn, std::uint64_t seed, std::uint64_t step = 0,
    ExecutionStats* stats = nullptr) {
  const StreamLabel label{.run_seed = seed,
                          .purpose = Purpose::diagnostic,
                          .step = step,
                          .task_id = static_cast<std::uint64_t>(task.task_id),
                          .bucket_key = bucket.id()};
  return target_advantage_replay(game, behavior, task, bucket,
                                 sample_value_actions(behavior, bucket, J_V, label), c, crn,
                                 seed, step, stats);
}

// Average ranks (1-based) with ties sharing the mean of their positions.
// Values within rel_tol * max|x| of a group's smallest member count as tied,
// so credits that agree up to rounding are not ordered by rounding noise.
inline std::vector<double> average_ranks(std::span<const double> xs, double rel_tol = 1e-12) {
  double scale = 0.0;
  for (double x : xs) scale = std::max(scale, std::abs(x));
  const double tol = rel_tol * scale;
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] - xs[order[i]] <= tol) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Spearman correlation: Pearson correlation of average ranks. Zero when
// either side is constant.
inline double fidelity(std::span<const double> assigned, std::span<const double> targets) {
  if (assigned.size() != targets.size())
    throw InputError("fidelity needs lists of equal length");
  if (assigned.size() < 2) throw InputError("fidelity needs at least two pairs");
  const auto ra = average_ranks(assigned);
  const auto rt = average_ranks(targets);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mt = std::accumulate(rt.begin(), rt.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rt[i] - mt);
    saa += (ra[i] - ma) * (ra[i] - ma);
    stt += (rt[i] - mt) * (rt[i] - mt);
  }
  if (saa == 0.0 || stt == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * stt), -1.0, 1.0);
}

inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw InputError("variance needs at least two values");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

// Mean over buckets of the unbiased variance of the credits in each bucket.
inline double within_context_variance(std::span<const std::vector<double>> bucket_credits) {
  if (bucket_credits.empty()) throw InputError("no buckets");
  double s = 0.0;
  for (const auto& credits : bucket_credits) s += sample_variance(credits);
  return s / static_cast<double>(bucket_credits.size());
}

inline constexpr int kOtherSymbol = -2;

// Most frequent symbols across all buckets, ties broken by smaller symbol.
// EMPTY is never counted against the K slots.
inline std::vector<int> top_k_symbols(std::span<const int> symbols, std::size_t K = 64) {
  std::map<int, std::int64_t> freq;
  for (int s : symbols)
    if (s != kEmptySymbol) ++freq[s];
  std::vector<std::pair<int, std::int64_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<int> out;
  for (std::size_t i = 0; i < ranked.size() && i < K; ++i) out.push_back(ranked[i].first);
  std::sort(out.begin(), out.end());
  return out;
}

struct InfluenceTable {
  // counts[j][y] over the active symbols `symbols` (mapped values).
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<int> symbols;
  double alpha = 1e-2;

  // Builds counts from per-candidate downstream symbols, mapping anything
  // outside `vocabulary` to OTHER. Only symbols that occur become columns.
  static InfluenceTable from_samples(std::span<const std::vector<int>> per_candidate,
                                     std::span<const int> vocabulary, double alpha = 1e-2) {
    auto map_symbol = [&](int s) {
      if (s == kEmptySymbol) return s;
      return std::binary_search(vocabulary.begin(), vocabulary.end(), s) ? s : kOtherSymbol;
    };
    InfluenceTable t;
    t.alpha = alpha;
    std::map<int, std::size_t> column;
    for (const auto& samples : per_candidate)
      for (int s : samples) column.emplace(map_symbol(s), 0);
    for (auto& [sym, idx] : column) {
      idx = t.symbols.size();
      t.symbols.push_back(sym);
    }
    for (const auto& samples : per_candidate) {
      std::vector<std::int64_t> row(t.symbols.size(), 0);
      for (int s : samples) ++row[column.at(map_symbol(s))];
      t.counts.push_back(std::move(row));
    }
    return t;
  }
};

// Dirichlet-smoothed I(J; Y | h) in nats under a uniform intervention
// distribution over candidates.
inline double influence(const InfluenceTable& table) {
  const std::size_t J = table.counts.size();
  if (J < 2) throw InputError("influence needs at least two candidates");
  const std::size_t Y = table.symbols.size();
  if (Y == 0) throw InputError("influence needs at least one symbol");
  std::vector<std::vector<double>> cond(J, std::vector<double>(Y, 0.0));
  std::vector<double> marginal(Y, 0.0);
  const double pj = 1.0 / static_cast<double>(J);
  for (std::size_t j = 0; j < J; ++j) {
    if (table.counts[j].size() != Y) throw InputError("ragged influence table");
    double n = 0.0;
    for (auto c : table.counts[j]) {
      if (c < 0) throw InputError("negative influence count");
      n += static_cast<double>(c);
    }
    if (n == 0.0) throw InputError("every candidate needs at least one sample");
    const double denom = n + table.alpha * static_cast<double>(Y);
    for (std::size_t y = 0; y < Y; ++y) {
      cond[j][y] = (static_cast<double>(table.counts[j][y]) + table.alpha) / denom;
      marginal[y] += pj * cond[j][y];
    }
  }
  double mi = 0.0;
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t y = 0; y < Y; ++y)
      if (cond[j][y] > 0.0) mi += pj * cond[j][y] * std::log(cond[j][y] / marginal[y]);
  return std::max(mi, 0.0);
}

// 1 - C(n-c, k) / C(n, k); the ratio is zero when n - c < k.
inline double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n)
    throw InputError("pass@k needs 0 <= c <= n and 1 <= k <= n");
  if (n - c < k) return 1.0;
  double ratio = 1.0;
  for (int i = 0; i < k; ++i)
    ratio *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  return 1.0 - ratio;
}

// d/dz_a E_{a'~softmax(z)} Q(a') = pi_a (Q_a - sum_a' pi_a' Q_a').
inline std::vector<double> softmax_policy_gradient(std::span<const double> probs,
                                                   std::span<const double> q) {
  if (probs.size() != q.size()) throw InputError("probabilities and values differ in size");
  double v = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) v += probs[a] * q[a];
  std::vector<double> g(q.size());
  for (std::size_t a = 0; a < q.size(); ++a) g[a] = probs[a] * (q[a] - v);
  return g;
}

}  // namespace c3
