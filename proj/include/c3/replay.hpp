#pragma once

// Reference rollouts, (event type, context key) buckets, alternative
// sampling, budget allocation and fixed-continuation replay.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c3/errors.hpp"
#include "c3/game.hpp"
#include "c3/parallel.hpp"
#include "c3/policy.hpp"
#include "c3/protocol.hpp"
#include "c3/rng.hpp"

namespace c3 {

struct ReplayState {
  std::int64_t task_id = 0;
  Transcript transcript_prefix;
  int target_node = 0;
  StreamLabel stream_base;
};

struct VisitRecord {
  int event_type = 0;
  ReplayState state;
  std::string context;
  ContextKey key;
};

inline std::uint64_t bucket_key(int event_type, const ContextKey& key) {
  return detail::absorb(detail::splitmix64(static_cast<std::uint64_t>(event_type)),
                        key.kappa);
}

// K unscored episodes per task under the snapshot. Every occurrence's replay
// state is recorded; the terminal action is never needed, so it is not drawn.
inline std::vector<VisitRecord> reference_rollouts(const Game& game, const Snapshot& behavior,
                                                   std::span<const TaskInstance> tasks, int K,
                                                   std::uint64_t seed, std::uint64_t step = 0,
                                                   ExecutionStats* stats = nullptr) {
  if (K < 1) throw InputError("reference rollouts need K >= 1");
  std::vector<VisitRecord> records;
  for (const auto& task : tasks) {
    for (int k = 0; k < K; ++k) {
      const StreamLabel label{.run_seed = seed,
                              .purpose = Purpose::rollout,
                              .step = step,
                              .task_id = static_cast<std::uint64_t>(task.task_id),
                              .bucket_key = 0,
                              .replay_index = static_cast<std::uint64_t>(k)};
      RngStream stream(label);
      Transcript transcript;
      for (int node = 0; node < game.node_count(); ++node) {
        const auto& event = game.event_at(node);
        VisitRecord rec;
        rec.event_type = event.id;
        rec.context = game.context(task, transcript, node);
        rec.key = game.key(rec.context);
        rec.state = {task.task_id, transcript, node, label};
        records.push_back(rec);
        if (event.id == game.protocol().terminal_event()) break;
        const Token a = sample_action(behavior, event.role, rec.key, stream);
        if (stats) ++stats->reference_decisions;
        transcript.push_back({node, event.id, a, game.action_text(event.id, a)});
      }
    }
  }
  return records;
}

struct Bucket {
  int event_type = 0;
  int role = 0;
  ContextKey key;
  std::string context;
  ReplayState representative;
  std::vector<Token> candidates;
  std::vector<int> counts;
  std::vector<std::vector<double>> returns;
  std::vector<std::vector<int>> downstream;  // teammate symbol per replay

  std::uint64_t id() const { return bucket_key(event_type, key); }
  std::size_t size() const { return candidates.size(); }

  std::vector<double> means() const;
};

// One bucket per distinct (event type, kappa), first visit as representative.
inline std::vector<Bucket> build_buckets(const Game& game, std::span<const VisitRecord> records) {
  if (records.empty()) throw InputError("no visit records to bucket");
  std::vector<Bucket> buckets;
  std::map<std::pair<int, std::uint64_t>, std::size_t> index;
  for (const auto& rec : records) {
    verify_key(rec.key, rec.context);
    auto [it, inserted] = index.try_emplace({rec.event_type, rec.key.kappa}, buckets.size());
    if (!inserted) {
      verify_key(buckets[it->second].key, rec.context);
      continue;
    }
    Bucket b;
    b.event_type = rec.event_type;
    b.role = game.protocol().event(rec.event_type).role;
    b.key = rec.key;
    b.context = rec.context;
    b.representative = rec.state;
    buckets.push_back(std::move(b));
  }
  return buckets;
}

enum class Dedup { exact, none };

struct AlternativeDraw {
  std::vector<Token> tokens;
  int draws = 0;
  bool dropped = false;
};

// Draws up to N tokens from the snapshot at the bucket context. With exact
// dedup, repeats are discarded and the bucket is dropped if fewer than two
// distinct tokens appear within max_attempts draws.
inline AlternativeDraw sample_alternatives(const Snapshot& behavior, const Bucket& bucket, int N,
                                           int max_attempts, const StreamLabel& label,
                                           Dedup dedup = Dedup::exact) {
  if (N < 2) throw InputError("need at least two alternatives");
  RngStream stream(label);
  AlternativeDraw out;
  const auto probs = behavior.table().probabilities(bucket.role, bucket.key.kappa);
  if (dedup == Dedup::none) {
    for (int i = 0; i < N; ++i) out.tokens.push_back(sample_from(probs, stream));
    out.draws = N;
    return out;
  }
  while (static_cast<int>(out.tokens.size()) < N && out.draws < max_attempts) {
    const Token t = sample_from(probs, stream);
    ++out.draws;
    if (std::find(out.tokens.begin(), out.tokens.end(), t) == out.tokens.end())
      out.tokens.push_back(t);
  }
  if (out.tokens.size() < 2) {
    out.tokens.clear();
    out.dropped = true;
  }
  return out;
}

inline StreamLabel alternatives_label(std::uint64_t seed, std::uint64_t step,
                                      const Bucket& bucket) {
  return {.run_seed = seed,
          .purpose = Purpose::alt_sample,
          .step = step,
          .task_id = static_cast<std::uint64_t>(bucket.representative.task_id),
          .bucket_key = bucket.id()};
}

struct Allocation {
  // counts[b][j]; a bucket with an empty row was dropped.
  std::vector<std::vector<int>> counts;

  int total() const {
    int t = 0;
    for (const auto& row : counts)
      for (int c : row) t += c;
    return t;
  }
};

// Round-robin, one replay per candidate in bucket order, until B is used.
// When B cannot cover every candidate, whole buckets are kept in order while
// they fit; the first bucket that does not fit keeps as many candidates as
// remain (if at least two) and later buckets are dropped.
inline Allocation allocate_budget(std::span<const std::size_t> bucket_sizes, int B) {
  if (B < 0) throw InputError("budget must be non-negative");
  std::vector<std::size_t> kept(bucket_sizes.size(), 0);
  std::size_t remaining = static_cast<std::size_t>(B);
  for (std::size_t b = 0; b < bucket_sizes.size(); ++b) {
    if (bucket_sizes[b] < 2) continue;
    if (bucket_sizes[b] <= remaining) {
      kept[b] = bucket_sizes[b];
      remaining -= bucket_sizes[b];
    } else {
      if (remaining >= 2) kept[b] = remaining;
      break;
    }
  }
  Allocation out;
  out.counts.resize(bucket_sizes.size());
  std::size_t slots = 0;
  for (std::size_t b = 0; b < kept.size(); ++b) {
    out.counts[b].assign(kept[b], 0);
    slots += kept[b];
  }
  if (slots == 0) return out;
  int left = B;
  while (left > 0) {
    for (auto& row : out.counts) {
      for (int& c : row) {
        if (left == 0) break;
        ++c;
        --left;
      }
    }
  }
  return out;
}

struct ReplayOutcome {
  double r = 0.0;
  bool correct = false;
  int teammate_symbol = kEmptySymbol;
};

// Stream for replay index t of candidate j. With CRN every candidate shares
// the stream at equal t.
inline StreamLabel replay_label(std::uint64_t seed, std::uint64_t step, const Bucket& bucket,
                                std::size_t candidate_index, int t, bool crn) {
  return {.run_seed = seed,
          .purpose = Purpose::replay,
          .step = step,
          .task_id = static_cast<std::uint64_t>(bucket.representative.task_id),
          .bucket_key = bucket.id(),
          .replay_index = static_cast<std::uint64_t>(t),
          .candidate = crn ? kNoIndex : static_cast<std::uint64_t>(candidate_index)};
}

// Restarts from the representative state, forces the candidate at the target
// occurrence, samples the continuation from the snapshot, scores once per
// replay.
inline std::vector<ReplayOutcome> replay(const Game& game, const Snapshot& behavior,
                                         const TaskInstance& task, const Bucket& bucket,
                                         std::size_t candidate_index, Token candidate, int c,
                                         bool crn, std::uint64_t seed, std::uint64_t step = 0,
                                         ExecutionStats* stats = nullptr) {
  if (c < 1) throw InputError("replay count must be at least one");
  if (task.task_id != bucket.representative.task_id)
    throw InputError("task does not match the bucket's replay state");
  std::vector<ReplayOutcome> out;
  out.reserve(static_cast<std::size_t>(c));
  for (int t = 0; t < c; ++t) {
    const StreamLabel label = replay_label(seed, step, bucket, candidate_index, t, crn);
    RngStream decisions(label);
    RngStream noise(label.with_purpose(Purpose::env_noise));
    auto ep = game.play_from(behavior, task, bucket.representative.transcript_prefix,
                             bucket.representative.target_node, candidate, decisions, noise,
                             ActionMode::sample, stats);
    out.push_back({ep.r, ep.correct, ep.teammate_symbol});
  }
  return out;
}

// Fills returns/downstream for every candidate according to `counts`.
inline void run_bucket(const Game& game, const Snapshot& behavior, const TaskInstance& task,
                       Bucket& bucket, std::span<const int> counts, bool crn, std::uint64_t seed,
                       std::uint64_t step = 0, ExecutionStats* stats = nullptr) {
  if (counts.size() != bucket.candidates.size())
    throw InputError("counts do not match the bucket's candidates");
  bucket.counts.assign(counts.begin(), counts.end());
  bucket.returns.assign(bucket.size(), {});
  bucket.downstream.assign(bucket.size(), {});
  for (std::size_t j = 0; j < bucket.size(); ++j) {
    for (const auto& o : replay(game, behavior, task, bucket, j, bucket.candidates[j],
                                counts[j], crn, seed, step, stats)) {
      bucket.returns[j].push_back(o.r);
      bucket.downstream[j].push_back(o.teammate_symbol);
    }
  }
}

inline std::vector<double> Bucket::means() const {
  std::vector<double> out;
  out.reserve(returns.size());
  for (const auto& rs : returns) {
    if (rs.empty()) throw InputError("candidate has no replay returns");
    double s = 0.0;
    for (double r : rs) s += r;
    out.push_back(s / static_cast<double>(rs.size()));
  }
  return out;
}

// One record per replay: v,kappa,candidate_index,replay_index,return,crn
inline void write_bucket_dump(std::ostream& os, std::span<const Bucket> buckets, bool crn,
                              bool header = true) {
  if (header) os << "v,kappa,candidate_index,replay_index,return,crn\n";
  char buf[32];
  for (const auto& b : buckets) {
    for (std::size_t j = 0; j < b.returns.size(); ++j) {
      for (std::size_t t = 0; t < b.returns[j].size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g", b.returns[j][t]);
        os << b.event_type << ',' << b.key.kappa << ',' << j << ',' << t << ',' << buf << ','
           << (crn ? 1 : 0) << '\n';
      }
    }
  }
}

}  // namespace c3
