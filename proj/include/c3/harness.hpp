#pragma once

// Budget-matched training runs for C3, the baselines and the ablations, with
// evaluation, diagnostics and a compute ledger.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "c3/credit.hpp"
#include "c3/diagnostics.hpp"
#include "c3/env.hpp"
#include "c3/errors.hpp"
#include "c3/game.hpp"
#include "c3/optimizer.hpp"
#include "c3/parallel.hpp"
#include "c3/policy.hpp"
#include "c3/replay.hpp"
#include "c3/rng.hpp"

namespace c3 {

enum class Method { c3, mappo, magrpo, c3_wo_replay, c3_wo_loo, sft_eval_only };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::c3: return "c3";
    case Method::mappo: return "mappo";
    case Method::magrpo: return "magrpo";
    case Method::c3_wo_replay: return "c3_wo_replay";
    case Method::c3_wo_loo: return "c3_wo_loo";
    case Method::sft_eval_only: return "sft_eval_only";
  }
  return "unknown";
}

inline Method parse_method(const std::string& name) {
  for (Method m : {Method::c3, Method::mappo, Method::magrpo, Method::c3_wo_replay,
                   Method::c3_wo_loo, Method::sft_eval_only})
    if (method_name(m) == name) return m;
  throw InputError("unknown method '" + name + "'");
}

inline bool uses_replay(Method m) { return m == Method::c3 || m == Method::c3_wo_loo; }

// How upstream decisions get credit under replay methods.
//   shared: only terminal-event contexts are replayed; an upstream action is
//           valued by the snapshot-weighted mean of its downstream bucket, so
//           its credit costs no evaluator calls (the two-agent preset).
//   replay: every visited context is its own bucket and draws on the budget.
enum class UpstreamCredit { shared, replay };

struct EvalConfig {
  bool greedy = true;
  int pass_k = 10;
  int samples_n = 10;
};

struct DiagnosticsConfig {
  bool enabled = true;
  int buckets = 50;  // tasks probed; each yields one bucket per occurrence
  int candidates = 4;
  int replays = 8;
  int value_actions = 4;
  int top_k = 64;
  double alpha = 1e-2;
};

struct RunConfig {
  EnvSpec env;
  Method method = Method::c3;
  int budget_B = 8;
  int epochs = 5;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  OptimConfig optim;
  bool crn = true;
  EvalConfig eval;
  std::uint64_t task_seed = 0;
  int reference_rollouts = 2;
  // Target alternatives per replayed bucket, cycled over buckets in order.
  std::vector<int> candidates = {4};
  int max_attempts = 64;
  UpstreamCredit upstream = UpstreamCredit::shared;
  double critic_step = 0.1;
  int workers = 1;
  DiagnosticsConfig diagnostics;

  void validate() const {
    env.validate();
    optim.validate();
    if (seeds.empty()) throw InputError("at least one seed is required");
    if (epochs < 0) throw InputError("epochs must be non-negative");
    if (method != Method::sft_eval_only && budget_B < 2)
      throw InputError("budget must be at least 2");
    if (reference_rollouts < 1) throw InputError("need at least one reference rollout");
    if (candidates.empty()) throw InputError("candidate list must not be empty");
    for (int n : candidates)
      if (n < 2) throw InputError("every bucket needs at least two candidates");
    if (max_attempts < 2) throw InputError("max_attempts must be at least 2");
    if (eval.samples_n < 1 || eval.pass_k < 1 || eval.pass_k > eval.samples_n)
      throw InputError("evaluation needs 1 <= pass_k <= samples_n");
    if (workers < 1) throw InputError("workers must be at least 1");
    if (diagnostics.enabled) {
      if (diagnostics.candidates < 2 || diagnostics.replays < 1 ||
          diagnostics.value_actions < 1 || diagnostics.buckets < 1 || diagnostics.top_k < 1 ||
          diagnostics.alpha < 0.0)
        throw InputError("invalid diagnostics settings");
    }
  }
};

struct LedgerRow {
  std::int64_t step = 0;
  std::int64_t tse_cumulative = 0;
  std::int64_t decision_samples_cumulative = 0;
  std::int64_t actions_generated_cumulative = 0;
  double mean_training_return = 0.0;
};

struct CurveRow {
  int epoch = 0;
  double greedy_return = 0.0;
  double greedy_accuracy = 0.0;
  double mean_training_return = 0.0;
};

struct EvalMetrics {
  double greedy_return = 0.0;
  double greedy_accuracy = 0.0;
  double sampled_return = 0.0;
  double pass_at_1 = 0.0;
  double pass_at_k = 0.0;
};

struct DiagnosticBucketRow {
  int event_type = 0;
  std::uint64_t kappa = 0;
  std::size_t candidate_index = 0;
  Token candidate = 0;
  int count = 0;
  double mean_return = 0.0;
  double credit = 0.0;
  double target_advantage = 0.0;
};

struct DiagnosticsReport {
  double fidelity_rho = 0.0;
  double mean_within_context_variance = 0.0;
  double mean_influence_nats = 0.0;
  std::vector<DiagnosticBucketRow> rows;
  std::vector<Bucket> buckets;
  std::vector<CreditTuple> tuples;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<LedgerRow> ledger;
  std::vector<CurveRow> curves;
  EvalMetrics final_metrics;
  std::optional<DiagnosticsReport> diagnostics;
  PolicyTable policy{std::vector<int>{1}};
};

struct UpdateReport {
  int evaluator_calls = 0;
  std::int64_t decision_samples = 0;
  std::int64_t actions_generated = 0;
  double mean_return = 0.0;
  std::vector<CreditTuple> tuples;
};

// Per-epoch instance order, shared by every method for a given seed.
inline std::vector<std::size_t> task_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng({.run_seed = seed,
                 .purpose = Purpose::task_order,
                 .step = static_cast<std::uint64_t>(epoch)});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

enum class EvalMode { greedy, sampled };

// Greedy: one argmax episode per task (ties to the lowest token). Sampled:
// samples_n episodes per task, pass@1 as mean success and pass@k through the
// unbiased estimator.
inline EvalMetrics evaluate_policy(const Game& game, const PolicyTable& policy,
                                   std::span<const TaskInstance> tasks, EvalMode mode,
                                   const EvalConfig& cfg, std::uint64_t seed) {
  EvalMetrics m;
  if (tasks.empty()) return m;
  const double n_tasks = static_cast<double>(tasks.size());
  for (const auto& task : tasks) {
    const StreamLabel base{.run_seed = seed,
                           .purpose = Purpose::evaluation,
                           .task_id = static_cast<std::uint64_t>(task.task_id)};
    if (mode == EvalMode::greedy) {
      RngStream decisions(base);
      RngStream noise(base.with_purpose(Purpose::env_noise));
      const auto ep = game.play_from(policy, task, {}, 0, std::nullopt, decisions, noise,
                                     ActionMode::greedy);
      m.greedy_return += ep.r / n_tasks;
      m.greedy_accuracy += (ep.correct ? 1.0 : 0.0) / n_tasks;
    } else {
      int successes = 0;
      double ret = 0.0;
      for (int i = 0; i < cfg.samples_n; ++i) {
        StreamLabel label = base;
        label.replay_index = static_cast<std::uint64_t>(i) + 1;
        RngStream decisions(label);
        RngStream noise(label.with_purpose(Purpose::env_noise));
        const auto ep = game.play_from(policy, task, {}, 0, std::nullopt, decisions, noise,
                                       ActionMode::sample);
        successes += ep.correct ? 1 : 0;
        ret += ep.r;
      }
      m.sampled_return += ret / cfg.samples_n / n_tasks;
      m.pass_at_1 += static_cast<double>(successes) / cfg.samples_n / n_tasks;
      m.pass_at_k += pass_at_k(cfg.samples_n, successes, cfg.pass_k) / n_tasks;
    }
  }
  return m;
}

class Trainer {
 public:
  Trainer(const RunConfig& cfg, const Game& game, std::span<const TaskInstance> tasks,
          std::uint64_t seed, int workers)
      : cfg_(cfg),
        game_(game),
        tasks_(tasks),
        seed_(seed),
        workers_(workers),
        theta_(game.make_policy()),
        reference_(theta_),
        critic_(cfg.critic_step) {}

  const PolicyTable& policy() const { return theta_; }
  const CriticTable& critic() const { return critic_; }

  UpdateReport update(const TaskInstance& task) {
    const Snapshot behavior(theta_);
    UpdateReport report = uses_replay(cfg_.method) ? replay_update(behavior, task)
                                                   : episode_update(behavior, task);
    if (report.evaluator_calls != cfg_.budget_B)
      throw BudgetError("ledger mismatch: " + std::to_string(report.evaluator_calls) +
                        " evaluator calls for budget " + std::to_string(cfg_.budget_B));
    if (!report.tuples.empty())
      theta_ = ppo_update(std::move(theta_), behavior, reference_, report.tuples, cfg_.optim);
    ++step_;
    return report;
  }

 private:
  std::vector<double> bucket_credit(std::span<const double> means,
                                    std::span<const int> counts) const {
    return cfg_.method == Method::c3_wo_loo ? full_sample_credit(means, counts)
                                            : c3_credit(means, counts);
  }

  static std::vector<double> clipped_means(const Bucket& b) {
    std::vector<double> out;
    for (const auto& rs : b.returns) out.push_back(aggregate(rs));
    return out;
  }

  CreditTuple make_tuple(const Snapshot& behavior, int event_type, int role,
                         const ContextKey& key, Token a, double advantage) const {
    return {event_type, role, key, a, advantage, log_prob(behavior, role, key, a)};
  }

  UpdateReport replay_update(const Snapshot& behavior, const TaskInstance& task) {
    ExecutionStats stats;
    const TaskInstance* one = &task;
    const auto records = reference_rollouts(game_, behavior, std::span(one, 1),
                                            cfg_.reference_rollouts, seed_, step_, &stats);
    auto all = build_buckets(game_, records);
    const int terminal = game_.protocol().terminal_event();

    std::vector<Bucket> buckets;
    for (auto& b : all)
      if (cfg_.upstream == UpstreamCredit::replay || b.event_type == terminal)
        buckets.push_back(std::move(b));

    std::int64_t proposals = 0;
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      const int N = cfg_.candidates[i % cfg_.candidates.size()];
      const auto draw = sample_alternatives(behavior, buckets[i], N, cfg_.max_attempts,
                                            alternatives_label(seed_, step_, buckets[i]));
      proposals += draw.draws;
      buckets[i].candidates = draw.tokens;
      sizes.push_back(draw.tokens.size());
    }
    const Allocation alloc = allocate_budget(sizes, cfg_.budget_B);
    if (alloc.total() != cfg_.budget_B)
      throw BudgetError("budget " + std::to_string(cfg_.budget_B) +
                        " cannot be allocated to any bucket");

    std::vector<Bucket> kept;
    std::vector<std::vector<int>> counts;
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      if (alloc.counts[i].empty()) continue;
      buckets[i].candidates.resize(alloc.counts[i].size());
      kept.push_back(std::move(buckets[i]));
      counts.push_back(alloc.counts[i]);
    }

    std::vector<ExecutionStats> local(kept.size());
    parallel_for(kept.size(), workers_, [&](std::size_t i) {
      run_bucket(game_, behavior, task, kept[i], counts[i], cfg_.crn, seed_, step_, &local[i]);
    });
    for (const auto& s : local) stats += s;

    UpdateReport report;
    double total_return = 0.0;
    for (const auto& b : kept) {
      const auto means = clipped_means(b);
      const auto credit = bucket_credit(means, b.counts);
      for (std::size_t j = 0; j < b.size(); ++j) {
        report.tuples.push_back(
            make_tuple(behavior, b.event_type, b.role, b.key, b.candidates[j], credit[j]));
        for (double r : b.returns[j]) total_return += r;
      }
    }
    if (cfg_.upstream == UpstreamCredit::shared) shared_upstream_tuples(behavior, task, kept, report);

    report.evaluator_calls = static_cast<int>(stats.evaluator_calls);
    report.decision_samples = stats.decisions();
    // Forced actions were already drawn as proposals.
    report.actions_generated = stats.reference_decisions + proposals + stats.downstream_decisions;
    report.mean_return = total_return / std::max(1, report.evaluator_calls);
    return report;
  }

  // Upstream action p is valued by its terminal bucket: the snapshot-weighted
  // mean of the candidates' replay means. Buckets sharing an upstream context
  // compete through the same baseline rule as any other bucket.
  void shared_upstream_tuples(const Snapshot& behavior, const TaskInstance& task,
                              const std::vector<Bucket>& terminal_buckets,
                              UpdateReport& report) const {
    const auto& terminal = game_.protocol().event(game_.protocol().terminal_event());
    if (terminal.parents.empty()) return;
    const int upstream_event = terminal.parents.front();
    const auto& up = game_.protocol().event(upstream_event);

    struct Group {
      ContextKey key;
      std::vector<Token> actions;
      std::vector<double> values;
      std::vector<int> counts;
    };
    std::vector<Group> groups;
    std::map<std::uint64_t, std::size_t> index;
    for (const auto& b : terminal_buckets) {
      const auto& prefix = b.representative.transcript_prefix;
      auto entry = std::find_if(prefix.begin(), prefix.end(),
                                [&](const auto& e) { return e.event_type == upstream_event; });
      if (entry == prefix.end()) continue;
      const Transcript before(prefix.begin(), entry);
      const ContextKey key = game_.key(game_.context(task, before, entry->node_id));

      const auto probs = behavior.table().probabilities(b.role, b.key.kappa);
      const auto means = clipped_means(b);
      double weighted = 0.0, mass = 0.0;
      int replays = 0;
      for (std::size_t j = 0; j < b.size(); ++j) {
        const double w = probs[static_cast<std::size_t>(b.candidates[j])];
        weighted += w * means[j];
        mass += w;
        replays += b.counts[j];
      }
      auto [it, inserted] = index.try_emplace(key.kappa, groups.size());
      if (inserted) groups.push_back({key, {}, {}, {}});
      auto& g = groups[it->second];
      g.actions.push_back(entry->action);
      g.values.push_back(weighted / mass);
      g.counts.push_back(replays);
    }
    for (const auto& g : groups) {
      if (g.actions.size() < 2) continue;
      const auto credit = bucket_credit(g.values, g.counts);
      for (std::size_t j = 0; j < g.actions.size(); ++j)
        report.tuples.push_back(
            make_tuple(behavior, upstream_event, up.role, g.key, g.actions[j], credit[j]));
    }
  }

  UpdateReport episode_update(const Snapshot& behavior, const TaskInstance& task) {
    const auto B = static_cast<std::size_t>(cfg_.budget_B);
    std::vector<EpisodeOutcome> episodes(B);
    std::vector<ExecutionStats> local(B);
    parallel_for(B, workers_, [&](std::size_t g) {
      const StreamLabel label{.run_seed = seed_,
                              .purpose = Purpose::rollout,
                              .step = step_,
                              .task_id = static_cast<std::uint64_t>(task.task_id),
                              .bucket_key = 1,
                              .replay_index = g};
      RngStream decisions(label);
      RngStream noise(label.with_purpose(Purpose::env_noise));
      episodes[g] = game_.play_from(behavior, task, {}, 0, std::nullopt, decisions, noise,
                                    ActionMode::sample, &local[g]);
    });
    ExecutionStats stats;
    for (const auto& s : local) stats += s;

    std::vector<double> returns;
    for (const auto& ep : episodes) returns.push_back(clip_return(ep.r));

    UpdateReport report;
    if (cfg_.method == Method::mappo) {
      for (std::size_t g = 0; g < B; ++g)
        for (const auto& d : episodes[g].decisions)
          report.tuples.push_back(make_tuple(behavior, d.event_type, d.role, d.key, d.action,
                                             mappo_advantage(critic_, d.event_type, d.key,
                                                             returns[g])));
      for (std::size_t g = 0; g < B; ++g)
        for (const auto& d : episodes[g].decisions)
          critic_update(critic_, d.event_type, d.key, returns[g]);
    } else {
      // Trajectory-level credit: group centering, or leave-one-out across
      // unmatched episodes for the replay ablation.
      const std::vector<int> ones(B, 1);
      const auto credit = cfg_.method == Method::magrpo ? magrpo_credits(returns)
                                                        : c3_credit(returns, ones);
      for (std::size_t g = 0; g < B; ++g)
        for (const auto& d : episodes[g].decisions)
          report.tuples.push_back(
              make_tuple(behavior, d.event_type, d.role, d.key, d.action, credit[g]));
    }
    report.evaluator_calls = static_cast<int>(stats.evaluator_calls);
    report.decision_samples = stats.decisions();
    report.actions_generated = stats.decisions();
    report.mean_return = std::accumulate(returns.begin(), returns.end(), 0.0) /
                         static_cast<double>(B);
    return report;
  }

  const RunConfig& cfg_;
  const Game& game_;
  std::span<const TaskInstance> tasks_;
  std::uint64_t seed_;
  int workers_;
  PolicyTable theta_;
  Snapshot reference_;
  CriticTable critic_;
  std::uint64_t step_ = 0;
};

// Diagnostic pass at a frozen snapshot: one reference rollout per probed
// task, a bucket per visited occurrence, candidate and value-only replays.
inline DiagnosticsReport run_diagnostics(const RunConfig& cfg, const Game& game,
                                         const Snapshot& behavior, const CriticTable* critic,
                                         std::span<const TaskInstance> tasks, std::uint64_t seed,
                                         int workers) {
  const auto& dc = cfg.diagnostics;
  const std::uint64_t step = 1ULL << 40;
  const std::size_t S = std::min(tasks.size(), static_cast<std::size_t>(dc.buckets));

  struct Probe {
    std::vector<Bucket> buckets;
    std::vector<std::vector<TargetAdvantage>> targets;
  };
  std::vector<Probe> probes(S);
  parallel_for(S, workers, [&](std::size_t i) {
    const auto& task = tasks[i];
    const auto records = reference_rollouts(game, behavior, tasks.subspan(i, 1), 1, seed, step);
    for (auto& b : build_buckets(game, records)) {
      const auto draw = sample_alternatives(behavior, b, dc.candidates, 16 * dc.candidates,
                                            alternatives_label(seed, step, b));
      if (draw.dropped) continue;
      b.candidates = draw.tokens;
      const std::vector<int> counts(b.size(), dc.replays);
      run_bucket(game, behavior, task, b, counts, cfg.crn, seed, step);
      probes[i].targets.push_back(target_advantage_replay(game, behavior, task, b,
                                                          dc.value_actions, dc.replays, cfg.crn,
                                                          seed, step));
      probes[i].buckets.push_back(std::move(b));
    }
  });

  DiagnosticsReport report;
  std::vector<double> assigned, targets;
  std::vector<std::vector<double>> credits_per_bucket;
  std::vector<int> all_symbols;
  for (auto& p : probes)
    for (const auto& b : p.buckets)
      for (const auto& d : b.downstream) all_symbols.insert(all_symbols.end(), d.begin(), d.end());
  const auto vocabulary = top_k_symbols(all_symbols, static_cast<std::size_t>(dc.top_k));

  double influence_sum = 0.0;
  int influence_buckets = 0;
  for (auto& p : probes) {
    for (std::size_t k = 0; k < p.buckets.size(); ++k) {
      const auto& b = p.buckets[k];
      std::vector<double> means;
      for (const auto& rs : b.returns) means.push_back(aggregate(rs));
      std::vector<double> credit;
      switch (cfg.method) {
        case Method::c3_wo_loo:
        case Method::magrpo:
          credit = full_sample_credit(means, b.counts);
          break;
        case Method::mappo:
          for (double m : means)
            credit.push_back(m - (critic ? critic->value(b.event_type, b.key) : 0.0));
          break;
        default:
          credit = c3_credit(means, b.counts);
      }
      for (std::size_t j = 0; j < b.size(); ++j) {
        assigned.push_back(credit[j]);
        targets.push_back(p.targets[k][j].delta);
        report.rows.push_back({b.event_type, b.key.kappa, j, b.candidates[j], b.counts[j],
                               means[j], credit[j], p.targets[k][j].delta});
        report.tuples.push_back({b.event_type, b.role, b.key, b.candidates[j], credit[j],
                                 log_prob(behavior, b.role, b.key, b.candidates[j])});
      }
      credits_per_bucket.push_back(credit);

      bool has_teammate = false;
      for (int n = b.representative.target_node + 1; n < game.node_count(); ++n)
        if (game.role_at(n) != b.role) has_teammate = true;
      if (has_teammate) {
        influence_sum += influence(InfluenceTable::from_samples(b.downstream, vocabulary, dc.alpha));
        ++influence_buckets;
      }
      report.buckets.push_back(b);
    }
  }
  if (assigned.size() >= 2) report.fidelity_rho = fidelity(assigned, targets);
  if (!credits_per_bucket.empty())
    report.mean_within_context_variance = within_context_variance(credits_per_bucket);
  if (influence_buckets > 0) report.mean_influence_nats = influence_sum / influence_buckets;
  return report;
}

inline SeedResult run_seed(const RunConfig& cfg, const Game& game,
                           std::span<const TaskInstance> tasks, std::uint64_t seed, int workers) {
  SeedResult result;
  result.seed = seed;
  Trainer trainer(cfg, game, tasks, seed, workers);
  LedgerRow ledger;
  const bool train = cfg.method != Method::sft_eval_only;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_return = 0.0;
    if (train) {
      for (std::size_t idx : task_order(tasks.size(), seed, epoch)) {
        const auto report = trainer.update(tasks[idx]);
        ++ledger.step;
        ledger.tse_cumulative += report.evaluator_calls;
        ledger.decision_samples_cumulative += report.decision_samples;
        ledger.actions_generated_cumulative += report.actions_generated;
        ledger.mean_training_return = report.mean_return;
        result.ledger.push_back(ledger);
        epoch_return += report.mean_return;
      }
    }
    const auto greedy =
        evaluate_policy(game, trainer.policy(), tasks, EvalMode::greedy, cfg.eval, seed);
    result.curves.push_back({epoch + 1, greedy.greedy_return, greedy.greedy_accuracy,
                             tasks.empty() || !train ? 0.0 : epoch_return / tasks.size()});
  }

  const auto greedy = evaluate_policy(game, trainer.policy(), tasks, EvalMode::greedy, cfg.eval, seed);
  const auto sampled =
      evaluate_policy(game, trainer.policy(), tasks, EvalMode::sampled, cfg.eval, seed);
  result.final_metrics = sampled;
  result.final_metrics.greedy_return = greedy.greedy_return;
  result.final_metrics.greedy_accuracy = greedy.greedy_accuracy;

  if (cfg.diagnostics.enabled) {
    const CriticTable* critic = cfg.method == Method::mappo ? &trainer.critic() : nullptr;
    result.diagnostics =
        run_diagnostics(cfg, game, Snapshot(trainer.policy()), critic, tasks, seed, workers);
  }
  result.policy = trainer.policy();
  return result;
}

struct RunResult {
  RunConfig config;
  std::vector<SeedResult> seeds;
};

inline RunResult run(const RunConfig& cfg) {
  cfg.validate();
  const Game game = Game::two_agent(cfg.env);
  const auto tasks = generate_tasks(cfg.env, cfg.task_seed);
  RunResult result{cfg, std::vector<SeedResult>(cfg.seeds.size())};
  const int seed_workers = std::min<int>(cfg.workers, static_cast<int>(cfg.seeds.size()));
  const int inner_workers = std::max(1, cfg.workers / std::max(1, seed_workers));
  parallel_for(cfg.seeds.size(), seed_workers, [&](std::size_t i) {
    result.seeds[i] = run_seed(cfg, game, tasks, cfg.seeds[i], inner_workers);
  });
  return result;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Plain CSV files with a header row, seeds in configuration order.
inline void write_results(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string method = method_name(result.config.method);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    return os;
  };
  using detail::fmt;

  auto curves = open("curves.csv");
  curves << "method,seed,epoch,greedy_return,greedy_accuracy,mean_training_return\n";
  auto final_metrics = open("final_metrics.csv");
  final_metrics << "method,seed,greedy_return,greedy_accuracy,sampled_return,pass_at_1,pass_at_k,k,n\n";
  auto ledger = open("ledger.csv");
  ledger << "method,seed,step,tse_cumulative,decision_samples_cumulative,"
            "actions_generated_cumulative,mean_training_return\n";
  auto diag = open("diagnostics.csv");
  diag << "method,seed,fidelity_rho,mean_within_context_variance,mean_influence_nats\n";
  auto diag_rows = open("diagnostics_buckets.csv");
  diag_rows << "method,seed,v,kappa,candidate_index,candidate,count,mean_return,credit,"
               "target_advantage\n";
  auto dumps = open("buckets.csv");
  dumps << "seed,v,kappa,candidate_index,replay_index,return,crn\n";
  auto credits = open("credits.csv");
  credits << "seed,v,kappa,candidate,A,logprob_b\n";

  for (const auto& s : result.seeds) {
    for (const auto& c : s.curves)
      curves << method << ',' << s.seed << ',' << c.epoch << ',' << fmt(c.greedy_return) << ','
             << fmt(c.greedy_accuracy) << ',' << fmt(c.mean_training_return) << '\n';
    const auto& m = s.final_metrics;
    final_metrics << method << ',' << s.seed << ',' << fmt(m.greedy_return) << ','
                  << fmt(m.greedy_accuracy) << ',' << fmt(m.sampled_return) << ','
                  << fmt(m.pass_at_1) << ',' << fmt(m.pass_at_k) << ','
                  << result.config.eval.pass_k << ',' << result.config.eval.samples_n << '\n';
    for (const auto& l : s.ledger)
      ledger << method << ',' << s.seed << ',' << l.step << ',' << l.tse_cumulative << ','
             << l.decision_samples_cumulative << ',' << l.actions_generated_cumulative << ','
             << fmt(l.mean_training_return) << '\n';
    if (s.diagnostics) {
      const auto& d = *s.diagnostics;
      diag << method << ',' << s.seed << ',' << fmt(d.fidelity_rho) << ','
           << fmt(d.mean_within_context_variance) << ',' << fmt(d.mean_influence_nats) << '\n';
      for (const auto& r : d.rows)
        diag_rows << method << ',' << s.seed << ',' << r.event_type << ',' << r.kappa << ','
                  << r.candidate_index << ',' << r.candidate << ',' << r.count << ','
                  << fmt(r.mean_return) << ',' << fmt(r.credit) << ','
                  << fmt(r.target_advantage) << '\n';
      std::ostringstream dump;
      write_bucket_dump(dump, d.buckets, result.config.crn, false);
      std::istringstream lines(dump.str());
      for (std::string line; std::getline(lines, line);) dumps << s.seed << ',' << line << '\n';
      for (const auto& t : d.tuples)
        credits << s.seed << ',' << t.event_type << ',' << t.key.kappa << ',' << t.candidate
                << ',' << fmt(t.advantage) << ',' << fmt(t.behavior_log_prob) << '\n';
    }
    std::ofstream policy(dir / ("policy_seed" + std::to_string(s.seed) + ".txt"),
                         std::ios::binary);
    s.policy.save(policy);
  }
}

}  // namespace c3
