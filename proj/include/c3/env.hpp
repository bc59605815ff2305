#pragma once

// Synthetic cooperative tasks whose terminal score decomposes into a
// context-level shift, a marginal decision effect, and zero-mean noise.

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "c3/errors.hpp"
#include "c3/protocol.hpp"
#include "c3/rng.hpp"

namespace c3 {

struct EnvSpec {
  int plan_vocab_size = 4;
  int answer_vocab_size = 4;
  double shift_lo = 0.0;
  double shift_hi = 0.5;
  double delta_gain = 0.4;
  double noise_sd = 0.05;
  int task_count = 200;
  double plan_sensitive_fraction = 0.5;

  void validate() const {
    if (plan_vocab_size < 2 || answer_vocab_size < 2)
      throw InputError("vocabularies need at least two tokens");
    if (!(0.0 <= shift_lo && shift_lo <= shift_hi && shift_hi <= 0.5))
      throw InputError("shift range must lie inside [0, 0.5]");
    if (!(delta_gain > 0.0 && delta_gain <= 1.0))
      throw InputError("delta gain must lie in (0, 1]");
    if (noise_sd < 0.0) throw InputError("noise sd must be non-negative");
    if (task_count < 0) throw InputError("task count must be non-negative");
    if (!(0.0 <= plan_sensitive_fraction && plan_sensitive_fraction <= 1.0))
      throw InputError("plan-sensitive fraction must lie in [0, 1]");
  }
};

struct TaskInstance {
  std::int64_t task_id = 0;
  std::string observable_text;
  double shift_m = 0.0;
  bool plan_sensitive = false;
  int plan_vocab = 0;
  int answer_vocab = 0;
  // Row-major plan x answer; each entry is 0 or delta_gain.
  std::vector<double> delta_table;
  Token gold_plan = 0;
  Token gold_answer = 0;

  double delta(Token plan, Token answer) const {
    check(plan, answer);
    return delta_table[static_cast<std::size_t>(plan) * answer_vocab + answer];
  }

  void check(Token plan, Token answer) const {
    if (plan < 0 || plan >= plan_vocab)
      throw InputError("plan token " + std::to_string(plan) + " out of vocabulary");
    if (answer < 0 || answer >= answer_vocab)
      throw InputError("answer token " + std::to_string(answer) +
                       " out of vocabulary");
  }
};

inline std::vector<TaskInstance> generate_tasks(const EnvSpec& spec,
                                                std::uint64_t seed) {
  spec.validate();
  std::vector<TaskInstance> tasks;
  tasks.reserve(static_cast<std::size_t>(spec.task_count));
  for (int id = 0; id < spec.task_count; ++id) {
    RngStream rng({.run_seed = seed,
                   .purpose = Purpose::task_generation,
                   .task_id = static_cast<std::uint64_t>(id)});
    TaskInstance t;
    t.task_id = id;
    t.observable_text = "task-" + std::to_string(id);
    t.plan_vocab = spec.plan_vocab_size;
    t.answer_vocab = spec.answer_vocab_size;
    t.shift_m = spec.shift_lo + (spec.shift_hi - spec.shift_lo) * rng.uniform();
    t.plan_sensitive = rng.bernoulli(spec.plan_sensitive_fraction);
    t.delta_table.assign(
        static_cast<std::size_t>(spec.plan_vocab_size) * spec.answer_vocab_size, 0.0);
    const auto answers = static_cast<std::uint64_t>(spec.answer_vocab_size);
    const Token shared = static_cast<Token>(rng.below(answers));
    for (Token p = 0; p < spec.plan_vocab_size; ++p) {
      const Token correct = t.plan_sensitive ? static_cast<Token>(rng.below(answers))
                                             : shared;
      t.delta_table[static_cast<std::size_t>(p) * spec.answer_vocab_size + correct] =
          spec.delta_gain;
    }
    t.gold_plan = static_cast<Token>(
        rng.below(static_cast<std::uint64_t>(spec.plan_vocab_size)));
    for (Token a = 0; a < spec.answer_vocab_size; ++a)
      if (t.delta(t.gold_plan, a) > 0.0) t.gold_answer = a;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

inline double evaluate(const TaskInstance& task, Token plan, Token answer,
                       double noise_draw) {
  const double raw = task.shift_m + task.delta(plan, answer) + noise_draw;
  return std::clamp(raw, 0.0, 1.0);
}

struct ReturnComponents {
  double m = 0.0;
  double delta = 0.0;
};

inline ReturnComponents oracle_components(const TaskInstance& task, Token plan,
                                          Token answer) {
  return {task.shift_m, task.delta(plan, answer)};
}

// Terminal correctness check used for accuracy and pass@k.
inline bool is_correct(const TaskInstance& task, Token plan, Token answer) {
  return task.delta(plan, answer) > 0.0;
}

// Two-point noise: -sd or +sd with equal probability.
inline double draw_noise(const EnvSpec& spec, RngStream& rng) {
  if (spec.noise_sd == 0.0) return 0.0;
  return rng.bernoulli(0.5) ? spec.noise_sd : -spec.noise_sd;
}

inline std::vector<std::pair<double, double>> noise_support(const EnvSpec& spec) {
  if (spec.noise_sd == 0.0) return {{0.0, 1.0}};
  return {{-spec.noise_sd, 0.5}, {spec.noise_sd, 0.5}};
}

}  // namespace c3
