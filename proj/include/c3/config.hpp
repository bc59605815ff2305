#pragma once

// JSON run configuration. Keys mirror the RunConfig field names; unknown keys
// are rejected so typos do not silently fall back to defaults.

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "c3/harness.hpp"

namespace c3 {

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw InputError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  RunConfig cfg;
  detail::check_keys(j,
                     {"env", "method", "budget_B", "epochs", "seeds", "optim", "crn", "eval",
                      "task_seed", "reference_rollouts", "candidates", "max_attempts", "upstream",
                      "critic_step", "workers", "diagnostics"},
                     "config");
  if (auto it = j.find("env"); it != j.end()) {
    detail::check_keys(*it,
                       {"plan_vocab_size", "answer_vocab_size", "shift_range", "delta_gain",
                        "noise_sd", "task_count", "plan_sensitive_fraction"},
                       "env");
    auto& e = cfg.env;
    read(*it, "plan_vocab_size", e.plan_vocab_size);
    read(*it, "answer_vocab_size", e.answer_vocab_size);
    if (auto r = it->find("shift_range"); r != it->end()) {
      if (!r->is_array() || r->size() != 2) throw InputError("shift_range must be [lo, hi]");
      e.shift_lo = (*r)[0].get<double>();
      e.shift_hi = (*r)[1].get<double>();
    }
    read(*it, "delta_gain", e.delta_gain);
    read(*it, "noise_sd", e.noise_sd);
    read(*it, "task_count", e.task_count);
    read(*it, "plan_sensitive_fraction", e.plan_sensitive_fraction);
  }
  if (auto it = j.find("method"); it != j.end()) cfg.method = parse_method(it->get<std::string>());
  read(j, "budget_B", cfg.budget_B);
  read(j, "epochs", cfg.epochs);
  read(j, "seeds", cfg.seeds);
  if (auto it = j.find("optim"); it != j.end()) {
    detail::check_keys(*it,
                       {"clip_epsilon", "kl_coefficient", "learning_rate", "epochs_per_update",
                        "gamma", "lambda", "max_grad_norm"},
                       "optim");
    auto& o = cfg.optim;
    read(*it, "clip_epsilon", o.clip_epsilon);
    read(*it, "kl_coefficient", o.kl_coefficient);
    read(*it, "learning_rate", o.learning_rate);
    read(*it, "epochs_per_update", o.epochs_per_update);
    read(*it, "gamma", o.gamma);
    read(*it, "lambda", o.lambda);
    read(*it, "max_grad_norm", o.max_grad_norm);
  }
  read(j, "crn", cfg.crn);
  if (auto it = j.find("eval"); it != j.end()) {
    detail::check_keys(*it, {"greedy", "pass_k", "samples_n"}, "eval");
    read(*it, "greedy", cfg.eval.greedy);
    read(*it, "pass_k", cfg.eval.pass_k);
    read(*it, "samples_n", cfg.eval.samples_n);
  }
  read(j, "task_seed", cfg.task_seed);
  read(j, "reference_rollouts", cfg.reference_rollouts);
  read(j, "candidates", cfg.candidates);
  read(j, "max_attempts", cfg.max_attempts);
  if (auto it = j.find("upstream"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "shared") cfg.upstream = UpstreamCredit::shared;
    else if (s == "replay") cfg.upstream = UpstreamCredit::replay;
    else throw InputError("upstream must be 'shared' or 'replay'");
  }
  read(j, "critic_step", cfg.critic_step);
  read(j, "workers", cfg.workers);
  if (auto it = j.find("diagnostics"); it != j.end()) {
    detail::check_keys(*it,
                       {"enabled", "buckets", "candidates", "replays", "value_actions", "top_k",
                        "alpha"},
                       "diagnostics");
    auto& d = cfg.diagnostics;
    read(*it, "enabled", d.enabled);
    read(*it, "buckets", d.buckets);
    read(*it, "candidates", d.candidates);
    read(*it, "replays", d.replays);
    read(*it, "value_actions", d.value_actions);
    read(*it, "top_k", d.top_k);
    read(*it, "alpha", d.alpha);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed config " + path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad value in config " + path + ": " + e.what());
  }
}

}  // namespace c3
