#pragma once

// Binds a protocol to the synthetic evaluator and executes episodes from any
// occurrence onward.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c3/env.hpp"
#include "c3/errors.hpp"
#include "c3/policy.hpp"
#include "c3/protocol.hpp"
#include "c3/rng.hpp"

namespace c3 {

// Downstream symbol used when no teammate acts after an intervention.
inline constexpr int kEmptySymbol = -1;

struct ExecutionStats {
  std::int64_t reference_decisions = 0;
  // Decisions re-executed before a replay target. Replays must keep this at 0.
  std::int64_t prefix_decisions = 0;
  std::int64_t forced_decisions = 0;
  std::int64_t downstream_decisions = 0;
  std::int64_t evaluator_calls = 0;

  std::int64_t decisions() const {
    return reference_decisions + prefix_decisions + forced_decisions + downstream_decisions;
  }

  ExecutionStats& operator+=(const ExecutionStats& o) {
    reference_decisions += o.reference_decisions;
    prefix_decisions += o.prefix_decisions;
    forced_decisions += o.forced_decisions;
    downstream_decisions += o.downstream_decisions;
    evaluator_calls += o.evaluator_calls;
    return *this;
  }
};

enum class ActionMode { sample, greedy };

struct Decision {
  int node_id = 0;
  int event_type = 0;
  int role = 0;
  ContextKey key;
  Token action = 0;
  bool forced = false;
};

struct EpisodeOutcome {
  double r = 0.0;
  bool correct = false;
  Transcript transcript;
  std::vector<Decision> decisions;  // only the ones executed in this call
  int teammate_symbol = kEmptySymbol;
};

class Game {
 public:
  Game(Protocol protocol, EnvSpec env,
       std::shared_ptr<KeyRegistry> registry = std::make_shared<KeyRegistry>())
      : protocol_(std::move(protocol)),
        env_(env),
        registry_(std::move(registry)),
        occurrences_(build_episode_graph(protocol_, 0)) {
    env_.validate();
    const auto& terminal = protocol_.event(protocol_.terminal_event());
    plan_event_ = terminal.parents.empty() ? -1 : terminal.parents.front();
    role_vocab_.assign(static_cast<std::size_t>(protocol_.role_count()), 0);
    for (const auto& e : protocol_.event_types()) {
      const int v = e.id == terminal.id ? env_.answer_vocab_size : env_.plan_vocab_size;
      int& slot = role_vocab_[static_cast<std::size_t>(e.role)];
      if (slot != 0 && slot != v)
        throw ProtocolError("role " + std::to_string(e.role) +
                            " is shared by events with different vocabularies");
      slot = v;
    }
    for (int& v : role_vocab_)
      if (v == 0) v = env_.plan_vocab_size;
  }

  static Game two_agent(EnvSpec env) { return Game(Protocol::two_agent(), env); }

  const Protocol& protocol() const { return protocol_; }
  const EnvSpec& env() const { return env_; }
  const std::vector<Occurrence>& occurrences() const { return occurrences_; }
  const std::vector<int>& role_vocab() const { return role_vocab_; }
  KeyRegistry& registry() const { return *registry_; }

  const EventType& event_at(int node) const {
    return protocol_.event(occurrences_.at(static_cast<std::size_t>(node)).event_type);
  }
  int role_at(int node) const { return event_at(node).role; }
  int node_count() const { return static_cast<int>(occurrences_.size()); }

  PolicyTable make_policy() const { return PolicyTable(role_vocab_); }

  std::string action_text(int event_type, Token token) const {
    return protocol_.event(event_type).name + " -> " + std::to_string(token);
  }

  std::string context(const TaskInstance& task, const Transcript& prefix,
                      int node) const {
    return render_context(task.observable_text, prefix, event_at(node));
  }

  ContextKey key(std::string_view context) const { return registry_->intern(context); }

  Token plan_of(const Transcript& transcript) const {
    if (plan_event_ < 0) return 0;
    for (const auto& e : transcript)
      if (e.event_type == plan_event_) return e.action;
    throw InputError("transcript has no plan entry");
  }

  Token answer_of(const Transcript& transcript) const {
    for (const auto& e : transcript)
      if (e.event_type == protocol_.terminal_event()) return e.action;
    throw InputError("transcript has no terminal entry");
  }

  // Terminal-only: needs the complete transcript.
  double score(const TaskInstance& task, const Transcript& transcript,
               double noise) const {
    return evaluate(task, plan_of(transcript), answer_of(transcript), noise);
  }

  bool correct(const TaskInstance& task, const Transcript& transcript) const {
    return is_correct(task, plan_of(transcript), answer_of(transcript));
  }

  // Executes nodes [start_node, end) on top of `prefix`. A forced action, if
  // given, replaces the policy at start_node only.
  EpisodeOutcome play_from(const PolicyTable& policy, const TaskInstance& task,
                           Transcript prefix, int start_node, std::optional<Token> forced,
                           RngStream& decision_stream, RngStream& noise_stream,
                           ActionMode mode, ExecutionStats* stats = nullptr) const {
    if (static_cast<int>(prefix.size()) != start_node)
      throw InputError("prefix length must equal the start node");
    EpisodeOutcome out;
    out.transcript = std::move(prefix);
    const int start_role = role_at(start_node);
    for (int node = start_node; node < node_count(); ++node) {
      const auto& event = event_at(node);
      const std::string ctx = render_context(task.observable_text, out.transcript, event);
      const ContextKey k = key(ctx);
      Decision d{node, event.id, event.role, k, 0, false};
      if (node == start_node && forced) {
        if (*forced < 0 || *forced >= role_vocab_[static_cast<std::size_t>(event.role)])
          throw InputError("forced token out of vocabulary");
        d.action = *forced;
        d.forced = true;
        if (stats) ++stats->forced_decisions;
      } else {
        d.action = mode == ActionMode::greedy ? greedy_action(policy, event.role, k)
                                              : sample_action(policy, event.role, k,
                                                              decision_stream);
        if (stats) ++stats->downstream_decisions;
        if (out.teammate_symbol == kEmptySymbol && node > start_node &&
            event.role != start_role)
          out.teammate_symbol = d.action;
      }
      out.transcript.push_back({node, event.id, d.action, action_text(event.id, d.action)});
      out.decisions.push_back(d);
    }
    out.r = score(task, out.transcript, draw_noise(env_, noise_stream));
    out.correct = correct(task, out.transcript);
    if (stats) ++stats->evaluator_calls;
    return out;
  }

 private:
  Protocol protocol_;
  EnvSpec env_;
  std::shared_ptr<KeyRegistry> registry_;
  std::vector<Occurrence> occurrences_;
  std::vector<int> role_vocab_;
  int plan_event_ = -1;
};

}  // namespace c3
