#pragma once

// Protocols as event-type DAGs, canonical episode serialization, context
// rendering and context keys.

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "c3/blake2b.hpp"
#include "c3/errors.hpp"

namespace c3 {

using Token = std::int32_t;

struct EventType {
  int id = 0;
  int role = 0;
  std::vector<int> parents;
  std::string name;
};

class Protocol {
 public:
  Protocol(std::vector<EventType> event_types, int terminal_event,
           int role_count)
      : event_types_(std::move(event_types)),
        terminal_event_(terminal_event),
        role_count_(role_count) {
    validate();
  }

  // Reasoner (role 0) writes a plan, actor (role 1) answers after reading it.
  static Protocol two_agent() {
    return Protocol({{0, 0, {}, "reasoner"}, {1, 1, {0}, "actor"}}, 1, 2);
  }

  const std::vector<EventType>& event_types() const { return event_types_; }
  int terminal_event() const { return terminal_event_; }
  int role_count() const { return role_count_; }

  const EventType& event(int id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw ProtocolError("unknown event type " + std::to_string(id));
    return event_types_[it->second];
  }

  // Position of an event type in the declared list.
  std::size_t position(int id) const {
    event(id);
    return index_.at(id);
  }

 private:
  void validate() {
    if (event_types_.empty()) throw ProtocolError("protocol has no event types");
    if (role_count_ < 1) throw ProtocolError("protocol needs at least one role");
    for (std::size_t i = 0; i < event_types_.size(); ++i) {
      const auto& e = event_types_[i];
      if (!index_.emplace(e.id, i).second)
        throw ProtocolError("duplicate event type id " + std::to_string(e.id));
      if (e.role < 0 || e.role >= role_count_)
        throw ProtocolError("event type " + std::to_string(e.id) +
                            " has an invalid role");
    }
    if (!index_.contains(terminal_event_))
      throw ProtocolError("terminal event is not a declared event type");
    std::vector<bool> has_child(event_types_.size(), false);
    for (const auto& e : event_types_) {
      for (int p : e.parents) {
        auto it = index_.find(p);
        if (it == index_.end())
          throw ProtocolError("event type " + std::to_string(e.id) +
                              " references unknown parent " + std::to_string(p));
        if (p == e.id) throw ProtocolError("protocol contains a cycle");
        has_child[it->second] = true;
      }
    }
    for (std::size_t i = 0; i < event_types_.size(); ++i) {
      const bool is_terminal = event_types_[i].id == terminal_event_;
      if (is_terminal && has_child[i])
        throw ProtocolError("terminal event must not feed other events");
      if (!is_terminal && !has_child[i])
        throw ProtocolError("protocol has more than one terminal event");
    }
  }

  std::vector<EventType> event_types_;
  int terminal_event_;
  int role_count_;
  std::map<int, std::size_t> index_;
};

struct Occurrence {
  int node_id = 0;
  int event_type = 0;
  std::vector<int> parent_nodes;

  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

// Canonical serialization: Kahn's algorithm, ready events taken in protocol
// list order. The terminal event is the unique sink, so it always comes last.
inline std::vector<Occurrence> build_episode_graph(const Protocol& protocol,
                                                   std::int64_t /*task_id*/) {
  const auto& types = protocol.event_types();
  const std::size_t n = types.size();
  std::vector<int> pending(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    pending[i] = static_cast<int>(types[i].parents.size());

  std::vector<int> node_of(n, -1);
  std::vector<Occurrence> order;
  order.reserve(n);
  while (order.size() < n) {
    std::size_t next = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] < 0 && pending[i] == 0) {
        next = i;
        break;
      }
    }
    if (next == n) throw ProtocolError("protocol contains a cycle");

    Occurrence occ;
    occ.node_id = static_cast<int>(order.size());
    occ.event_type = types[next].id;
    for (int p : types[next].parents)
      occ.parent_nodes.push_back(node_of[protocol.position(p)]);
    node_of[next] = occ.node_id;
    order.push_back(std::move(occ));

    for (std::size_t i = 0; i < n; ++i) {
      for (int p : types[i].parents)
        if (p == types[next].id) --pending[i];
    }
  }
  return order;
}

struct TranscriptEntry {
  int node_id = 0;
  int event_type = 0;
  Token action = 0;
  std::string text;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

using Transcript = std::vector<TranscriptEntry>;

// CRLF and lone CR become LF; leading and trailing whitespace is removed.
inline std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
    } else {
      out.push_back(raw[i]);
    }
  }
  constexpr std::string_view ws = " \t\n\v\f";
  const auto first = out.find_first_not_of(ws);
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(ws);
  return out.substr(first, last - first + 1);
}

// Only entries produced by the target's parents are rendered; everything else
// in the prefix is ignored.
inline std::string render_context(std::string_view task_text,
                                  std::span<const TranscriptEntry> prefix,
                                  const EventType& target) {
  std::string out = "Problem:\n  ";
  out += normalize_text(task_text);
  out += "\n\nContext:\n  ";
  bool first = true;
  for (const auto& entry : prefix) {
    if (std::find(target.parents.begin(), target.parents.end(),
                  entry.event_type) == target.parents.end())
      continue;
    if (!first) out += "\n\n";
    out += normalize_text(entry.text);
    first = false;
  }
  return out;
}

struct ContextKey {
  std::uint64_t kappa = 0;
  std::uint64_t char_length = 0;
  std::uint64_t secondary_digest = 0;

  friend bool operator==(const ContextKey&, const ContextKey&) = default;
};

inline std::uint64_t utf8_length(std::string_view s) {
  std::uint64_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

// FNV-1a, used as the independent fingerprint next to the primary digest.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t kKappaModulus = 1ULL << 63;

// kappa = BLAKE2b-64(utf8(h)) read big-endian, mod 2^63.
inline ContextKey context_key(std::string_view h) {
  const auto digest = detail::blake2b(h, 8);
  std::uint64_t value = 0;
  for (std::uint8_t b : digest) value = (value << 8) | b;
  return {value % kKappaModulus, utf8_length(h), fnv1a64(h)};
}

inline bool fingerprint_matches(const ContextKey& key, std::string_view h) {
  return key.char_length == utf8_length(h) && key.secondary_digest == fnv1a64(h);
}

inline void verify_key(const ContextKey& key, std::string_view h) {
  if (!fingerprint_matches(key, h))
    throw FatalCollision("context key " + std::to_string(key.kappa) +
                         " does not match the fingerprint of its context");
}

// Issues keys and aborts on any kappa reused by a different context. The
// width parameter exists so collisions can be provoked in tests.
class KeyRegistry {
 public:
  explicit KeyRegistry(int kappa_bits = 63) : kappa_bits_(kappa_bits) {
    if (kappa_bits < 1 || kappa_bits > 63)
      throw InputError("kappa width must be in [1, 63]");
  }

  ContextKey intern(std::string_view h) {
    ContextKey key = context_key(h);
    if (kappa_bits_ < 63) key.kappa &= (1ULL << kappa_bits_) - 1;
    std::lock_guard lock(mutex_);
    auto [it, inserted] = issued_.emplace(key.kappa, key);
    if (!inserted) verify_key(it->second, h);
    return key;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return issued_.size();
  }

 private:
  int kappa_bits_;
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, ContextKey> issued_;
};

}  // namespace c3
