#include <gtest/gtest.h>

#include <string>
#include <unordered_map>

#include "c3/blake2b.hpp"
#include "c3/errors.hpp"
#include "c3/protocol.hpp"

using namespace c3;

namespace {

std::string hex(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s += digits[b >> 4];
    s += digits[b & 15];
  }
  return s;
}

std::string repeat(std::string_view s, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += s;
  return out;
}

}  // namespace

TEST(Blake2b, MatchesReferenceDigests) {
  // RFC 7693 appendix A.
  EXPECT_EQ(hex(detail::blake2b("abc", 64)),
            "ba80a53f981c4d0d6a2797b69f12f6e94c212f14685ac4b74b12bb6fdbffa2d1"
            "7d87c5392aab792dc252d5de4533cc9518d38aa8dbf1925ab92386edd4009923");
  EXPECT_EQ(hex(detail::blake2b("", 8)), "e4a6a0577479b2b4");
}

TEST(ContextKey, PinnedValues) {
  // Cross-checked against Python hashlib.blake2b(digest_size=8).
  EXPECT_EQ(context_key("").kappa, 7252660547403494068ULL);
  EXPECT_EQ(context_key("abc").kappa, 6393727014797677913ULL);
  EXPECT_EQ(context_key("Problem:\n  task-0\n\nContext:\n  ").kappa, 5051254263483813270ULL);
  EXPECT_EQ(context_key("The quick brown fox jumps over the lazy dog").kappa,
            5495853592941529592ULL);
  EXPECT_EQ(context_key(repeat("\xc3\xa9", 200)).kappa, 3937391853053158666ULL);
}

TEST(ContextKey, KappaBelowModulusAndFingerprint) {
  for (int i = 0; i < 200; ++i) {
    const auto k = context_key("ctx-" + std::to_string(i));
    EXPECT_LT(k.kappa, kKappaModulus);
  }
  const std::string e = repeat("\xc3\xa9", 200);
  EXPECT_EQ(context_key(e).char_length, 200u);
  EXPECT_EQ(context_key(e).secondary_digest, fnv1a64(e));
  EXPECT_TRUE(fingerprint_matches(context_key(e), e));
  EXPECT_FALSE(fingerprint_matches(context_key(e), "x"));
}

TEST(ContextKey, VerifyThrowsOnMismatch) {
  EXPECT_NO_THROW(verify_key(context_key("a"), "a"));
  EXPECT_THROW(verify_key(context_key("a"), "b"), FatalCollision);
}

TEST(KeyRegistry, SameContextSameKey) {
  KeyRegistry reg;
  const auto a = reg.intern("hello");
  const auto b = reg.intern("hello");
  EXPECT_EQ(a, b);
  EXPECT_EQ(reg.size(), 1u);
}

TEST(KeyRegistry, ReducedWidthCollisionIsFatal) {
  // With 8-bit keys, a few hundred distinct contexts must collide.
  KeyRegistry reg(8);
  bool threw = false;
  for (int i = 0; i < 1000 && !threw; ++i) {
    try {
      reg.intern("context " + std::to_string(i));
    } catch (const FatalCollision&) {
      threw = true;
    }
  }
  EXPECT_TRUE(threw);
}

TEST(KeyRegistry, FullWidthNoCollisionOnDistinctContexts) {
  KeyRegistry reg;
  for (int i = 0; i < 20000; ++i) reg.intern("context " + std::to_string(i));
  EXPECT_EQ(reg.size(), 20000u);
}

TEST(Protocol, TwoAgentGraph) {
  const auto p = Protocol::two_agent();
  const auto g = build_episode_graph(p, 7);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].event_type, 0);
  EXPECT_EQ(g[1].event_type, 1);
  EXPECT_EQ(g[1].parent_nodes, std::vector<int>{0});
}

TEST(Protocol, TiesFollowDeclarationOrder) {
  // 2 and 1 are both ready after 0; list order puts 2 first.
  Protocol p({{0, 0, {}, "a"}, {2, 1, {0}, "b"}, {1, 2, {0}, "c"}, {3, 0, {1, 2}, "d"}}, 3, 3);
  const auto g = build_episode_graph(p, 0);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g[1].event_type, 2);
  EXPECT_EQ(g[2].event_type, 1);
  EXPECT_EQ(g[3].event_type, 3);
}

TEST(Protocol, RejectsMalformed) {
  EXPECT_THROW(Protocol({{0, 0, {}, "a"}, {0, 1, {}, "b"}}, 0, 2), ProtocolError);
  EXPECT_THROW(Protocol({{0, 0, {}, "a"}, {1, 5, {0}, "b"}}, 1, 2), ProtocolError);
  EXPECT_THROW(Protocol({{0, 0, {9}, "a"}}, 0, 1), ProtocolError);
  EXPECT_THROW(Protocol({{0, 0, {0}, "a"}}, 0, 1), ProtocolError);
  // Terminal with a child.
  EXPECT_THROW(Protocol({{0, 0, {}, "a"}, {1, 1, {0}, "b"}}, 0, 2), ProtocolError);
  // Two sinks.
  EXPECT_THROW(Protocol({{0, 0, {}, "a"}, {1, 1, {0}, "b"}, {2, 1, {0}, "c"}}, 1, 2),
               ProtocolError);
}

TEST(Protocol, CycleDetected) {
  Protocol p({{0, 0, {}, "a"}, {1, 0, {0, 2}, "b"}, {2, 0, {1}, "c"}, {3, 0, {1}, "d"}}, 3, 1);
  EXPECT_THROW(build_episode_graph(p, 0), ProtocolError);
}

TEST(RenderContext, BitExactTemplate) {
  const auto p = Protocol::two_agent();
  Transcript prefix{{0, 0, 3, "reasoner -> 3"}};
  EXPECT_EQ(render_context("task-0", {}, p.event(0)), "Problem:\n  task-0\n\nContext:\n  ");
  EXPECT_EQ(render_context("task-0", prefix, p.event(1)),
            "Problem:\n  task-0\n\nContext:\n  reasoner -> 3");
}

TEST(RenderContext, NormalizesLineEndingsAndWhitespace) {
  const auto p = Protocol::two_agent();
  Transcript prefix{{0, 0, 1, "  line1\r\nline2\rline3 \n"}};
  EXPECT_EQ(render_context(" \tT\r\n", prefix, p.event(1)),
            "Problem:\n  T\n\nContext:\n  line1\nline2\nline3");
}

TEST(RenderContext, OnlyParentEventsRendered) {
  Protocol p({{0, 0, {}, "a"}, {1, 1, {0}, "b"}, {2, 0, {1}, "c"}}, 2, 2);
  Transcript prefix{{0, 0, 0, "from a"}, {1, 1, 0, "from b"}};
  EXPECT_EQ(render_context("t", prefix, p.event(2)), "Problem:\n  t\n\nContext:\n  from b");
  Protocol q({{0, 0, {}, "a"}, {1, 1, {}, "b"}, {2, 0, {0, 1}, "c"}}, 2, 2);
  EXPECT_EQ(render_context("t", prefix, q.event(2)),
            "Problem:\n  t\n\nContext:\n  from a\n\nfrom b");
}
