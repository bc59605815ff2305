#include <gtest/gtest.h>

#include <cmath>

#include "c3/errors.hpp"
#include "c3/optimizer.hpp"

using namespace c3;

namespace {

CreditTuple tuple(const PolicyTable& behavior, const ContextKey& k, Token a, double adv) {
  return {1, 0, k, a, adv, log_prob(behavior, 0, k, a)};
}

// Surrogate value for a finite-difference check.
double surrogate(const PolicyTable& theta, const Snapshot& ref,
                 std::span<const CreditTuple> tuples, const OptimConfig& cfg) {
  double s = 0.0;
  for (const auto& t : tuples) {
    const double r = std::exp(log_prob(theta, t.role, t.key, t.candidate) - t.behavior_log_prob);
    const double clipped = std::clamp(r, 1 - cfg.clip_epsilon, 1 + cfg.clip_epsilon);
    s += std::min(r * t.advantage, clipped * t.advantage);
    s -= cfg.kl_coefficient * kl_to_reference(theta, ref, t.role, t.key);
  }
  return s;
}

}  // namespace

TEST(Optimizer, GradientMatchesFiniteDifference) {
  PolicyTable theta({4});
  const ContextKey k = context_key("ctx");
  theta.mutable_row(0, k.kappa) = {0.1, -0.2, 0.05, 0.0};
  const Snapshot behavior(theta);
  PolicyTable ref_table({4});
  ref_table.mutable_row(0, k.kappa) = {0.3, 0.0, -0.1, 0.2};
  const Snapshot ref(ref_table);
  // Move theta slightly so ratios differ from 1 but stay inside the clip.
  theta.mutable_row(0, k.kappa)[0] += 0.03;
  const std::vector<CreditTuple> ts{tuple(behavior, k, 0, 0.4), tuple(behavior, k, 2, -0.3)};
  OptimConfig cfg;
  cfg.kl_coefficient = 0.1;
  const auto g = surrogate_gradient(theta, ref, ts, cfg);
  const auto& row = g.at({0, k.kappa});
  const double h = 1e-6;
  for (std::size_t i = 0; i < 4; ++i) {
    PolicyTable plus = theta, minus = theta;
    plus.mutable_row(0, k.kappa)[i] += h;
    minus.mutable_row(0, k.kappa)[i] -= h;
    const double fd = (surrogate(plus, ref, ts, cfg) - surrogate(minus, ref, ts, cfg)) / (2 * h);
    EXPECT_NEAR(row[i], fd, 1e-7);
  }
}

TEST(Optimizer, ClippedBranchHasNoSurrogateGradient) {
  PolicyTable theta({3});
  const ContextKey k = context_key("c");
  const Snapshot behavior(theta);
  theta.mutable_row(0, k.kappa) = {2.0, 0.0, 0.0};  // ratio on token 0 far above 1.2
  OptimConfig cfg;
  cfg.kl_coefficient = 0.0;
  const std::vector<CreditTuple> ts{tuple(behavior, k, 0, 1.0)};
  const auto g = surrogate_gradient(theta, behavior, ts, cfg);
  for (double v : g.at({0, k.kappa})) EXPECT_EQ(v, 0.0);
}

TEST(Optimizer, UpdateRaisesPositiveAdvantageAction) {
  PolicyTable theta({3});
  const ContextKey k = context_key("u");
  const Snapshot behavior(theta);
  const std::vector<CreditTuple> ts{tuple(behavior, k, 1, 1.0), tuple(behavior, k, 2, -1.0)};
  const auto next = ppo_update(theta, behavior, behavior, ts, OptimConfig{});
  const auto p = next.probabilities(0, k.kappa);
  EXPECT_GT(p[1], 1.0 / 3);
  EXPECT_LT(p[2], 1.0 / 3);
}

TEST(Optimizer, KlPenaltyPullsTowardReference) {
  PolicyTable theta({3});
  const ContextKey k = context_key("kl");
  theta.mutable_row(0, k.kappa) = {3.0, 0.0, -1.0};
  const Snapshot ref(PolicyTable({3}));
  OptimConfig cfg;
  cfg.kl_coefficient = 1.0;
  cfg.learning_rate = 0.5;
  double kl = kl_to_reference(theta, ref, 0, k);
  PolicyTable cur = theta;
  for (int i = 0; i < 20; ++i) {
    // Zero advantage, so only the KL term acts.
    const Snapshot b(cur);
    const std::vector<CreditTuple> t{tuple(cur, k, 0, 0.0)};
    cur = ppo_update(cur, b, ref, t, cfg);
    const double next = kl_to_reference(cur, ref, 0, k);
    EXPECT_LT(next, kl);
    kl = next;
  }
}

TEST(Optimizer, RejectsForeignBehaviorLogProb) {
  PolicyTable theta({3});
  const ContextKey k = context_key("f");
  const Snapshot behavior(theta);
  CreditTuple t = tuple(behavior, k, 0, 1.0);
  t.behavior_log_prob += 0.1;
  EXPECT_THROW(ppo_update(theta, behavior, behavior, std::vector<CreditTuple>{t}, OptimConfig{}),
               InputError);
  EXPECT_THROW(ppo_update(theta, behavior, behavior, std::vector<CreditTuple>{}, OptimConfig{}),
               InputError);
}

TEST(Optimizer, GradNormClipping) {
  PolicyTable theta({3});
  const ContextKey k = context_key("n");
  const Snapshot behavior(theta);
  const std::vector<CreditTuple> ts{tuple(behavior, k, 0, 5.0)};
  OptimConfig cfg;
  cfg.kl_coefficient = 0.0;
  cfg.learning_rate = 1.0;
  cfg.max_grad_norm = 0.01;
  const auto next = ppo_update(theta, behavior, behavior, ts, cfg);
  double norm = 0.0;
  for (double z : next.logits(0, k.kappa)) norm += z * z;
  EXPECT_NEAR(std::sqrt(norm), 0.01, 1e-12);
}

TEST(Optimizer, ConfigValidation) {
  OptimConfig c;
  c.gamma = 0.9;
  EXPECT_THROW(c.validate(), InputError);
  c = OptimConfig{};
  c.clip_epsilon = 0.0;
  EXPECT_THROW(c.validate(), InputError);
  c = OptimConfig{};
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Magrpo, GroupCentering) {
  const std::vector<double> r{1.0, 0.0, 0.5, 0.5};
  const auto a = magrpo_credits(r);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], -0.5);
  EXPECT_DOUBLE_EQ(a[2], 0.0);
  EXPECT_THROW(magrpo_credits(std::vector<double>{1.0}), InputError);
}

TEST(Critic, RecurrenceTowardReturn) {
  CriticTable critic(0.5);
  const ContextKey k = context_key("v");
  const double expected[] = {0.5, 0.75, 0.875};
  for (double e : expected) {
    critic_update(critic, 1, k, 1.0);
    EXPECT_DOUBLE_EQ(critic.value(1, k), e);
  }
  EXPECT_DOUBLE_EQ(mappo_advantage(critic, 1, k, 1.0), 0.125);
  EXPECT_EQ(critic.value(0, k), 0.0);
  EXPECT_THROW(CriticTable(0.0), InputError);
}
