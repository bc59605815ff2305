#include <gtest/gtest.h>

#include <numeric>

#include "c3/credit.hpp"
#include "c3/errors.hpp"
#include "c3/rng.hpp"

using namespace c3;

TEST(Credit, AggregateClipsThenAverages) {
  const std::vector<double> rs{1.0, 2.0, 30.0, -40.0};
  EXPECT_DOUBLE_EQ(aggregate(rs), (1.0 + 2.0 + 10.0 - 10.0) / 4.0);
  EXPECT_THROW(aggregate(std::vector<double>{}), InputError);
}

TEST(Credit, LooWorkedExample) {
  // means (1, 0, 0.5), counts (1, 2, 1)
  const std::vector<double> m{1.0, 0.0, 0.5};
  const std::vector<int> c{1, 2, 1};
  EXPECT_DOUBLE_EQ(loo_baseline(m, c, 0), (0.0 * 2 + 0.5) / 3.0);
  EXPECT_DOUBLE_EQ(loo_baseline(m, c, 1), (1.0 + 0.5) / 2.0);
  const auto a = c3_credit(m, c);
  EXPECT_DOUBLE_EQ(a[0], 1.0 - 0.5 / 3.0);
  EXPECT_DOUBLE_EQ(a[1], -0.75);
  EXPECT_DOUBLE_EQ(a[2], 0.5 - 1.0 / 3.0);
}

TEST(Credit, TwoCandidatesAreAntisymmetric) {
  const std::vector<double> m{0.7, 0.2};
  const std::vector<int> c{3, 5};
  const auto a = c3_credit(m, c);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], -0.5);
}

TEST(Credit, Errors) {
  EXPECT_THROW(c3_credit(std::vector<double>{1.0}, std::vector<int>{1}), InputError);
  EXPECT_THROW(c3_credit(std::vector<double>{1.0, 2.0}, std::vector<int>{1}), InputError);
  EXPECT_THROW(c3_credit(std::vector<double>{1.0, 2.0}, std::vector<int>{1, 0}), InputError);
  EXPECT_THROW(loo_baseline(std::vector<double>{1.0, 2.0}, std::vector<int>{1, 1}, 2),
               InputError);
}

TEST(Credit, ShiftInvarianceZeroSumProportionality) {
  RngStream r({.run_seed = 17});
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t J = 2 + r.below(7);
    std::vector<double> m(J);
    for (double& v : m) v = r.uniform();
    std::vector<int> unequal(J), equal(J, 1 + static_cast<int>(r.below(5)));
    for (int& c : unequal) c = 1 + static_cast<int>(r.below(5));

    const double shift = 4.0 * r.uniform() - 2.0;
    std::vector<double> shifted = m;
    for (double& v : shifted) v += shift;
    const auto a = c3_credit(m, unequal);
    const auto b = c3_credit(shifted, unequal);
    for (std::size_t j = 0; j < J; ++j) EXPECT_NEAR(a[j], b[j], 1e-12);

    const auto eq = c3_credit(m, equal);
    EXPECT_NEAR(std::accumulate(eq.begin(), eq.end(), 0.0), 0.0, 1e-12);

    const auto full = full_sample_credit(m, equal);
    for (std::size_t j = 0; j < J; ++j)
      EXPECT_NEAR(full[j], (1.0 - 1.0 / static_cast<double>(J)) * eq[j], 1e-12);
  }
}

TEST(Credit, FullSampleIncludesSelf) {
  const std::vector<double> m{1.0, 0.0};
  const std::vector<int> c{1, 3};
  const auto a = full_sample_credit(m, c);
  EXPECT_DOUBLE_EQ(a[0], 0.75);
  EXPECT_DOUBLE_EQ(a[1], -0.25);
}
