#include <cmath>

#include <gtest/gtest.h>

#include "walkdiff/walk.hpp"

using namespace walkdiff;

namespace {
const IncrementMeasure kRad = IncrementMeasure::rademacher();
}

TEST(Walk, StepExamples) {
  QFunction bm(make_bm());
  ScaleSolver s(bm, kRad, 100);
  EXPECT_NEAR(step(s, 0.0, 1.0), 0.1, 1e-12);
  EXPECT_EQ(step(s, 0.3, 0.0), 0.3);
  QFunction abm(make_bm(0.05, {0.0, kInf}));
  ScaleSolver sa(abm, kRad, 100);
  EXPECT_EQ(step(sa, 0.0, 1.0), 0.0);
  EXPECT_THROW(step(sa, -0.1, 1.0), Error);
}

TEST(Walk, ForcedPaths) {
  QFunction bm(make_bm(0.25));
  ScaleSolver s(bm, kRad, 100);
  const double inc[] = {1.0, -1.0};
  const WalkPath p = simulate_path_forced(s, inc);
  ASSERT_EQ(p.states.size(), 3u);
  EXPECT_EQ(p.states[0], 0.25);
  EXPECT_NEAR(p.states[1], 0.35, 1e-12);
  EXPECT_NEAR(p.states[2], 0.25, 1e-12);
  EXPECT_FALSE(p.absorbed_at);

  QFunction abm(make_bm(0.05, {0.0, kInf}));
  ScaleSolver sa(abm, kRad, 100);
  const double inc2[] = {-1.0, 1.0, 1.0};
  const WalkPath q = simulate_path_forced(sa, inc2);
  EXPECT_EQ(q.states, (std::vector<double>{0.05, 0.0, 0.0, 0.0}));
  EXPECT_EQ(q.absorbed_at, 1u);
}

TEST(Walk, Interpolate) {
  WalkPath p;
  p.states = {0.0, 0.1};
  EXPECT_NEAR(interpolate(p, 0.5), 0.05, 1e-15);
  EXPECT_EQ(interpolate(p, 1.0), 0.1);
  p.states = {0.0, 0.1, 0.0};
  EXPECT_NEAR(interpolate(p, 1.25), 0.075, 1e-15);
  EXPECT_THROW(interpolate(p, 2.5), Error);
}

TEST(Walk, IncrementVariance) {
  QFunction bm(make_bm());
  ScaleSolver s(bm, kRad, 100);
  RngStream rng(99, 0);
  const WalkPath p = simulate_path(s, 10000, rng);
  double s1 = 0, s2 = 0, s4 = 0;
  for (std::size_t k = 1; k < p.states.size(); ++k) {
    const double d = p.states[k] - p.states[k - 1];
    s1 += d;
    s2 += d * d;
    s4 += d * d * d * d;
  }
  const double n = 10000;
  const double var = s2 / n - (s1 / n) * (s1 / n);
  // 4 SE of the variance estimate plus the squared 4-SE band of the mean.
  const double se_var = std::sqrt(std::max(s4 / n - (s2 / n) * (s2 / n), 0.0) / n);
  const double se_mean = std::sqrt(s2 / n / n);
  EXPECT_NEAR(var, 0.01, 4.0 * se_var + 16.0 * se_mean * se_mean);
}

TEST(Walk, MatchesSimpleRandomWalkAtNEqualsOne) {
  QFunction bm(make_bm());
  ScaleSolver s(bm, kRad, 1);
  RngStream a(5, 3), b(5, 3);
  const WalkPath p = simulate_path(s, 500, a);
  double y = 0.0;
  for (std::size_t k = 1; k <= 500; ++k) {
    y += b.uniform() < 0.5 ? -1.0 : 1.0;
    EXPECT_NEAR(p.states[k], y, 1e-9);
  }
}

TEST(Walk, DeterministicAcrossThreadsAndInsideInterval) {
  QFunction qf(make_bm(0.5, {0.0, 1.0}));
  const auto mu = IncrementMeasure::from_atoms({{-2.0, 1.0 / 3}, {1.0, 2.0 / 3}});
  ScaleSolver s(qf, mu, 50);
  const auto one = simulate_paths(s, 200, 40, 17, 1);
  const auto four = simulate_paths(s, 200, 40, 17, 4);
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].states, four[i].states);
    for (double y : one[i].states) {
      EXPECT_GE(y, 0.0);
      EXPECT_LE(y, 1.0);
    }
    if (one[i].absorbed_at)
      for (std::size_t k = *one[i].absorbed_at; k < one[i].states.size(); ++k)
        EXPECT_EQ(one[i].states[k], one[i].states[*one[i].absorbed_at]);
  }
}
