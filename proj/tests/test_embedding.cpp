#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "walkdiff/embedding.hpp"
#include "walkdiff/numerics.hpp"

using namespace walkdiff;

namespace {

const IncrementMeasure kRad = IncrementMeasure::rademacher();

struct Moments {
  double n = 0, s = 0, s2 = 0;
  void add(double v) {
    n += 1;
    s += v;
    s2 += v * v;
  }
  double mean() const { return s / n; }
  double se() const { return std::sqrt((s2 / n - mean() * mean()) / n); }
  double var() const { return s2 / n - mean() * mean(); }
};

}  // namespace

TEST(Bridge, AtomExamples) {
  BridgeFunction bf(kRad);
  EXPECT_NEAR(bf.b(0.75, 0.5), 2 * normal_cdf(1.0) - 1, 1e-15);
  EXPECT_NEAR(bf.b(0.75, 0.5), 0.682690, 1e-6);
  EXPECT_NEAR(bf.b_x(0.0, 0.0), 0.797885, 1e-6);
  EXPECT_NEAR(bf.b_x(0.96, 0.0), 3.989423, 1e-6);
  EXPECT_EQ(bf.b(0.0, 0.0), 0.0);
  EXPECT_EQ(bf.b(1.0, 0.3), 1.0);
  EXPECT_EQ(bf.b(1.0, -0.3), -1.0);
  EXPECT_THROW(bf.b_x(1.0, 0.0), Error);
  EXPECT_THROW(bf.b(1.5, 0.0), Error);
}

TEST(Bridge, AtomDerivativeAndLimits) {
  const auto mu = IncrementMeasure::from_atoms({{-2.0, 1.0 / 3}, {0.5, 1.0 / 3}, {1.5, 1.0 / 3}});
  BridgeFunction bf(mu);
  // b(0, 0) is the mean of mu.
  EXPECT_NEAR(bf.b(0.0, 0.0), 0.0, 1e-14);
  for (double t : {0.1, 0.5, 0.9}) {
    for (double x : {-1.0, 0.0, 0.7}) {
      const double hstep = 1e-5;
      const double fd = (bf.b(t, x + hstep) - bf.b(t, x - hstep)) / (2 * hstep);
      EXPECT_NEAR(bf.b_x(t, x), fd, 1e-7);
      EXPECT_GT(bf.b(t, x), -2.0);
      EXPECT_LT(bf.b(t, x), 1.5);
    }
  }
  EXPECT_EQ(bf.endpoint_value(-5.0), -2.0);
  EXPECT_EQ(bf.endpoint_value(0.0), 0.5);
  EXPECT_EQ(bf.endpoint_value(5.0), 1.5);
}

TEST(Bridge, UniformDensityMatchesGaussianIdentity) {
  // For uniform[-1,1], F^{-1}(Phi(w)) = 2 Phi(w) - 1 and E Phi(x + sZ) = Phi(x / sqrt(1 + s^2)).
  BridgeFunction bf(IncrementMeasure::from_density("uniform", {}));
  for (double t : {0.0, 0.3, 0.8, 0.999}) {
    const double s2 = 1.0 - t;
    const double k = std::sqrt(1.0 + s2);
    for (double x : {-2.0, -0.4, 0.0, 1.1}) {
      EXPECT_NEAR(bf.b(t, x), 2 * normal_cdf(x / k) - 1, 1e-10) << t << " " << x;
      EXPECT_NEAR(bf.b_x(t, x), 2 * normal_pdf(x / k) / k, 1e-10) << t << " " << x;
    }
  }
}

TEST(Compensation, Examples) {
  EXPECT_NEAR(compensate_boundary(0.5, true, 0.0025, 100, true), 0.015, 1e-15);
  EXPECT_EQ(compensate_boundary(0.5, true, 0.0025, 100, false), 0.0);
  EXPECT_THROW(compensate_boundary(0.0, true, 0.0025, 100, true), Error);
  EXPECT_THROW(compensate_boundary(0.5, false, 0.0025, 100, true), Error);
}

TEST(EmbeddedStep, BrownianMoments) {
  // xi / a^2 is the exit time of Brownian motion from (-1, 1): mean 1, variance 2/3.
  QFunction bm(make_bm());
  BridgeFunction bf(kRad);
  RngStream rng(11, 0);
  Moments xi;
  Moments up;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const EmbeddedStep st = sample_embedded_step(bm, bf, 0.0, 0.1, rng);
    xi.add(st.duration_xi / 0.01);
    ASSERT_TRUE(st.endpoint == 0.1 || st.endpoint == -0.1);
    up.add(st.endpoint > 0 ? 1.0 : 0.0);
  }
  EXPECT_NEAR(xi.mean(), 1.0, 4 * xi.se());
  EXPECT_NEAR(xi.var(), 2.0 / 3.0, 0.05);
  EXPECT_NEAR(up.mean(), 0.5, 4 * up.se());
}

TEST(EmbeddedStep, MeanMatchesGForGbm) {
  QFunction gbm(make_gbm());
  BridgeFunction bf(kRad);
  RngStream rng(12, 0);
  Moments xi;
  for (int i = 0; i < 10000; ++i) xi.add(sample_embedded_step(gbm, bf, 1.0, 0.0998, rng).duration_xi);
  EXPECT_NEAR(xi.mean(), g_eval(gbm, kRad, 1.0, 0.0998), 4 * xi.se());
}

TEST(EmbeddedStep, UniformIncrementsOnBm) {
  QFunction bm(make_bm());
  const auto uni = IncrementMeasure::from_density("uniform", {});
  BridgeFunction bf(uni);
  RngStream rng(13, 0);
  Moments xi, x, x2;
  for (int i = 0; i < 1500; ++i) {
    const EmbeddedStep st = sample_embedded_step(bm, bf, 0.0, 0.5, rng);
    xi.add(st.duration_xi);
    x.add(st.endpoint);
    x2.add(st.endpoint * st.endpoint);
    ASSERT_LE(std::abs(st.endpoint), 0.5);
  }
  // E xi = a^2 / 3 = E (a X)^2.
  EXPECT_NEAR(xi.mean(), 0.25 / 3, 4 * xi.se());
  EXPECT_NEAR(x.mean(), 0.0, 4 * x.se());
  EXPECT_NEAR(x2.mean(), 0.25 / 3, 4 * x2.se());
}

TEST(EmbeddedStep, AtomicEndpointsAreExact) {
  QFunction tm(make_two_media(2.0, 0.1));
  const auto mu = IncrementMeasure::from_atoms({{-2.0, 1.0 / 3}, {1.0, 2.0 / 3}});
  BridgeFunction bf(mu);
  ScaleSolver solver(tm, mu, 50);
  const double a = solver.a(0.1);
  RngStream rng(14, 0);
  Moments low;
  for (int i = 0; i < 5000; ++i) {
    const EmbeddedStep st = sample_embedded_step(tm, bf, 0.1, a, rng);
    ASSERT_TRUE(st.endpoint == 0.1 + a * -2.0 || st.endpoint == 0.1 + a * 1.0);
    low.add(st.endpoint < 0.1 ? 1.0 : 0.0);
  }
  EXPECT_NEAR(low.mean(), 1.0 / 3, 4 * low.se());
}

TEST(EmbeddedStep, DeterministicAndDegenerate) {
  QFunction bm(make_bm());
  BridgeFunction bf(kRad);
  RngStream r1(5, 3), r2(5, 3);
  const EmbeddedStep a = sample_embedded_step(bm, bf, 0.0, 0.2, r1);
  const EmbeddedStep b = sample_embedded_step(bm, bf, 0.0, 0.2, r2);
  EXPECT_EQ(a.duration_xi, b.duration_xi);
  EXPECT_EQ(a.endpoint, b.endpoint);
  const EmbeddedStep z = sample_embedded_step(bm, bf, 0.4, 0.0, r1);
  EXPECT_EQ(z.duration_xi, 0.0);
  EXPECT_EQ(z.endpoint, 0.4);
  EXPECT_THROW(sample_embedded_step(bm, bf, 0.0, -1.0, r1), Error);
}

TEST(EmbeddedStep, TrajectoryIsMonotoneInTime) {
  QFunction gbm(make_gbm());
  BridgeFunction bf(kRad);
  RngStream rng(15, 0);
  EmbedOptions opt;
  opt.record_trajectory = true;
  const EmbeddedStep st = sample_embedded_step(gbm, bf, 1.0, 0.1, rng, opt);
  ASSERT_GE(st.trajectory.size(), 2u);
  EXPECT_EQ(st.trajectory.front().value, 1.0);
  EXPECT_EQ(st.trajectory.back().value, st.endpoint);
  EXPECT_EQ(st.trajectory.back().time, st.duration_xi);
  for (std::size_t i = 1; i < st.trajectory.size(); ++i) {
    EXPECT_GE(st.trajectory[i].time, st.trajectory[i - 1].time);
    EXPECT_GE(st.trajectory[i].value, 0.9);
    EXPECT_LE(st.trajectory[i].value, 1.1);
  }
}

TEST(EmbeddedWalk, AbsorbedBmStepDurations) {
  QFunction abm(make_bm(0.05, {0.0, kInf}));
  BridgeFunction bf(kRad);
  ScaleSolver solver(abm, kRad, 100);
  Moments d;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    RngStream rng(21, i);
    const EmbeddedPath p = simulate_embedded_walk(abm, bf, solver, 1, rng);
    const EmbeddedStep& st = p.per_step[0];
    if (st.endpoint == 0.0) EXPECT_NEAR(st.compensation_wait, 0.015, 1e-15);
    else EXPECT_EQ(st.compensation_wait, 0.0);
    d.add(p.taus[1]);
  }
  EXPECT_NEAR(d.mean(), 0.01, 4 * d.se());

  // Once absorbed, every step waits exactly 1/N.
  RngStream rng(22, 0);
  const EmbeddedPath p = simulate_embedded_walk(abm, bf, solver, 400, rng);
  for (std::size_t k = 0; k < p.per_step.size(); ++k) {
    if (p.states[k] == 0.0) {
      EXPECT_EQ(p.per_step[k].duration_xi, 0.0);
      EXPECT_EQ(p.per_step[k].compensation_wait, 0.01);
    }
    EXPECT_GE(p.taus[k + 1], p.taus[k]);
  }
}

TEST(EmbeddedWalk, StatesMatchTheWalkRecursion) {
  QFunction gbm(make_gbm());
  BridgeFunction bf(kRad);
  ScaleSolver solver(gbm, kRad, 100);
  RngStream rng(23, 0);
  const EmbeddedPath p = simulate_embedded_walk(gbm, bf, solver, 50, rng);
  for (std::size_t k = 0; k < 50; ++k) {
    const double a = solver.a(p.states[k]);
    const double up = p.states[k] + a, down = p.states[k] - a;
    EXPECT_TRUE(p.states[k + 1] == up || p.states[k + 1] == down);
  }
}

TEST(EmbeddedStep, CostIsModest) {
  QFunction bm(make_bm());
  BridgeFunction bf(kRad);
  RngStream rng(1, 0);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 2000; ++i) sample_embedded_step(bm, bf, 0.0, 0.1, rng);
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  RecordProperty("seconds_per_2000", std::to_string(sec));
  EXPECT_LT(sec, 10.0);
}
