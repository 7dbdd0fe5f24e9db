#include <cmath>

#include <gtest/gtest.h>

#include "walkdiff/rng.hpp"

using walkdiff::RngStream;

// Known-answer vectors of the Philox4x32-10 reference implementation.
TEST(Rng, PhiloxKnownAnswers) {
  RngStream zero(0, 0);
  EXPECT_EQ(zero.next_u64(), 0x6627e8d5e169c58dULL);
  EXPECT_EQ(zero.next_u64(), 0xbc57ac4c9b00dbd8ULL);

  // Counter words (243f6a88, 05a308d3, 13198a2e, 03707344) under key
  // (a4093822, 299f31d0); an independent implementation that reproduces the
  // published vector for counter word 1 = 85a308d3 gives these words.
  RngStream pi(0x299f31d0a4093822ULL, 0x0370734413198a2eULL);
  pi.seek(0x05a308d3243f6a88ULL * 2);
  EXPECT_EQ(pi.next_u64(), 0x2fe11a02572a2f27ULL);
  EXPECT_EQ(pi.next_u64(), 0x2f88763b78d5e325ULL);
}

TEST(Rng, SeekReproducesStream) {
  RngStream a(42, 7);
  std::vector<std::uint64_t> first;
  for (int i = 0; i < 9; ++i) first.push_back(a.next_u64());
  RngStream b(42, 7);
  b.seek(5);
  for (int i = 5; i < 9; ++i) EXPECT_EQ(b.next_u64(), first[i]);
  RngStream c(42, 8);
  EXPECT_NE(c.next_u64(), first[0]);
}

TEST(Rng, UniformOpenAndNormalMoments) {
  RngStream r(1, 0);
  const int n = 200000;
  double s = 0, s2 = 0, u_min = 1, u_max = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    u_min = std::min(u_min, u);
    u_max = std::max(u_max, u);
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_GT(u_min, 0.0);
  EXPECT_LT(u_max, 1.0);
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}
