#include <cmath>

#include <gtest/gtest.h>

#include "walkdiff/measure.hpp"
#include "walkdiff/numerics.hpp"

using namespace walkdiff;

TEST(Measure, Validation) {
  EXPECT_TRUE(validate_measure(IncrementMeasure::rademacher()).valid);
  const MeasureReport off = validate_measure(IncrementMeasure::from_atoms({{-1.0, 0.5}, {2.0, 0.5}}));
  ASSERT_FALSE(off.valid);
  EXPECT_NE(off.failures.front().find("centering"), std::string::npos);
  const MeasureReport dirac = validate_measure(IncrementMeasure::from_atoms({{0.0, 1.0}}));
  ASSERT_FALSE(dirac.valid);
  EXPECT_NE(dirac.failures.front().find("non-degeneracy"), std::string::npos);
  EXPECT_FALSE(validate_measure(IncrementMeasure::from_atoms({{-1.0, 0.4}, {1.0, 0.4}})).valid);
  const auto normal = IncrementMeasure::from_density("normal", {});
  EXPECT_TRUE(validate_measure(normal, 1).valid);
  EXPECT_FALSE(validate_measure(normal, 2).valid);
  EXPECT_TRUE(validate_measure(IncrementMeasure::from_density("uniform", {{"a", 2.0}}), 4).valid);
  EXPECT_THROW(IncrementMeasure::from_density("uniform", {{"b", 1.0}}), Error);
}

TEST(Measure, AtomsAreSortedAndMerged) {
  const auto mu = IncrementMeasure::from_atoms({{1.0, 0.25}, {-2.0, 1.0 / 3}, {1.0, 0.25}, {-0.5, 1.0 / 6}});
  ASSERT_EQ(mu.atoms().size(), 3u);
  EXPECT_EQ(mu.atoms()[0].x, -2.0);
  EXPECT_EQ(mu.atoms()[2].w, 0.5);
  EXPECT_EQ(mu.inf_supp(), -2.0);
  EXPECT_EQ(mu.sup_supp(), 1.0);
  EXPECT_DOUBLE_EQ(mu.mass_at_inf_supp(), 1.0 / 3);
}

TEST(Measure, QuantileExamples) {
  const auto rad = IncrementMeasure::rademacher();
  EXPECT_EQ(rad.quantile(0.25), -1.0);
  EXPECT_EQ(rad.quantile(0.5), 1.0);
  EXPECT_THROW(rad.quantile(0.0), Error);
  EXPECT_THROW(rad.quantile(1.0), Error);

  // Oracle: bisection on a tabulated CDF of the uniform law on [-1, 1].
  auto tab_cdf = [](double x) { return std::clamp((x + 1.0) / 2.0, 0.0, 1.0); };
  double lo = -1, hi = 1;
  for (int i = 0; i < 100; ++i) (tab_cdf(0.5 * (lo + hi)) > 0.75 ? hi : lo) = 0.5 * (lo + hi);
  EXPECT_NEAR(lo, 0.5, 1e-12);
  EXPECT_NEAR(IncrementMeasure::from_density("uniform", {}).quantile(0.75), 0.5, 1e-15);
}

TEST(Measure, QuantileInvertsCdf) {
  for (const auto& mu : {IncrementMeasure::from_density("uniform", {{"a", 1.5}}),
                         IncrementMeasure::from_density("triangular", {}),
                         IncrementMeasure::from_density("normal", {{"sigma", 0.7}}),
                         IncrementMeasure::from_density("exp_rational", {})}) {
    double prev = -kInf;
    for (double r : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.63, 0.9, 0.999, 1 - 1e-9}) {
      const double x = mu.quantile(r);
      EXPECT_GE(x, prev);
      prev = x;
      EXPECT_NEAR(mu.cdf(x), r, 1e-11) << mu.name() << " r=" << r;
    }
  }
}

TEST(Measure, ExpRationalNormalizationAndMoments) {
  const auto mu = IncrementMeasure::from_density("exp_rational", {});
  auto pdf = [&](double x) { return mu.pdf(x); };
  EXPECT_NEAR(quad(pdf, -kInf, kInf, 1e-12).value, 1.0, 1e-10);
  auto m2 = [&](double x) { return x * x * mu.pdf(x); };
  EXPECT_NEAR(quad(m2, -kInf, kInf, 1e-12).value, mu.second_moment(), 1e-10);
  EXPECT_NEAR(mu.cdf(0.0), 0.5, 1e-15);
}

TEST(Measure, SecondMoments) {
  const auto mu = IncrementMeasure::from_atoms({{-2.0, 1.0 / 3}, {1.0, 2.0 / 3}});
  EXPECT_NEAR(mu.second_moment(), 4.0 / 3 + 2.0 / 3, 1e-12);
  EXPECT_NEAR(IncrementMeasure::from_density("uniform", {}).second_moment(), 1.0 / 3, 1e-15);
  const auto tri = IncrementMeasure::from_density("triangular", {{"a", 2.0}});
  auto m2 = [&](double x) { return x * x * tri.pdf(x); };
  EXPECT_NEAR(quad(m2, -2.0, 2.0, 1e-12).value, tri.second_moment(), 1e-12);
}

TEST(Measure, SamplingStatistics) {
  const auto rad = IncrementMeasure::rademacher();
  EXPECT_EQ(rad.quantile(0.3), -1.0);
  RngStream rng(2024, 0);
  const int n = 1000000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += rad.sample(rng);
  EXPECT_LE(std::abs(s / n), 3.0 / std::sqrt(n));

  const auto pair = IncrementMeasure::from_atoms({{-2.0, 1.0 / 3}, {1.0, 2.0 / 3}});
  int low = 0;
  for (int i = 0; i < n; ++i) {
    const double x = pair.sample(rng);
    ASSERT_TRUE(x == -2.0 || x == 1.0);
    low += x == -2.0;
  }
  EXPECT_NEAR(static_cast<double>(low) / n, 1.0 / 3, 3.0 * std::sqrt(2.0 / 9 / n));

  const auto tri = IncrementMeasure::from_density("triangular", {});
  double m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = tri.sample(rng);
    ASSERT_GE(x, tri.inf_supp());
    ASSERT_LE(x, tri.sup_supp());
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m2, tri.second_moment(), 4.0 * std::sqrt((m4 - m2 * m2) / n));
}
