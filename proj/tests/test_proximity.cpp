#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nfrht/proximity.hpp"

using namespace nfrht;

namespace {
const double d = 1500e-9, a = 500e-9;
}

TEST(Proximity, AlignedWeights) {
  const GratingGeometry g(d, a, 0.2, 0.0);
  const auto w = pa_weights(g, 0.0);
  EXPECT_DOUBLE_EQ(w.at_L, 0.2);
  EXPECT_DOUBLE_EQ(w.at_L_plus_a, 0.0);
  EXPECT_DOUBLE_EQ(w.at_L_plus_2a, 0.8);
  EXPECT_FALSE(w.saturated);
  EXPECT_DOUBLE_EQ(pa_coefficient(g, 10.0, 5.0, 1.0), 0.2 * 10.0 + 0.8 * 1.0);
}

TEST(Proximity, WeightSimplex) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> fill(0.01, 0.49), shift(-3.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const GratingGeometry g(d, a, fill(rng), 0.0);
    const auto w = pa_weights(g, shift(rng) * d);
    for (double x : {w.at_L, w.at_L_plus_a, w.at_L_plus_2a}) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_NEAR(w.at_L + w.at_L_plus_a + w.at_L_plus_2a, 1.0, 1e-14);
  }
}

TEST(Proximity, ContinuousAtRidgeWidth) {
  const GratingGeometry g(d, a, 0.3, 0.0);
  const double pp = g.ridge_width();
  const auto at = pa_weights(g, pp);
  const auto past = pa_weights(g, std::nextafter(pp, 1.0));
  EXPECT_FALSE(at.saturated);
  EXPECT_TRUE(past.saturated);
  EXPECT_EQ(at.at_L, 0.0);
  EXPECT_NEAR(at.at_L_plus_a, past.at_L_plus_a, 1e-15);
  EXPECT_NEAR(at.at_L_plus_2a, past.at_L_plus_2a, 1e-15);
}

TEST(Proximity, MonotoneInShiftBelowRidgeWidth) {
  const double h0 = 100.0, ha = 10.0, h2a = 1.0;
  GratingGeometry g(d, a, 0.2, 0.0);
  double prev = INFINITY;
  for (double s = 0.0; s <= g.ridge_width(); s += g.ridge_width() / 50) {
    g.shift = s;
    const double h = pa_coefficient(g, h0, ha, h2a);
    EXPECT_LT(h, prev);
    prev = h;
  }
  // saturated beyond p'
  g.shift = 0.4 * d;
  const double sat = pa_coefficient(g, h0, ha, h2a);
  g.shift = 0.5 * d;
  EXPECT_DOUBLE_EQ(pa_coefficient(g, h0, ha, h2a), sat);
}

TEST(Proximity, ShiftReduction) {
  EXPECT_DOUBLE_EQ(reduce_shift(0.0, d), 0.0);
  EXPECT_NEAR(reduce_shift(d, d), 0.0, 1e-22);
  EXPECT_NEAR(reduce_shift(-0.3 * d, d), 0.3 * d, 1e-21);
  EXPECT_NEAR(reduce_shift(0.7 * d, d), 0.3 * d, 1e-21);
  EXPECT_NEAR(reduce_shift(5.2 * d, d), 0.2 * d, 1e-20);
  GratingGeometry g(d, a, 0.2, 0.0);
  for (double s : {0.1, 0.35, 0.5}) {
    const auto w1 = pa_weights(g, s * d), w2 = pa_weights(g, -s * d), w3 = pa_weights(g, (1 - s) * d + 2 * d);
    EXPECT_NEAR(w1.at_L_plus_a, w2.at_L_plus_a, 1e-12);
    EXPECT_NEAR(w1.at_L_plus_a, w3.at_L_plus_a, 1e-12);
  }
}

TEST(Proximity, FlatLimitCollapses) {
  // a = 0: the three distances coincide
  const auto h0 = [](double L) { return 1e-14 / (L * L); };
  for (double s : {0.0, 0.1, 0.3, 0.5}) {
    const GratingGeometry g(d, 0.0, 0.2, s * d);
    EXPECT_NEAR(pa_coefficient(g, 100e-9, h0) / h0(100e-9), 1.0, 1e-14);
  }
}

TEST(Proximity, RejectsWideRidges) {
  const GratingGeometry g(d, a, 0.5, 0.0);
  EXPECT_THROW(pa_weights(g, 0.0), std::domain_error);
  const GratingGeometry g2(d, a, 0.2, 0.0);
  EXPECT_THROW(pa_coefficient(g2, -1.0, [](double) { return 1.0; }), std::invalid_argument);
}
