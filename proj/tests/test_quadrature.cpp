#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "nfrht/quadrature.hpp"

using namespace nfrht;

TEST(Quadrature, PolynomialExact) {
  QuadratureConfig c;
  const auto r = integrate_adaptive([](double x) { return x * x; }, 0.0, 1.0, c);
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-10);
  EXPECT_FALSE(r.flagged);
  EXPECT_EQ(r.nodes, 15u);
}

TEST(Quadrature, SevenPointRule) {
  QuadratureConfig c;
  c.rule = QuadratureRule::GK7;
  // the embedded 3-point Gauss rule is exact through degree 5
  const auto p = integrate_adaptive([](double x) { return std::pow(x, 5); }, 0.0, 1.0, c);
  EXPECT_NEAR(p.value, 1.0 / 6.0, 1e-14);
  EXPECT_EQ(p.nodes, 7u);
  c.rel_tol = 1e-9;
  const auto r = integrate_adaptive([](double x) { return std::exp(-x) * std::cos(5 * x); }, 0.0, 3.0, c);
  const double exact = (1.0 - std::exp(-3.0) * (std::cos(15.0) - 5.0 * std::sin(15.0))) / 26.0;
  EXPECT_NEAR(r.value, exact, 1e-9 * std::abs(exact));
  EXPECT_LE(std::abs(r.value - exact), 10 * r.error + 1e-16);
}

TEST(Quadrature, ExponentialTailWithTruncationMapping) {
  // x = t / (1 - t) maps [0, 1) onto [0, inf)
  QuadratureConfig c;
  c.rel_tol = 1e-8;
  auto f = [](double t) {
    const double x = t / (1.0 - t);
    return std::exp(-x) / ((1.0 - t) * (1.0 - t));
  };
  const auto r = integrate_adaptive(f, 0.0, 1.0, c);
  EXPECT_NEAR(r.value, 1.0, 1e-8);
  EXPECT_LE(std::abs(r.value - 1.0), std::max(r.error, 1e-14));
}

TEST(Quadrature, SeededLorentzianUsesFewerNodes) {
  const double x0 = 0.3718, g = 1e-3;
  auto f = [&](double x) { return g / ((x - x0) * (x - x0) + g * g) / std::numbers::pi; };
  const double exact = (std::atan((1.0 - x0) / g) + std::atan(x0 / g)) / std::numbers::pi;
  QuadratureConfig plain;
  plain.rel_tol = 1e-6;
  QuadratureConfig seeded = plain;
  // graded seeds around the peak, as the frequency axis does at resonances
  for (double k : {-100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0}) seeded.breakpoints.push_back(x0 + k * g);
  const auto a = integrate_adaptive(f, 0.0, 1.0, plain);
  const auto b = integrate_adaptive(f, 0.0, 1.0, seeded);
  EXPECT_NEAR(a.value, exact, 1e-6 * exact);
  EXPECT_NEAR(b.value, exact, 1e-6 * exact);
  EXPECT_LT(b.nodes, a.nodes);
}

TEST(Quadrature, BitIdenticalAcrossWorkerCounts) {
  auto f = [](double x) {
    Eigen::ArrayXd v(2);
    v << std::sin(30 * x) * std::exp(-x), 1.0 / (1e-4 + (x - 0.5) * (x - 0.5));
    return v;
  };
  QuadratureConfig c;
  c.rel_tol = 1e-9;
  c.workers = 1;
  const auto ref = integrate_adaptive_vec(f, 0.0, 2.0, c);
  for (unsigned w : {2u, 3u, 8u}) {
    c.workers = w;
    const auto r = integrate_adaptive_vec(f, 0.0, 2.0, c);
    ASSERT_EQ(r.nodes, ref.nodes);
    for (int k = 0; k < 2; ++k) {
      EXPECT_EQ(r.value[k], ref.value[k]) << "workers=" << w;
      EXPECT_EQ(r.error[k], ref.error[k]) << "workers=" << w;
    }
  }
}

TEST(Quadrature, BudgetExhaustionFlagsInsteadOfThrowing) {
  QuadratureConfig c;
  c.rel_tol = 1e-14;
  c.max_nodes = 45;
  const auto r = integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, c);
  EXPECT_TRUE(r.flagged);
  EXPECT_LE(r.nodes, 45u);
  EXPECT_GT(r.error, 0.0);
}

TEST(Quadrature, NonFiniteNodesAreDiscardedAndCounted) {
  QuadratureConfig c;
  auto f = [](double x) { return x == 0.5 ? NAN : 1.0; };
  const auto r = integrate_adaptive(f, 0.0, 1.0, c);  // 0.5 is the centre node
  EXPECT_GT(r.discarded, 0u);
  EXPECT_TRUE(std::isfinite(r.value));
}

TEST(Quadrature, AbsoluteFloorStopsRefinement) {
  QuadratureConfig c;
  c.rel_tol = 1e-12;
  auto f = [](double x) { return std::exp(-1e4 * x * x) + 1e-9 * std::sin(1e3 * x); };
  const auto tight = integrate_adaptive(f, -1.0, 1.0, c);
  c.abs_tol = 1e-4;
  const auto loose = integrate_adaptive(f, -1.0, 1.0, c);
  EXPECT_LT(loose.nodes, tight.nodes);
  EXPECT_NEAR(loose.value, std::sqrt(std::numbers::pi / 1e4), 1e-4);
}

TEST(Quadrature, RejectsInvalidConfig) {
  QuadratureConfig c;
  c.rel_tol = 0.0;
  EXPECT_THROW(integrate_adaptive([](double) { return 1.0; }, 0.0, 1.0, c), std::invalid_argument);
  c = {};
  c.max_nodes = 3;
  EXPECT_THROW(integrate_adaptive([](double) { return 1.0; }, 0.0, 1.0, c), std::invalid_argument);
  c = {};
  EXPECT_THROW(integrate_adaptive([](double) { return 1.0; }, 1.0, 0.0, c), std::invalid_argument);
}

// Reported errors must bound the true error (within 10x) in at least 9 of 10 cases.
TEST(Quadrature, ErrorEstimateHonesty) {
  struct Case {
    const char* name;
    std::function<double(double)> f;
    double a, b, exact;
  };
  const double pi = std::numbers::pi;
  const std::vector<Case> battery = {
      {"exp", [](double x) { return std::exp(x); }, 0, 1, std::exp(1.0) - 1.0},
      {"sqrt", [](double x) { return std::sqrt(x); }, 0, 1, 2.0 / 3.0},
      {"log", [](double x) { return std::log(x); }, 0, 1, -1.0},
      {"runge", [](double x) { return 1.0 / (1.0 + 25 * x * x); }, -1, 1, 0.4 * std::atan(5.0)},
      {"osc", [](double x) { return std::cos(40 * x); }, 0, pi / 3, std::sin(40 * pi / 3) / 40},
      {"peak", [](double x) { return 1e-2 / ((x - 0.3) * (x - 0.3) + 1e-4); }, 0, 1,
       std::atan(70.0) + std::atan(30.0)},
      {"gauss", [](double x) { return std::exp(-x * x); }, -5, 5, std::sqrt(pi) * std::erf(5.0)},
      {"abs", [](double x) { return std::abs(x - 0.3141); }, 0, 1, (0.3141 * 0.3141 + 0.6859 * 0.6859) / 2},
      {"x^-0.5log", [](double x) { return std::log(x) / std::sqrt(x); }, 0, 1, -4.0},
      {"bose", [](double x) { return x * x * x / std::expm1(x); }, 1e-8, 40, std::pow(pi, 4) / 15 - std::exp(-40.0) * (64000 + 4800 + 240 + 6)},
  };
  int honest = 0;
  for (const auto& c : battery) {
    QuadratureConfig q;
    q.rel_tol = 1e-7;
    q.max_nodes = 100000;
    const auto r = integrate_adaptive(c.f, c.a, c.b, q);
    const double true_err = std::abs(r.value - c.exact);
    const bool ok = true_err <= 10.0 * r.error;
    honest += ok ? 1 : 0;
    EXPECT_LE(true_err, 1e-6 * std::abs(c.exact)) << c.name;
    if (!ok) std::printf("  %s: true %.3g vs estimate %.3g\n", c.name, true_err, r.error);
  }
  EXPECT_GE(honest, 9);
}
