#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nfrht/materials.hpp"
#include "nfrht/rcwa.hpp"
#include "power_balance.hpp"

using namespace nfrht;
using nfrht::verify::Balance;
using nfrht::verify::power_balance;

namespace {

constexpr double kPi = constants::pi;

double omega_of_um(double um) { return 2.0 * kPi * constants::c / (um * 1e-6); }

double max_abs(const MatrixXc& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Basis, BranchRuleAndDimension) {
  const ModeBasis b(omega_of_um(10.0), 0.3e6, 2e6, 1.5e-6, 4);
  EXPECT_EQ(b.dim(), 2 * (2 * 4 + 1));
  for (int i = 0; i < b.orders(); ++i) {
    const double arg = std::arg(b.kz()[i]);
    EXPECT_GT(arg, -kPi / 2);
    EXPECT_LE(arg, kPi / 2);
  }
  EXPECT_THROW(ModeBasis(1e14, 3e6, 0.0, 1.5e-6, 1), std::invalid_argument);
}

TEST(Planar, VacuumGivesZero) {
  const ModeBasis b(1e14, 1e5, 2e5, 1e-6, 2);
  EXPECT_EQ(max_abs(planar_reflection(1.0, b).matrix), 0.0);
}

TEST(Planar, ConductorLimitAndFresnelValue) {
  const ModeBasis b(1e14, 0.0, 0.0, 1e-6, 0);
  const auto pec = planar_reflection(cplx(1e16, 0.0), b).matrix;
  EXPECT_NEAR(std::abs(pec(0, 0) - cplx(-1.0)), 0.0, 1e-7);
  EXPECT_NEAR(std::abs(pec(1, 1) - cplx(1.0)), 0.0, 1e-7);
  const auto r2 = planar_reflection(2.0, b).matrix;
  const double expect = (std::sqrt(2.0) - 1.0) / (std::sqrt(2.0) + 1.0);
  EXPECT_NEAR(std::abs(r2(0, 0)), expect, 1e-14);
  EXPECT_NEAR(std::abs(r2(1, 1)), expect, 1e-14);
}

TEST(Grating, FlatLimitEqualsPlanar) {
  const auto m = load_material("builtin:SiO2-table");
  for (double um : {8.75, 12.0, 21.0}) {
    const double w = omega_of_um(um);
    const GratingGeometry g(1.5e-6, 0.0, 0.2);
    for (double ky : {0.0, 0.5 * w / constants::c, 3e7}) {
      const ModeBasis b(w, 0.37 * kPi / g.period, ky, g.period, 6);
      const auto R = grating_reflection(g, m(w), b);
      const auto P = planar_reflection(m(w), b);
      EXPECT_LT(max_abs(R.matrix - P.matrix), 1e-10) << um << " " << ky;
    }
  }
}

TEST(Grating, FullFillEqualsElevatedPlanar) {
  const cplx eps(-2.1, 0.9);
  const double w = omega_of_um(9.0), a = 400e-9;
  const GratingGeometry g(1.0e-6, a, 1.0 - 1e-12);
  const ModeBasis b(w, 0.2 * kPi / g.period, 0.7 * w / constants::c, g.period, 5);
  const auto R = grating_reflection(g, eps, b, ReferencePlane::GrooveBottom).matrix;
  MatrixXc expect = planar_reflection(eps, b).matrix;
  for (int i = 0; i < b.dim(); ++i) expect(i, i) *= std::exp(cplx(0, 2) * b.kz()[i % b.orders()] * a);
  EXPECT_LT(max_abs(R - expect), 1e-8);
  // referenced to the top of a full layer the operator is the planar one
  const auto top = grating_reflection(g, eps, b).matrix;
  EXPECT_LT(max_abs(top - planar_reflection(eps, b).matrix), 1e-8);
}

TEST(Shift, IdentityPeriodicityAndGroup) {
  const auto m = load_material("builtin:SiO2-table");
  const double w = omega_of_um(8.75);
  const GratingGeometry g(1.5e-6, 0.5e-6, 0.2);
  const ModeBasis b(w, 0.3 * kPi / g.period, 2 * w / constants::c, g.period, 4);
  const auto R = grating_reflection(g, m(w), b);
  EXPECT_LT(max_abs(apply_lateral_shift(R, 0.0).matrix - R.matrix), 1e-15);
  EXPECT_LT(max_abs(apply_lateral_shift(R, g.period).matrix - R.matrix), 1e-12 * max_abs(R.matrix));
  const auto twice = apply_lateral_shift(apply_lateral_shift(R, 0.21e-6), 0.43e-6);
  const auto once = apply_lateral_shift(R, 0.64e-6);
  EXPECT_LT(max_abs(twice.matrix - once.matrix), 1e-12 * max_abs(R.matrix));
}

TEST(Shift, EqualsTranslatedGrating) {
  const cplx eps(3.0, 0.4);
  const double w = omega_of_um(7.0), d = 1.2e-6, delta = 0.31e-6;
  const ModeBasis b(w, 0.45 * kPi / d, 1.3 * w / constants::c, d, 5);
  const auto R = grating_reflection(GratingGeometry(d, 0.3e-6, 0.35), eps, b);
  const auto Rt = grating_reflection(GratingGeometry(d, 0.3e-6, 0.35, -delta), eps, b);
  EXPECT_LT(max_abs(apply_lateral_shift(R, delta).matrix - Rt.matrix), 1e-9 * max_abs(R.matrix));
}

// Lossless dielectric: reflected + transmitted propagative power equals incident.
TEST(Grating, EnergyConservationLossless) {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const GratingGeometry g(1.0e-6, 0.35e-6, 0.4);
  const int N = 8;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double w = 2e14 + 1.8e15 * U(rng);
    const double k0 = w / constants::c;
    const double kx = (2.0 * U(rng) - 1.0) * kPi / g.period;
    const double ky = 0.9 * std::sqrt(std::max(0.0, k0 * k0 - kx * kx)) * U(rng);
    const GratingSolver solver(g, 4.0, w, kx, N);
    const auto sol = solver.solve(ky);
    const auto& b = sol.reflection.basis;
    for (int col = 0; col < b.dim(); ++col) {
      if (!b.propagating(col % b.orders())) continue;
      const Balance bal = power_balance(sol, col);
      worst = std::max(worst, std::abs(bal.reflected + bal.transmitted - 1.0));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

// Lorentz reciprocity: kz_n R(k)_{(a,n),(b,m)} = s_a s_b kz_m R(-k)_{(b,-m),(a,-n)},
// s = -1 for s polarization (its basis vector flips with k), +1 for p.
TEST(Grating, Reciprocity) {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int N = 4, M = 2 * N + 1;
  double worst = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const cplx eps(-3.0 + 8.0 * U(rng), 0.05 + 2.0 * U(rng));
    const double d = 0.6e-6 + 1e-6 * U(rng);
    const GratingGeometry g(d, 0.5e-6 * U(rng) + 0.05e-6, 0.15 + 0.7 * U(rng));
    const double w = 1e14 + 3e14 * U(rng);
    const double kx = (2.0 * U(rng) - 1.0) * kPi / d;
    const double ky = 3.0 * w / constants::c * (2.0 * U(rng) - 1.0);
    const ModeBasis bp(w, kx, ky, d, N), bm(w, -kx, -ky, d, N);
    const MatrixXc Rp = grating_reflection(g, eps, bp).matrix;
    const MatrixXc Rm = grating_reflection(g, eps, bm).matrix;
    const double scale = max_abs(Rp);
    for (int a = 0; a < 2; ++a)
      for (int bb = 0; bb < 2; ++bb)
        for (int n = 0; n < M; ++n)
          for (int m = 0; m < M; ++m) {
            const double sign = (a == bb) ? 1.0 : -1.0;
            const cplx lhs = bp.kz()[n] * Rp(a * M + n, bb * M + m);
            const cplx rhs = sign * bm.kz()[M - 1 - m] * Rm(bb * M + (M - 1 - m), a * M + (M - 1 - n));
            const double ref = std::max(std::abs(bp.kz()[n]), std::abs(bp.kz()[m])) * scale;
            worst = std::max(worst, std::abs(lhs - rhs) / ref);
          }
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Grating, SolverReusesLayerAcrossKy) {
  const auto m = load_material("builtin:SiO2-table");
  const double w = omega_of_um(8.75);
  const GratingGeometry g(1.5e-6, 0.5e-6, 0.2);
  const double kx = 0.3 * kPi / g.period;
  const GratingSolver solver(g, m(w), w, kx, 6);
  for (double ky : {0.0, 1e6, 2e7}) {
    const ModeBasis b(w, kx, ky, g.period, 6);
    EXPECT_LT(max_abs(solver.reflection(ky).matrix - grating_reflection(g, m(w), b).matrix), 1e-13);
  }
}

TEST(Grating, TruncationDrift) {
  // converged-N self-consistency at the 8.75 um polariton band
  const auto m = load_material("builtin:SiO2-table");
  const double w = omega_of_um(8.75);
  const GratingGeometry g(1.5e-6, 0.5e-6, 0.2);
  const double kx = 0.3 * kPi / g.period, ky = 2.0 * w / constants::c;
  const int N1 = 200, N2 = 205;
  const auto R1 = grating_reflection(g, m(w), ModeBasis(w, kx, ky, g.period, N1)).matrix;
  const auto R2 = grating_reflection(g, m(w), ModeBasis(w, kx, ky, g.period, N2)).matrix;
  // compare the shared orders |n| <= 10
  const int M1 = 2 * N1 + 1, M2 = 2 * N2 + 1, K = 10;
  double worst = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int bb = 0; bb < 2; ++bb)
      for (int n = -K; n <= K; ++n)
        for (int k = -K; k <= K; ++k)
          worst = std::max(worst, std::abs(R1(a * M1 + n + N1, bb * M1 + k + N1) - R2(a * M2 + n + N2, bb * M2 + k + N2)));
  EXPECT_LT(worst, 2e-4);  // entries are O(1) here
}

TEST(Grating, RejectsBadInput) {
  EXPECT_THROW(GratingGeometry(0.0, 1e-7, 0.2), std::invalid_argument);
  EXPECT_THROW(GratingGeometry(1e-6, -1e-7, 0.2), std::invalid_argument);
  EXPECT_THROW(GratingGeometry(1e-6, 1e-7, 1.0), std::invalid_argument);
  const GratingGeometry g(1e-6, 1e-7, 0.2, -0.25e-6);
  EXPECT_NEAR(g.shift, 0.75e-6, 1e-18);
  const ModeBasis b(1e14, 0.0, 0.0, 2e-6, 1);
  EXPECT_THROW(grating_reflection(g, 2.0, b), std::invalid_argument);
}
