#pragma once

// Closed-form heat transfer between two identical half-spaces.
//
// Self-contained on purpose: its own Fresnel coefficients and its own
// recursive Gauss-Legendre quadrature, so agreement with the grating pipeline
// at a = 0 means something. Only the material model is shared.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "nfrht/constants.hpp"
#include "nfrht/materials.hpp"

namespace nfrht {

struct PlanarTransferResult {
  double h0 = 0.0;  // W m^-2 K^-1
  double s_propagating = 0.0;
  double s_evanescent = 0.0;
  double p_propagating = 0.0;
  double p_evanescent = 0.0;
  double error = 0.0;
  bool window_clamped = false;
};

struct PlanarConfig {
  double omega_min = 1e13;
  double omega_max = 1e15;
  /// Frequency integral tolerance; the wavevector integrals run 1000x tighter
  /// so their noise never drives the outer refinement.
  double rel_tol = 1e-6;
  /// Evanescent cut at max(light_factor w/c, cutoff / L).
  double evanescent_cutoff = 40.0;
  double light_factor = 5.0;
};

namespace planar {

using C = std::complex<double>;
using Vec4 = std::array<double, 4>;  // s-prop, s-evan, p-prop, p-evan

// 10-point Gauss-Legendre on [-1, 1]; the 5-point rule gives the comparison.
inline constexpr std::array<double, 5> kX10 = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                               0.8650633666889845, 0.9739065285171717};
inline constexpr std::array<double, 5> kW10 = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                               0.1494513491505806, 0.0666713443086881};
inline constexpr std::array<double, 3> kX5 = {0.0, 0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 3> kW5 = {0.5688888888888889, 0.4786286704993665, 0.2369268850561891};

inline Vec4 add(const Vec4& a, const Vec4& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]}; }
inline double total(const Vec4& a) { return a[0] + a[1] + a[2] + a[3]; }

template <class F>
std::pair<Vec4, Vec4> gauss_pair(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Vec4 g10{}, g5{};
  auto acc = [](Vec4& s, double w, const Vec4& v) {
    for (int i = 0; i < 4; ++i) s[i] += w * v[i];
  };
  for (int j = 0; j < 5; ++j) {
    acc(g10, kW10[j] * h, f(c - h * kX10[j]));
    acc(g10, kW10[j] * h, f(c + h * kX10[j]));
  }
  acc(g5, kW5[0] * h, f(c));
  for (int j = 1; j < 3; ++j) {
    acc(g5, kW5[j] * h, f(c - h * kX5[j]));
    acc(g5, kW5[j] * h, f(c + h * kX5[j]));
  }
  return {g10, g5};
}

// Recursive bisection until |G10 - G5| on the summed components meets abs_tol.
template <class F>
Vec4 recurse(const F& f, double a, double b, double abs_tol, int depth, double& err) {
  const auto [g10, g5] = gauss_pair(f, a, b);
  double diff = 0.0, mag = 0.0;
  for (int i = 0; i < 4; ++i) {
    diff += std::abs(g10[i] - g5[i]);
    mag += std::abs(g10[i]);
  }
  // the roundoff floor stops width-proportional targets from chasing noise
  if (diff <= abs_tol || diff <= 1e-13 * mag || depth >= 30) {
    err += diff;
    return g10;
  }
  const double m = 0.5 * (a + b);
  return add(recurse(f, a, m, 0.5 * abs_tol, depth + 1, err), recurse(f, m, b, 0.5 * abs_tol, depth + 1, err));
}

/// Integrates over [a, b] split into n log- or linear-spaced seed panels, with
/// the absolute target set from a first pass over the same panels.
template <class F>
Vec4 integrate(const F& f, double a, double b, double rel_tol, int seeds, bool log_spaced, double& err) {
  auto edge = [&](int i) {
    if (i == seeds) return b;
    return log_spaced ? a * std::pow(b / a, double(i) / seeds) : a + (b - a) * i / seeds;
  };
  double rough = 0.0;
  for (int i = 0; i < seeds; ++i) {
    for (double v : gauss_pair(f, edge(i), edge(i + 1)).first) rough += std::abs(v);
  }
  const double tol = rel_tol * rough / seeds;
  Vec4 sum{};
  for (int i = 0; i < seeds; ++i) sum = add(sum, recurse(f, edge(i), edge(i + 1), tol, 0, err));
  return sum;
}

inline double bose(double T, double w) {
  const double x = constants::hbar * w / (constants::k_B * T);
  if (x > 700.0) return 0.0;
  return constants::hbar * w / std::expm1(x);
}

/// Fresnel amplitudes from vacuum onto eps, parametrised by the vacuum kz
/// (real or i*kappa) so that grazing incidence carries no cancellation.
struct Fresnel {
  C rs, rp;
};

inline Fresnel fresnel(C eps, double k0, C kz) {
  C kz1 = std::sqrt((eps - 1.0) * (k0 * k0) + kz * kz);
  if (kz1.imag() < 0.0) kz1 = -kz1;
  return {(kz - kz1) / (kz + kz1), (eps * kz - kz1) / (eps * kz + kz1)};
}

}  // namespace planar

/// Spectral kernel  Int k dk / 2pi  of the four transmission channels at w.
inline std::array<double, 4> planar_spectral(const DielectricModel& material, double omega, double L,
                                             const PlanarConfig& cfg = {}) {
  using namespace planar;
  const C eps = material(omega);
  const double k0 = omega / constants::c;
  double err = 0.0;

  // Propagating: integrate over kz in (0, k0); k dk = kz dkz.
  auto prop = [&](double kz) -> Vec4 {
    const Fresnel r = fresnel(eps, k0, C(kz, 0.0));
    const C e2 = std::exp(C(0.0, 2.0 * kz * L));
    auto t = [&](C rr) { return std::pow(1.0 - std::norm(rr), 2) / std::norm(1.0 - rr * rr * e2); };
    return {kz * t(r.rs), 0.0, kz * t(r.rp), 0.0};
  };
  // Evanescent: integrate over kappa = Im kz in (0, kappa_max); k dk = kappa dkappa.
  auto evan = [&](double kappa) -> Vec4 {
    const Fresnel r = fresnel(eps, k0, C(0.0, kappa));
    const double e = std::exp(-2.0 * kappa * L);
    auto t = [&](C rr) { return 4.0 * std::pow(rr.imag(), 2) * e / std::norm(1.0 - rr * rr * e); };
    return {0.0, kappa * t(r.rs), 0.0, kappa * t(r.rp)};
  };

  const double kmax = std::max(cfg.light_factor * k0, cfg.evanescent_cutoff / L);
  const double kappa_max = std::sqrt(kmax * kmax - k0 * k0);
  const double tol = 1e-3 * cfg.rel_tol;
  const Vec4 a = integrate(prop, 0.0, k0, tol, 8, false, err);
  // Evanescent integrand peaks near kappa ~ 1/L; log-spaced seeds from a small floor.
  const double floor = std::min(1e-3 * k0, 1e-3 / L);
  Vec4 b = integrate(evan, floor, kappa_max, tol, 48, true, err);
  const Vec4 b0 = integrate(evan, 0.0, floor, tol, 1, false, err);
  b = add(b, b0);
  const double norm = 1.0 / (2.0 * constants::pi);
  return {a[0] * norm, b[1] * norm, a[2] * norm, b[3] * norm};
}

/// h0(L) between two half-spaces of the same material.
inline PlanarTransferResult planar_h0(const DielectricModel& material, const ThermalState& temps, double L,
                                      const PlanarConfig& cfg = {}) {
  using namespace planar;
  if (!(L > 0.0)) throw std::invalid_argument("separation L must be positive");
  double lo = cfg.omega_min, hi = cfg.omega_max;
  PlanarTransferResult out;
  const auto [tlo, thi] = material.range();
  if (lo < tlo || hi > thi) {
    out.window_clamped = true;
    lo = std::max(lo, tlo);
    hi = std::min(hi, thi);
  }
  auto f = [&](double w) -> Vec4 {
    const double weight = (bose(temps.T1, w) - bose(temps.T2, w)) / (temps.T1 - temps.T2) / (2.0 * constants::pi);
    const auto s = planar_spectral(material, w, L, cfg);
    return {weight * s[0], weight * s[1], weight * s[2], weight * s[3]};
  };
  double err = 0.0;
  const Vec4 r = integrate(f, lo, hi, cfg.rel_tol, 96, true, err);
  out.s_propagating = r[0];
  out.s_evanescent = r[1];
  out.p_propagating = r[2];
  out.p_evanescent = r[3];
  out.h0 = total(r);
  out.error = err;
  return out;
}

/// Large-L plateau: the Fabry-Perot factor averaged over its phase,
/// <1/|1 - r^2 e^{i phi}|^2> = 1/(1 - |r|^4); evanescent channels vanish.
inline double planar_far_field(const DielectricModel& material, const ThermalState& temps,
                               const PlanarConfig& cfg = {}) {
  using namespace planar;
  double lo = cfg.omega_min, hi = cfg.omega_max;
  const auto [tlo, thi] = material.range();
  lo = std::max(lo, tlo);
  hi = std::min(hi, thi);
  double err = 0.0;
  auto f = [&](double w) -> Vec4 {
    const double weight = (bose(temps.T1, w) - bose(temps.T2, w)) / (temps.T1 - temps.T2) / (2.0 * constants::pi);
    const C eps = material(w);
    const double k0 = w / constants::c;
    auto g = [&](double kz) -> Vec4 {
      const Fresnel r = fresnel(eps, k0, C(kz, 0.0));
      auto t = [](C rr) {
        const double m = std::norm(rr);
        return (1.0 - m) / (1.0 + m);  // (1-|r|^2)^2 / (1-|r|^4)
      };
      return {kz * t(r.rs), 0.0, kz * t(r.rp), 0.0};
    };
    double e2 = 0.0;
    const Vec4 s = integrate(g, 0.0, k0, 1e-3 * cfg.rel_tol, 4, false, e2);
    const double n = weight / (2.0 * constants::pi);
    return {n * s[0], 0.0, n * s[2], 0.0};
  };
  return total(integrate(f, lo, hi, cfg.rel_tol, 96, true, err));
}

/// Black-body exchange coefficient sigma (T1^4 - T2^4) / (T1 - T2).
inline double blackbody_coefficient(const ThermalState& t) {
  return constants::sigma_SB * (std::pow(t.T1, 4) - std::pow(t.T2, 4)) / (t.T1 - t.T2);
}

}  // namespace nfrht
