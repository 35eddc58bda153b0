#pragma once

// Heat-transfer coefficient between two identical facing gratings.
//
//   h   = 1/(T1 - T2) Int dw/2pi (e_T1 - e_T2) H12(w)
//   H12 = Int_BZ dkx Int_R dky / 4pi^2  tr(D W1 D^+ W2)
//
// Body 1 is the lower grating (ridges pointing up, centred at x = 0), body 2
// its mirror image across the gap, displaced laterally by delta. Both
// reflection operators come from one RCWA solve per (w, kx, ky):
//   R2 = J Phi(delta) R1 Phi(delta)^+ J,
// where J = diag(+1 on s, -1 on p) is the z-mirror in this polarization basis.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nfrht/constants.hpp"
#include "nfrht/materials.hpp"
#include "nfrht/quadrature.hpp"
#include "nfrht/rcwa.hpp"

namespace nfrht {

/// Diagonals of Sigma_n^{p/e} = 1/2 kz^n Pi^{p/e} for n = -1, +1.
struct SigmaOperators {
  VectorXc minus1_prop, minus1_evan, plus1_prop, plus1_evan;
  /// Projector diagonals Pi^p and Pi^e (entries 0, 1 or 2).
  Eigen::VectorXd proj_prop, proj_evan;
};

inline SigmaOperators sigma_operators(const ModeBasis& basis) {
  const int n = basis.dim(), M = basis.orders();
  const double k02 = basis.k0() * basis.k0();
  SigmaOperators s{VectorXc::Zero(n),       VectorXc::Zero(n),       VectorXc::Zero(n),
                   VectorXc::Zero(n),       Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int i = 0; i < n; ++i) {
    const int o = i % M;
    const double kx = basis.kx_orders()[o];
    const double diff = k02 - (kx * kx + basis.ky() * basis.ky());
    const double sgn = (diff > 0.0) - (diff < 0.0);
    s.proj_prop[i] = 1.0 + sgn;
    s.proj_evan[i] = 1.0 - sgn;
    const cplx kz = basis.kz()[o];
    if (s.proj_prop[i] != 0.0) s.minus1_prop[i] = 0.5 * s.proj_prop[i] / kz;
    if (s.proj_evan[i] != 0.0) s.minus1_evan[i] = 0.5 * s.proj_evan[i] / kz;
    s.plus1_prop[i] = 0.5 * s.proj_prop[i] * kz;
    s.plus1_evan[i] = 0.5 * s.proj_evan[i] * kz;
  }
  return s;
}

/// S1 = R1, S2 = E R2 E with E = diag(exp(i kz L)).
inline std::pair<MatrixXc, MatrixXc> build_system_operators(const MatrixXc& R1, const MatrixXc& R2, double L,
                                                            const ModeBasis& basis) {
  if (!(L > 0.0)) throw std::invalid_argument("separation L must be positive");
  const Eigen::Index n = basis.dim();
  if (R1.rows() != n || R1.cols() != n || R2.rows() != n || R2.cols() != n)
    throw std::invalid_argument("reflection operators do not match the mode basis");
  const VectorXc E = (cplx(0.0, 1.0) * L * basis.kz_full()).array().exp().matrix();
  return {R1, E.asDiagonal() * R2 * E.asDiagonal()};
}

inline std::pair<MatrixXc, MatrixXc> build_system_operators(const ReflectionOperator& R1,
                                                            const ReflectionOperator& R2, double L) {
  return build_system_operators(R1.matrix, R2.matrix, L, R1.basis);
}

struct TraceSample {
  double value = 0.0;
  double imag_residual = 0.0;
  double rcond = 1.0;
  /// Non-finite, numerically singular (1 - S1 S2), or an imaginary residual
  /// above 1e-8 of the real part (and above 1e-30).
  bool flagged = false;
};

namespace detail {

// W1 = Sm1p - S1 Sm1p S1^+ + S1 Sm1e - Sm1e S1^+
inline MatrixXc w1_operator(const MatrixXc& S1, const SigmaOperators& sg) {
  MatrixXc W1 = -(S1 * sg.minus1_prop.asDiagonal()) * S1.adjoint();
  W1.diagonal() += sg.minus1_prop;
  W1 += S1 * sg.minus1_evan.asDiagonal();
  W1 -= sg.minus1_evan.asDiagonal() * S1.adjoint();
  return W1;
}

// W2 = Sp1p - S2^+ Sp1p S2 + S2^+ Sp1e - Sp1e S2, with the quadratic term given.
inline MatrixXc w2_operator(const MatrixXc& S2, const MatrixXc& S2h_Sp_S2, const SigmaOperators& sg) {
  MatrixXc W2 = -S2h_Sp_S2;
  W2.diagonal() += sg.plus1_prop;
  W2 += S2.adjoint() * sg.plus1_evan.asDiagonal();
  W2 -= sg.plus1_evan.asDiagonal() * S2;
  return W2;
}

// tr(D W1 D^+ W2) with one LU of (1 - S1 S2) serving both D and D^+.
inline TraceSample trace_core(MatrixXc one_minus, const MatrixXc& W1, const MatrixXc& W2) {
  one_minus = -one_minus;
  one_minus.diagonal().array() += 1.0;
  const Eigen::PartialPivLU<MatrixXc> lu(one_minus);
  TraceSample out;
  out.rcond = lu.rcond();
  const MatrixXc X = lu.solve(W1);            // D W1
  const MatrixXc Y = lu.adjoint().solve(W2);  // D^+ W2
  const cplx tr = X.transpose().cwiseProduct(Y).sum();
  out.value = tr.real();
  out.imag_residual = std::abs(tr.imag());
  const bool finite = std::isfinite(tr.real()) && std::isfinite(tr.imag());
  out.flagged = !finite || !(out.rcond > 1e-15) ||
                (out.imag_residual > 1e-8 * std::abs(out.value) && out.imag_residual > 1e-30);
  return out;
}

}  // namespace detail

/// tr(D W1 D^+ W2), D = (1 - S1 S2)^{-1}; solves against one LU of
/// (1 - S1 S2) instead of forming D.
inline TraceSample transmission_trace(const MatrixXc& S1, const MatrixXc& S2, const SigmaOperators& sg) {
  const Eigen::Index n = S1.rows();
  if (S1.cols() != n || S2.rows() != n || S2.cols() != n || sg.minus1_prop.size() != n)
    throw std::invalid_argument("transmission_integrand: dimension mismatch");
  const MatrixXc W1 = detail::w1_operator(S1, sg);
  const MatrixXc Q = (S2.adjoint() * sg.plus1_prop.asDiagonal()) * S2;
  return detail::trace_core(S1 * S2, W1, detail::w2_operator(S2, Q, sg));
}

inline TraceSample transmission_integrand(const MatrixXc& S1, const MatrixXc& S2, const ModeBasis& basis) {
  return transmission_trace(S1, S2, sigma_operators(basis));
}

// ---------------------------------------------------------------------------
// Jobs and configuration

struct TransferConfig {
  /// Diffraction truncation order N (2(2N+1) modes).
  int truncation = 15;
  /// When > 0, raise N so the highest order reaches kx = lateral_cutoff / L.
  double lateral_cutoff = 0.0;
  /// ky_max = max(ky_light_factor w/c, evanescent_cutoff / L).
  double evanescent_cutoff = 40.0;
  double ky_light_factor = 5.0;
  double omega_min = 1e13;
  double omega_max = 1e15;
  /// Relative tolerance of the frequency integral.
  double rel_tol = 1e-3;
  /// Inner (kx, ky) integrals run at rel_tol * inner_tol_ratio.
  double inner_tol_ratio = 0.3;
  QuadratureRule omega_rule = QuadratureRule::GK15;
  QuadratureRule wavevector_rule = QuadratureRule::GK15;
  std::size_t omega_budget = 3000;
  std::size_t kx_budget = 1500;
  std::size_t ky_budget = 3000;
  /// Worker threads for the frequency level; 0 reads NFRHT_WORKERS (default 1).
  unsigned workers = 0;
  /// Nodes whose matching condition estimate exceeds this are redone at N - 2.
  double max_condition = 1e12;
  /// Derive absolute H12 tolerances from a flat-plate estimate of h.
  bool absolute_floors = true;

  void validate() const {
    if (truncation < 0) throw std::invalid_argument("truncation must be >= 0");
    if (lateral_cutoff < 0.0) throw std::invalid_argument("lateral cutoff must be >= 0");
    if (!(evanescent_cutoff > 0.0)) throw std::invalid_argument("evanescent cutoff must be positive");
    if (!(ky_light_factor >= 1.0)) throw std::invalid_argument("ky light factor must be >= 1");
    if (!(omega_min > 0.0 && omega_max > omega_min)) throw std::invalid_argument("invalid frequency window");
    if (!(rel_tol > 0.0 && inner_tol_ratio > 0.0)) throw std::invalid_argument("tolerances must be positive");
    if (!(max_condition > 1.0)) throw std::invalid_argument("max condition must exceed 1");
  }
};

struct TransferJob {
  GratingGeometry geometry;
  DielectricModel material;
  double separation;  // L [m], distance of closest approach
  ThermalState temperatures;
  /// Lateral displacements evaluated together; empty means {geometry.shift}.
  std::vector<double> shifts = {};

  std::vector<double> effective_shifts() const {
    return shifts.empty() ? std::vector<double>{geometry.shift} : shifts;
  }
};

struct TransferFlags {
  std::size_t discarded_nodes = 0;
  std::size_t reduced_truncation_nodes = 0;
  bool budget_exhausted = false;
  bool window_clamped = false;
  bool near_defective = false;

  bool any() const { return discarded_nodes > 0 || budget_exhausted || reduced_truncation_nodes > 0; }
  void merge(const TransferFlags& o) {
    discarded_nodes += o.discarded_nodes;
    reduced_truncation_nodes += o.reduced_truncation_nodes;
    budget_exhausted = budget_exhausted || o.budget_exhausted;
    window_clamped = window_clamped || o.window_clamped;
    near_defective = near_defective || o.near_defective;
  }
  std::string describe() const {
    std::string s;
    auto add = [&s](const std::string& t) { s += (s.empty() ? "" : ";") + t; };
    if (budget_exhausted) add("budget");
    if (discarded_nodes) add("discarded=" + std::to_string(discarded_nodes));
    if (reduced_truncation_nodes) add("reducedN=" + std::to_string(reduced_truncation_nodes));
    if (window_clamped) add("window-clamped");
    if (near_defective) add("near-defective");
    return s;
  }
};

struct SpectrumSample {
  double omega;
  double H12;  // m^-2
};

struct TransferSpectrum {
  double shift = 0.0;
  std::vector<SpectrumSample> samples;
  double h = 0.0;        // W m^-2 K^-1
  double h_error = 0.0;  // quadrature error estimate of h
  int truncation = 0;
  std::size_t omega_nodes = 0;
  TransferFlags flags;
};

struct H12Result {
  Eigen::ArrayXd value;  // one entry per shift, m^-2
  Eigen::ArrayXd error;
  std::size_t nodes = 0;
  TransferFlags flags;
};

inline int effective_truncation(const TransferConfig& cfg, const GratingGeometry& g, double L) {
  int N = cfg.truncation;
  if (cfg.lateral_cutoff > 0.0) {
    const double need = (cfg.lateral_cutoff * g.period / (constants::pi * L) - 1.0) / 2.0;
    N = std::max(N, static_cast<int>(std::ceil(need)));
  }
  return N;
}

namespace detail {

inline bool symmetric_in_kx(const std::vector<double>& shifts, double d) {
  for (double s : shifts) {
    double r = std::fmod(s, d);
    if (r < 0) r += d;
    const double tol = 1e-9 * d;
    if (!(r < tol || std::abs(r - 0.5 * d) < tol || std::abs(r - d) < tol)) return false;
  }
  return true;
}

/// tr(D W1 D^+ W2) per shift for fixed (w, kx); the layer eigenproblem is
/// solved once at construction.
class KxSlice {
 public:
  KxSlice(const GratingGeometry& lower, const std::vector<double>& shifts, double L, cplx eps, double omega,
          double kx, int N, double max_condition)
      : lower_(lower), shifts_(shifts), L_(L), eps_(eps), omega_(omega), kx_(kx), N_(N),
        max_cond_(max_condition), solver_(lower, eps, omega, kx, N) {}

  Eigen::ArrayXd at(double ky, TransferFlags& flags) const {
    const double k02 = std::pow(omega_ / constants::c, 2);
    const double period = lower_.period;
    for (int n = -N_; n <= N_; ++n) {
      const double kxn = kx_ + 2.0 * constants::pi * n / period;
      if (kxn * kxn + ky * ky == k02) return at(std::nextafter(ky, INFINITY), flags);
    }
    const ReflectionOperator R = solver_.reflection(ky);
    if (R.near_defective) flags.near_defective = true;
    if (R.rcond < 1.0 / max_cond_ && N_ >= 2) {
      ++flags.reduced_truncation_nodes;
      if (!reduced_) reduced_ = std::make_unique<GratingSolver>(lower_, eps_, omega_, kx_, N_ - 2);
      return evaluate(reduced_->reflection(ky), flags);
    }
    return evaluate(R, flags);
  }

 private:
  Eigen::ArrayXd evaluate(const ReflectionOperator& R1, TransferFlags& flags) const {
    const ModeBasis& b = R1.basis;
    const int n = b.dim(), M = b.orders();
    const SigmaOperators sg = sigma_operators(b);
    VectorXc J = VectorXc::Ones(n);
    J.tail(M).setConstant(-1.0);
    const VectorXc E = (cplx(0.0, 1.0) * L_ * b.kz_full()).array().exp().matrix();
    const MatrixXc& R = R1.matrix;
    // Shift-independent pieces: W1, and S2^+ Sp1p S2 = r* (R^+ |E|^2 Sp1p R) r
    // because the shift phases have unit modulus.
    const MatrixXc W1 = w1_operator(R, sg);
    const VectorXc mid = E.cwiseAbs2().cast<cplx>().cwiseProduct(sg.plus1_prop);
    const MatrixXc core = (R.adjoint() * mid.asDiagonal()) * R;
    Eigen::ArrayXd out(static_cast<Eigen::Index>(shifts_.size()));
    for (std::size_t k = 0; k < shifts_.size(); ++k) {
      const VectorXc ph = shift_phases(b, shifts_[k]);
      const VectorXc left = E.cwiseProduct(J).cwiseProduct(ph);
      const VectorXc right = ph.conjugate().cwiseProduct(J).cwiseProduct(E);
      const MatrixXc S2 = left.asDiagonal() * R * right.asDiagonal();
      const MatrixXc Q = right.conjugate().asDiagonal() * core * right.asDiagonal();
      const MatrixXc S1S2 = (R * left.asDiagonal()) * R * right.asDiagonal();
      const TraceSample t = trace_core(S1S2, W1, w2_operator(S2, Q, sg));
      if (t.flagged) {
        ++flags.discarded_nodes;
        out[static_cast<Eigen::Index>(k)] = NAN;
      } else {
        out[static_cast<Eigen::Index>(k)] = t.value;
      }
    }
    return out;
  }

  GratingGeometry lower_;
  const std::vector<double>& shifts_;
  double L_;
  cplx eps_;
  double omega_, kx_;
  int N_;
  double max_cond_;
  GratingSolver solver_;
  mutable std::unique_ptr<GratingSolver> reduced_;
};

// Light cones of vacuum and, when Re eps > 1, of the substrate: the integrand
// has kinks where an order turns evanescent in either medium.
inline std::vector<double> light_cones(double omega, cplx eps) {
  const double k0 = omega / constants::c;
  std::vector<double> k{k0};
  if (eps.real() > 1.0) k.push_back(std::sqrt(eps.real()) * k0);
  return k;
}

inline std::vector<double> ky_breakpoints(double omega, cplx eps, double kx, double period, int N, double L,
                                          double ky_max) {
  std::vector<double> bp;
  for (double k : light_cones(omega, eps)) {
    for (int n = -N; n <= N; ++n) {
      const double kxn = kx + 2.0 * constants::pi * n / period;
      if (std::abs(kxn) < k) bp.push_back(std::sqrt(k * k - kxn * kxn));
    }
    bp.push_back(k);
  }
  for (double f : {0.3, 1.0, 3.0}) bp.push_back(f / L);
  std::vector<double> out;
  for (double x : bp)
    if (x > 0.0 && x < ky_max) out.push_back(x);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<double> kx_breakpoints(double omega, cplx eps, double period, int N, double kx_lo,
                                          double kx_hi) {
  const double G = 2.0 * constants::pi / period;
  std::vector<double> bp;
  for (double k : light_cones(omega, eps))
    for (int n = -N - 1; n <= N + 1; ++n)
      for (double s : {-1.0, 1.0}) {
        const double x = s * k - n * G;
        if (x > kx_lo && x < kx_hi) bp.push_back(x);
      }
  std::sort(bp.begin(), bp.end());
  return bp;
}

}  // namespace detail

/// H12(w) for every shift of the job, m^-2. `floor`, when given, holds one
/// absolute tolerance per shift for H12 itself.
inline H12Result integrate_H12(const TransferJob& job, const TransferConfig& cfg, double omega,
                               const std::vector<double>& floor = {}) {
  if (!(omega > 0.0)) throw std::invalid_argument("integrate_H12: omega must be positive");
  if (!(job.separation > 0.0)) throw std::invalid_argument("separation L must be positive");
  cfg.validate();
  const std::vector<double> shifts = job.effective_shifts();
  if (!floor.empty() && floor.size() != shifts.size())
    throw std::invalid_argument("integrate_H12: one floor per shift expected");
  const GratingGeometry lower(job.geometry.period, job.geometry.depth, job.geometry.fill, 0.0);
  const double d = lower.period, L = job.separation;
  const int N = effective_truncation(cfg, lower, L);
  const cplx eps = job.material(omega);
  const double k0 = omega / constants::c;
  const double ky_max = std::max(cfg.ky_light_factor * k0, cfg.evanescent_cutoff / L);
  const bool half_kx = detail::symmetric_in_kx(shifts, d);
  const double kx_lo = half_kx ? 0.0 : -constants::pi / d;
  const double kx_hi = constants::pi / d;
  // ky over R is twice the half line; kx over the BZ is twice [0, pi/d] when symmetric.
  const double factor = 2.0 * (half_kx ? 2.0 : 1.0) / (4.0 * constants::pi * constants::pi);

  H12Result res;
  const double inner = cfg.rel_tol * cfg.inner_tol_ratio;
  std::vector<double> kx_floor, ky_floor;
  for (double f : floor) {
    kx_floor.push_back(f / factor);
    ky_floor.push_back(cfg.inner_tol_ratio * f / factor / (kx_hi - kx_lo));
  }

  auto kx_integrand = [&](double kx) -> Eigen::ArrayXd {
    const detail::KxSlice slice(lower, shifts, L, eps, omega, kx, N, cfg.max_condition);
    TransferFlags local;
    QuadratureConfig qy;
    qy.rel_tol = inner;
    qy.component_abs_tol = ky_floor;
    qy.max_nodes = cfg.ky_budget;
    qy.rule = cfg.wavevector_rule;
    qy.breakpoints = detail::ky_breakpoints(omega, eps, kx, d, N, L, ky_max);
    auto r = integrate_adaptive_vec([&](double ky) { return slice.at(ky, local); }, 0.0, ky_max, qy);
    local.budget_exhausted = local.budget_exhausted || r.flagged;
    res.flags.merge(local);
    res.nodes += r.nodes;
    return r.value;
  };

  QuadratureConfig qx;
  qx.rel_tol = inner;
  qx.component_abs_tol = kx_floor;
  qx.max_nodes = cfg.kx_budget;
  qx.rule = cfg.wavevector_rule;
  qx.error_model = ErrorModel::Difference;  // the ky integrals are noisy at the inner tolerance
  qx.breakpoints = detail::kx_breakpoints(omega, eps, d, N, kx_lo, kx_hi);
  const auto rx = integrate_adaptive_vec(kx_integrand, kx_lo, kx_hi, qx);
  res.flags.budget_exhausted = res.flags.budget_exhausted || rx.flagged;

  res.value = factor * rx.value;
  res.error = factor * rx.error;
  return res;
}

/// Spectral weight (e_T1 - e_T2) / (T1 - T2) / 2pi, in J K^-1 (per rad/s).
inline double spectral_weight(const ThermalState& t, double omega) {
  return (thermal_energy(t.T1, omega) - thermal_energy(t.T2, omega)) / (t.T1 - t.T2) / (2.0 * constants::pi);
}

namespace detail {

// Flat-plate transmission kernel Int k dk / 2pi (both polarizations), used
// only to size absolute tolerances.
inline double flat_kernel(cplx eps, double omega, double L, double cutoff) {
  const double k0 = omega / constants::c;
  auto factor = [&](cplx kz, bool prop) {
    cplx k1 = std::sqrt((eps - 1.0) * (k0 * k0) + kz * kz);
    if (k1.imag() < 0.0) k1 = -k1;
    const cplx rs = (kz - k1) / (kz + k1), rp = (eps * kz - k1) / (eps * kz + k1);
    const cplx e = std::exp(2.0 * cplx(0.0, 1.0) * kz * L);
    double t = 0.0;
    for (cplx r : {rs, rp})
      t += prop ? std::pow(1.0 - std::norm(r), 2) / std::norm(1.0 - r * r * e)
                : 4.0 * r.imag() * r.imag() * e.real() / std::norm(1.0 - r * r * e);
    return t;
  };
  QuadratureConfig q;
  q.rel_tol = 1e-3;
  q.max_nodes = 2000;
  const double a = integrate_adaptive([&](double kz) { return kz * factor(kz, true); }, 0.0, k0, q).value;
  const double kmax = std::max(5.0 * k0, cutoff / L);
  q.breakpoints = {0.1 / L, 0.3 / L, 1.0 / L, 3.0 / L};
  const double b =
      integrate_adaptive([&](double x) { return x * factor(cplx(0.0, x), false); }, 0.0, kmax, q).value;
  return (a + b) / (2.0 * constants::pi);
}

// Rough h per shift from flat-plate coefficients at L, L + a, L + 2a weighted
// by the facing-area fractions of the two profiles.
inline std::vector<double> scale_estimate(const TransferJob& job, const TransferConfig& cfg, double lo, double hi,
                                          const std::vector<double>& resonances) {
  const auto& g = job.geometry;
  const double L = job.separation;
  auto f = [&](double w) -> Eigen::ArrayXd {
    Eigen::ArrayXd v(3);
    const cplx eps = job.material(w);
    for (int i = 0; i < 3; ++i) v[i] = flat_kernel(eps, w, L + i * g.depth, cfg.evanescent_cutoff);
    return spectral_weight(job.temperatures, w) * v;
  };
  QuadratureConfig q;
  q.rel_tol = 3e-2;
  q.max_nodes = 3000;
  for (double r : resonances) q.breakpoints.push_back(r);
  const Eigen::ArrayXd h = integrate_adaptive_vec(f, lo, hi, q).value;
  std::vector<double> out;
  const double w = g.ridge_width(), d = g.period;
  for (double s : job.effective_shifts()) {
    double r = std::fmod(std::abs(s), d);
    r = std::min(r, d - r);
    const double overlap = std::max(0.0, w - r) + std::max(0.0, w - (d - r));
    const double w1 = std::min(1.0, overlap / d);
    const double w2 = std::min(1.0 - w1, 2.0 * std::max(0.0, w - overlap) / d);
    out.push_back(w1 * h[0] + w2 * h[1] + (1.0 - w1 - w2) * h[2]);
  }
  return out;
}

}  // namespace detail

/// Frequency panel boundaries: half-decade seeds plus the material's surface
/// resonances.
inline std::vector<double> omega_breakpoints(const DielectricModel& m, double lo, double hi) {
  std::vector<double> bp;
  for (double w = lo * std::sqrt(10.0); w < hi; w *= std::sqrt(10.0)) bp.push_back(w);
  for (double r : m.resonances()) bp.push_back(r);
  std::vector<double> out;
  for (double x : bp)
    if (x > lo && x < hi) out.push_back(x);
  std::sort(out.begin(), out.end());
  return out;
}

/// h for every shift of the job (one TransferSpectrum per shift, same order).
inline std::vector<TransferSpectrum> heat_transfer_coefficients(const TransferJob& job, const TransferConfig& cfg) {
  cfg.validate();
  if (!(job.separation > 0.0)) throw std::invalid_argument("separation L must be positive");
  const std::vector<double> shifts = job.effective_shifts();
  double lo = cfg.omega_min, hi = cfg.omega_max;
  TransferFlags flags;
  if (job.material.tabulated()) {
    const auto [tlo, thi] = job.material.range();
    if (lo < tlo || hi > thi) {
      flags.window_clamped = true;
      lo = std::max(lo, tlo);
      hi = std::min(hi, thi);
    }
  }

  // Absolute H12 floors spread the error budget evenly in log(w), so the
  // inner integrals stop chasing relative accuracy where the thermal weight
  // makes a frequency irrelevant.
  std::vector<double> scale;
  if (cfg.absolute_floors) scale = detail::scale_estimate(job, cfg, lo, hi, job.material.resonances());
  const double span = std::log(hi / lo);

  std::mutex mu;
  std::map<double, Eigen::ArrayXd> spectrum;
  auto integrand = [&](double omega) -> Eigen::ArrayXd {
    const double weight = spectral_weight(job.temperatures, omega);
    std::vector<double> floor;
    if (weight > 0.0)
      for (double h : scale) floor.push_back(cfg.rel_tol * cfg.inner_tol_ratio * h / (weight * omega * span));
    const H12Result r = integrate_H12(job, cfg, omega, floor);
    {
      std::lock_guard lock(mu);
      flags.merge(r.flags);
      spectrum[omega] = r.value;
    }
    return weight * r.value;
  };

  QuadratureConfig qw;
  qw.rel_tol = cfg.rel_tol;
  qw.max_nodes = cfg.omega_budget;
  qw.rule = cfg.omega_rule;
  qw.error_model = ErrorModel::Difference;
  qw.workers = cfg.workers;
  qw.breakpoints = omega_breakpoints(job.material, lo, hi);
  const auto rw = integrate_adaptive_vec(integrand, lo, hi, qw);
  flags.budget_exhausted = flags.budget_exhausted || rw.flagged;

  const int N = effective_truncation(cfg, job.geometry, job.separation);
  std::vector<TransferSpectrum> out(shifts.size());
  for (std::size_t k = 0; k < shifts.size(); ++k) {
    auto& s = out[k];
    s.shift = shifts[k];
    s.h = rw.value[static_cast<Eigen::Index>(k)];
    s.h_error = rw.error[static_cast<Eigen::Index>(k)];
    s.truncation = N;
    s.omega_nodes = rw.nodes;
    s.flags = flags;
    s.samples.reserve(spectrum.size());
    for (const auto& [w, v] : spectrum) s.samples.push_back({w, v[static_cast<Eigen::Index>(k)]});
  }
  return out;
}

inline TransferSpectrum heat_transfer_coefficient(const TransferJob& job, const TransferConfig& cfg) {
  TransferJob single = job;
  single.shifts = {job.effective_shifts().front()};
  return heat_transfer_coefficients(single, cfg).front();
}

/// h(delta = 0) / h(delta = d/2).
inline double modulation_factor(double h_aligned, double h_half_period) {
  if (!(h_half_period > 0.0)) throw std::domain_error("modulation factor: h at delta = d/2 must be positive");
  if (h_aligned < 0.0) throw std::domain_error("modulation factor: negative h");
  return h_aligned / h_half_period;
}

inline double modulation_factor(const TransferSpectrum& aligned, const TransferSpectrum& half_period) {
  return modulation_factor(aligned.h, half_period.h);
}

/// Evaluates delta = 0 and delta = d/2 together and returns their ratio.
inline double modulation_factor(const TransferJob& job, const TransferConfig& cfg) {
  TransferJob both = job;
  both.shifts = {0.0, 0.5 * job.geometry.period};
  const auto r = heat_transfer_coefficients(both, cfg);
  return modulation_factor(r[0], r[1]);
}

}  // namespace nfrht
