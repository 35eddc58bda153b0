#pragma once

// Fourier-modal (RCWA) reflection operators of a one-dimensional lamellar
// grating under conical incidence.
//
// Conventions
//  * Time dependence exp(-i w t); fields carry exp(i (kx_n x + ky y)), with
//    kx_n = kx + 2 pi n / d for n = -N..N.
//  * The reflection operator acts on amplitudes ordered (polarization, order):
//    index = pol * (2N+1) + (n + N), pol 0 = s (TE), pol 1 = p (TM).
//  * Polarization vectors for a plane wave travelling up (+) or down (-):
//      s = z x k_perp / |k_perp|,   p_pm = (pm kz k_perp_hat - |k_perp| z) / k0.
//    With these, a perfect conductor at normal incidence gives r_s = -1,
//    r_p = +1, and a propagating wave of either polarization carries a
//    z-flux proportional to kz |amplitude|^2.
//  * The grating occupies z < a: a semi-infinite substrate for z < 0 and the
//    ridges of permittivity eps and width p d, centred at x = shift, for
//    0 < z < a. By default the operator is referenced to the ridge tops
//    (z = a), i.e. the plane of closest approach.

#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfrht/constants.hpp"
#include "nfrht/materials.hpp"

namespace nfrht {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;
using ArrayXc = Eigen::ArrayXcd;

struct GratingGeometry {
  double period;      // d [m]
  double depth;       // a [m]
  double fill;        // p = p'/d
  double shift = 0.0; // lateral displacement, stored reduced to [0, d)

  GratingGeometry(double d, double a, double p, double delta = 0.0) : period(d), depth(a), fill(p) {
    if (!(d > 0.0)) throw std::invalid_argument("grating: period must be positive");
    if (!(a >= 0.0)) throw std::invalid_argument("grating: depth must be non-negative");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("grating: filling factor must lie in (0, 1)");
    shift = std::fmod(delta, d);
    if (shift < 0.0) shift += d;
  }

  double ridge_width() const { return fill * period; }
};

/// Returns the principal root; for kz^2 on the negative real axis picks +i sqrt.
inline cplx branch_sqrt(cplx z) {
  if (z.imag() == 0.0 && z.real() < 0.0) return {0.0, std::sqrt(-z.real())};
  return std::sqrt(z);
}

/// Diffraction-order lattice at fixed (omega, kx, ky).
class ModeBasis {
 public:
  ModeBasis(double omega, double kx, double ky, double period, int N)
      : omega_(omega), kx_(kx), ky_(ky), period_(period), N_(N) {
    if (!(omega > 0.0)) throw std::invalid_argument("mode basis: omega must be positive");
    if (!(period > 0.0)) throw std::invalid_argument("mode basis: period must be positive");
    if (N < 0) throw std::invalid_argument("mode basis: truncation order must be >= 0");
    if (std::abs(kx) > constants::pi / period * (1.0 + 1e-12))
      throw std::invalid_argument("mode basis: kx outside the first Brillouin zone");
    const int M = orders();
    kxn_.resize(M);
    kz_.resize(M);
    const double k0 = omega / constants::c;
    for (int i = 0; i < M; ++i) {
      kxn_[i] = kx + 2.0 * constants::pi * (i - N) / period;
      kz_[i] = branch_sqrt(cplx(k0 * k0 - kxn_[i] * kxn_[i] - ky * ky, 0.0));
    }
  }

  double omega() const { return omega_; }
  double kx() const { return kx_; }
  double ky() const { return ky_; }
  double period() const { return period_; }
  double k0() const { return omega_ / constants::c; }
  int truncation() const { return N_; }
  int orders() const { return 2 * N_ + 1; }
  int dim() const { return 2 * orders(); }
  int index(int pol, int n) const { return pol * orders() + n + N_; }

  const Eigen::VectorXd& kx_orders() const { return kxn_; }
  /// Vacuum kz per order (length 2N+1).
  const VectorXc& kz() const { return kz_; }
  /// Vacuum kz per basis index (length 2(2N+1)).
  VectorXc kz_full() const {
    VectorXc v(dim());
    v << kz_, kz_;
    return v;
  }
  bool propagating(int order_index) const { return kz_[order_index].imag() == 0.0 && kz_[order_index].real() > 0.0; }

 private:
  double omega_, kx_, ky_, period_;
  int N_;
  Eigen::VectorXd kxn_;
  VectorXc kz_;
};

struct ReflectionOperator {
  MatrixXc matrix;
  ModeBasis basis;
  /// Smallest reciprocal condition estimate of the matching systems.
  double rcond = 1.0;
  /// Eigenvector bases close to defective.
  bool near_defective = false;
};

class RcwaError : public std::runtime_error {
 public:
  RcwaError(const std::string& what, double omega, double kx, double ky, int N)
      : std::runtime_error(describe(what, omega, kx, ky, N)), omega(omega), kx(kx), ky(ky), N(N) {}
  double omega, kx, ky;
  int N;

 private:
  static std::string describe(const std::string& what, double omega, double kx, double ky, int N) {
    std::ostringstream s;
    s << what << " (omega=" << omega << " rad/s, kx=" << kx << " 1/m, ky=" << ky << " 1/m, N=" << N << ")";
    return s.str();
  }
};

// ---------------------------------------------------------------------------

namespace detail {

struct VacuumFrame {
  // Per order: unit in-plane direction and s vector (sx, sy) = (-khat_y, khat_x).
  Eigen::ArrayXd khx, khy;
  ArrayXc c;  // kz / k0
};

inline VacuumFrame vacuum_frame(const ModeBasis& b) {
  const int M = b.orders();
  VacuumFrame f{Eigen::ArrayXd(M), Eigen::ArrayXd(M), ArrayXc(M)};
  for (int i = 0; i < M; ++i) {
    const double kxn = b.kx_orders()[i];
    const double kp = std::hypot(kxn, b.ky());
    if (kp > 0.0) {
      f.khx[i] = kxn / kp;
      f.khy[i] = b.ky() / kp;
    } else {
      f.khx[i] = 1.0;
      f.khy[i] = 0.0;
    }
    f.c[i] = b.kz()[i] / b.k0();
  }
  return f;
}

/// Fourier coefficients c_m, m = -2N..2N, of a two-valued profile with value
/// `inside` on a ridge of fraction p centred at xc and `outside` elsewhere.
inline std::vector<cplx> binary_profile_coefficients(cplx inside, cplx outside, double p, double xc, double d, int N) {
  std::vector<cplx> c(4 * N + 1);
  for (int m = -2 * N; m <= 2 * N; ++m) {
    cplx v;
    if (m == 0) {
      v = outside + (inside - outside) * p;
    } else {
      const double arg = constants::pi * m * p;
      v = (inside - outside) * (std::sin(arg) / (constants::pi * m)) *
          std::exp(cplx(0.0, -2.0 * constants::pi * m * xc / d));
    }
    c[m + 2 * N] = v;
  }
  return c;
}

inline MatrixXc toeplitz(const std::vector<cplx>& coeff, int N) {
  const int M = 2 * N + 1;
  MatrixXc T(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) T(i, j) = coeff[i - j + 2 * N];
  return T;
}

inline cplx upper_root(cplx z) {
  cplx q = std::sqrt(z);
  if (q.imag() < 0.0 || (q.imag() == 0.0 && q.real() < 0.0)) q = -q;
  return q;
}

}  // namespace detail

/// Flat interface vacuum / eps: diagonal Fresnel operator, referenced to the surface.
inline ReflectionOperator planar_reflection(cplx eps, const ModeBasis& basis) {
  const int M = basis.orders();
  MatrixXc R = MatrixXc::Zero(basis.dim(), basis.dim());
  const double k0 = basis.k0();
  for (int i = 0; i < M; ++i) {
    const cplx kz = basis.kz()[i];
    const double kp2 = basis.kx_orders()[i] * basis.kx_orders()[i] + basis.ky() * basis.ky();
    const cplx kz1 = branch_sqrt(eps * k0 * k0 - kp2);
    R(i, i) = (kz - kz1) / (kz + kz1);
    R(M + i, M + i) = (eps * kz - kz1) / (eps * kz + kz1);
  }
  return {std::move(R), basis};
}

/// Where the reflection operator's phase reference sits.
enum class ReferencePlane { RidgeTop, GrooveBottom };

/// Reflection operator and transmitted substrate fields for one incidence.
struct GratingSolution {
  ReflectionOperator reflection;
  /// Tangential fields [Ex; Ey] and [Gx; Gy] (G = eta0 H) just inside the
  /// substrate, as linear maps of the incident (s, p) amplitudes.
  MatrixXc substrate_E;
  MatrixXc substrate_G;
};

/// Grating reflection at fixed (omega, kx): the layer eigenproblem is solved at
/// construction and reused for every ky.
class GratingSolver {
 public:
  GratingSolver(const GratingGeometry& g, cplx eps, double omega, double kx, int N)
      : geom_(g), eps_(eps), omega_(omega), kx_(kx), N_(N), M_(2 * N + 1) {
    if (!(omega > 0.0)) throw std::invalid_argument("grating solver: omega must be positive");
    if (N < 0) throw std::invalid_argument("grating solver: truncation order must be >= 0");
    const double k0 = omega / constants::c;
    Kx_.resize(M_);
    for (int i = 0; i < M_; ++i) Kx_[i] = (kx + 2.0 * constants::pi * (i - N) / g.period) / k0;
    if (g.depth > 0.0) prepare_layer();
  }

  int truncation() const { return N_; }
  const GratingGeometry& geometry() const { return geom_; }

  ReflectionOperator reflection(double ky, ReferencePlane ref = ReferencePlane::RidgeTop) const {
    return solve(ky, ref, false).reflection;
  }

  GratingSolution solve(double ky, ReferencePlane ref = ReferencePlane::RidgeTop, bool with_fields = true) const {
    const ModeBasis basis(omega_, kx_, ky, geom_.period, N_);
    const int M = M_, n = 2 * M_;
    const double k0 = basis.k0();
    const double kyn = ky / k0;
    const auto vf = detail::vacuum_frame(basis);
    const Eigen::ArrayXd& Kx = Kx_;

    // Substrate modes (uniform eps), per order: TE-x column and TM-x column.
    ArrayXc qs(M), bs2(M);
    for (int i = 0; i < M; ++i) {
      bs2[i] = eps_ - Kx[i] * Kx[i];
      qs[i] = detail::upper_root(bs2[i] - kyn * kyn);
    }
    const ArrayXc Wxe = ArrayXc::Zero(M), Wye = ArrayXc::Ones(M);
    const ArrayXc Wxm = (1.0 - Kx.square() / eps_) / qs, Wym = -kyn * Kx / (eps_ * qs);
    const ArrayXc Vxe = -bs2 / qs, Vye = kyn * Kx / qs;
    const ArrayXc Vxm = ArrayXc::Zero(M), Vym = ArrayXc::Ones(M);

    // Rows of W0^{-1} (s, p) and V0^{-1} (s, p) act on (x, y) components.
    const ArrayXc sx = -vf.khy.cast<cplx>();
    const ArrayXc sy = vf.khx.cast<cplx>();
    const ArrayXc px = vf.khx.cast<cplx>() / vf.c, py = vf.khy.cast<cplx>() / vf.c;   // W0^{-1} p-row
    const ArrayXc gsx = -px, gsy = -py;                                            // V0^{-1} s-row
    // V0^{-1} p-row equals the s vector (sx, sy).

    MatrixXc Fh(n, n), Gh(n, n);  // W0^{-1} F and V0^{-1} G at the top plane
    MatrixXc trans_map;           // substrate amplitudes as a linear map of d
    double rcond = 1.0;

    if (geom_.depth == 0.0) {
      // Substrate directly below vacuum: F = Ws, G = -Vs (block diagonal).
      Fh.setZero();
      Gh.setZero();
      for (int i = 0; i < M; ++i) {
        Fh(i, i) = sx[i] * Wxe[i] + sy[i] * Wye[i];
        Fh(i, M + i) = sx[i] * Wxm[i] + sy[i] * Wym[i];
        Fh(M + i, i) = px[i] * Wxe[i] + py[i] * Wye[i];
        Fh(M + i, M + i) = px[i] * Wxm[i] + py[i] * Wym[i];
        Gh(i, i) = -(gsx[i] * Vxe[i] + gsy[i] * Vye[i]);
        Gh(i, M + i) = -(gsx[i] * Vxm[i] + gsy[i] * Vym[i]);
        Gh(M + i, i) = -(sx[i] * Vxe[i] + sy[i] * Vye[i]);
        Gh(M + i, M + i) = -(sx[i] * Vxm[i] + sy[i] * Vym[i]);
      }
      if (with_fields) trans_map = MatrixXc::Identity(n, n);
    } else {
      const auto& L = layer_;
      ArrayXc qe(M), qm(M);
      for (int i = 0; i < M; ++i) {
        qe[i] = detail::upper_root(L.beta2[i] - kyn * kyn);
        qm[i] = detail::upper_root(L.gamma2[i] - kyn * kyn);
      }

      // A = W^{-1} Ws and B = V^{-1} Vs, assembled block by block.
      MatrixXc A(n, n), B(n, n);
      // W^{-1} = [[ky Pe, Ui], [Qm Pm, 0]]
      A.topLeftCorner(M, M) = kyn * (L.Pe * Wxe.matrix().asDiagonal()) + L.Ui * Wye.matrix().asDiagonal();
      A.topRightCorner(M, M) = kyn * (L.Pe * Wxm.matrix().asDiagonal()) + L.Ui * Wym.matrix().asDiagonal();
      A.bottomLeftCorner(M, M) = qm.matrix().asDiagonal() * (L.Pm * Wxe.matrix().asDiagonal());
      A.bottomRightCorner(M, M) = qm.matrix().asDiagonal() * (L.Pm * Wxm.matrix().asDiagonal());
      // V^{-1} = [[-Qe Bi, 0], [ky Tm, Vti]]
      B.topLeftCorner(M, M) = -(qe.matrix().asDiagonal() * (L.Bi * Vxe.matrix().asDiagonal()));
      B.topRightCorner(M, M) = -(qe.matrix().asDiagonal() * (L.Bi * Vxm.matrix().asDiagonal()));
      B.bottomLeftCorner(M, M) = kyn * (L.Tm * Vxe.matrix().asDiagonal()) + L.Vti * Vye.matrix().asDiagonal();
      B.bottomRightCorner(M, M) = kyn * (L.Tm * Vxm.matrix().asDiagonal()) + L.Vti * Vym.matrix().asDiagonal();

      // R0 = (A - B)(A + B)^{-1}, from (A + B)^T R0^T = (A - B)^T.
      const Eigen::PartialPivLU<MatrixXc> lu_ab((A + B).transpose());
      rcond = std::min(rcond, lu_ab.rcond());
      MatrixXc Ra = lu_ab.solve((A - B).transpose()).transpose();
      // Phase across the layer: Ra = X R0 X.
      VectorXc X(n);
      const double za = k0 * geom_.depth;
      for (int i = 0; i < M; ++i) {
        X[i] = std::exp(cplx(0.0, 1.0) * qe[i] * za);
        X[M + i] = std::exp(cplx(0.0, 1.0) * qm[i] * za);
      }
      Ra = X.asDiagonal() * Ra * X.asDiagonal();

      // W0^{-1} W and V0^{-1} V; columns ordered (TE-x modes, TM-x modes).
      const ArrayXc iqe = qe.inverse(), iqm = qm.inverse();
      MatrixXc W0W(n, n), V0V(n, n);
      W0W.topLeftCorner(M, M) = sy.matrix().asDiagonal() * L.U;
      W0W.bottomLeftCorner(M, M) = py.matrix().asDiagonal() * L.U;
      W0W.topRightCorner(M, M) =
          (sx.matrix().asDiagonal() * L.CVt - kyn * (sy.matrix().asDiagonal() * L.DVt)) * iqm.matrix().asDiagonal();
      W0W.bottomRightCorner(M, M) =
          (px.matrix().asDiagonal() * L.CVt - kyn * (py.matrix().asDiagonal() * L.DVt)) * iqm.matrix().asDiagonal();
      // TE columns of V: Gx = -U beta^2 / qe, Gy = ky Kx U / qe. TM columns: Gx = 0, Gy = Vt.
      V0V.topLeftCorner(M, M) =
          (-(gsx.matrix().asDiagonal() * L.Ub2) + kyn * (gsy.matrix().asDiagonal() * L.KxU)) * iqe.matrix().asDiagonal();
      V0V.bottomLeftCorner(M, M) =
          (-(sx.matrix().asDiagonal() * L.Ub2) + kyn * (sy.matrix().asDiagonal() * L.KxU)) * iqe.matrix().asDiagonal();
      V0V.topRightCorner(M, M) = gsy.matrix().asDiagonal() * L.Vt;
      V0V.bottomRightCorner(M, M) = sy.matrix().asDiagonal() * L.Vt;

      Fh.noalias() = W0W * Ra;
      Fh += W0W;
      Gh.noalias() = V0V * Ra;
      Gh -= V0V;

      if (with_fields) {
        // t = 2 (A+B)^{-1} X d; X d is the down amplitude at the layer bottom.
        trans_map = 2.0 * (A + B).partialPivLu().solve(MatrixXc(X.asDiagonal()));
      }
    }

    // Top matching: d = 2 (Fh - Gh)^{-1} J c,  b = (Fh d) - J c, so
    // R = 2 Fh (Fh - Gh)^{-1} J - J; Fh (Fh - Gh)^{-1} = ((Fh - Gh)^{-T} Fh^T)^T.
    const Eigen::PartialPivLU<MatrixXc> lu_top((Fh - Gh).transpose());
    rcond = std::min(rcond, lu_top.rcond());
    VectorXc J = VectorXc::Ones(n);
    J.tail(M).setConstant(-1.0);
    MatrixXc R = 2.0 * lu_top.solve(Fh.transpose()).transpose() * J.asDiagonal();
    R.diagonal() -= J;

    if (!R.allFinite()) throw RcwaError("non-finite reflection operator", omega_, kx_, ky, N_);

    if (ref == ReferencePlane::GrooveBottom && geom_.depth > 0.0) {
      VectorXc ph(n);
      for (int i = 0; i < M; ++i) ph[i] = ph[M + i] = std::exp(cplx(0.0, 1.0) * basis.kz()[i] * geom_.depth);
      R = ph.asDiagonal() * R * ph.asDiagonal();
    }

    GratingSolution out{{std::move(R), basis, rcond, layer_.near_defective}, {}, {}};
    if (with_fields) {
      const MatrixXc d = 2.0 * (Fh - Gh).partialPivLu().solve(MatrixXc(J.asDiagonal()));
      const MatrixXc t = trans_map * d;
      // Substrate down-going fields: E = Ws t, G = -Vs t.
      out.substrate_E.resize(n, n);
      out.substrate_G.resize(n, n);
      out.substrate_E.topRows(M) = Wxe.matrix().asDiagonal() * t.topRows(M) + Wxm.matrix().asDiagonal() * t.bottomRows(M);
      out.substrate_E.bottomRows(M) =
          Wye.matrix().asDiagonal() * t.topRows(M) + Wym.matrix().asDiagonal() * t.bottomRows(M);
      out.substrate_G.topRows(M) =
          -(Vxe.matrix().asDiagonal() * t.topRows(M) + Vxm.matrix().asDiagonal() * t.bottomRows(M));
      out.substrate_G.bottomRows(M) =
          -(Vye.matrix().asDiagonal() * t.topRows(M) + Vym.matrix().asDiagonal() * t.bottomRows(M));
    }
    return out;
  }

 private:
  struct LayerData {
    ArrayXc beta2, gamma2;     // TE-x and TM-x eigenvalues (normalized)
    MatrixXc U, Vt;            // eigenvectors
    MatrixXc Ui, Vti, Pe, Pm, Bi, Tm;
    MatrixXc CVt, DVt, Ub2, KxU;
    bool near_defective = false;
  };

  void prepare_layer() {
    const int M = M_;
    const auto eps_c = detail::binary_profile_coefficients(eps_, 1.0, geom_.fill, geom_.shift, geom_.period, N_);
    const auto inv_c =
        detail::binary_profile_coefficients(1.0 / eps_, 1.0, geom_.fill, geom_.shift, geom_.period, N_);
    const MatrixXc E = detail::toeplitz(eps_c, N_);
    const MatrixXc Einv = E.partialPivLu().inverse();
    const MatrixXc Ax = detail::toeplitz(inv_c, N_).partialPivLu().inverse();
    const VectorXc kx = Kx_.cast<cplx>().matrix();

    const MatrixXc A_te = E - MatrixXc(kx.array().square().matrix().asDiagonal());
    const MatrixXc D = Einv * kx.asDiagonal();
    const MatrixXc C = MatrixXc::Identity(M, M) - kx.asDiagonal() * D;
    const MatrixXc A_tm = Ax * C;

    Eigen::ComplexEigenSolver<MatrixXc> es_te(A_te), es_tm(A_tm);
    if (es_te.info() != Eigen::Success || es_tm.info() != Eigen::Success)
      throw RcwaError("layer eigen-decomposition failed", omega_, kx_, 0.0, N_);

    auto& L = layer_;
    L.beta2 = es_te.eigenvalues().array();
    L.gamma2 = es_tm.eigenvalues().array();
    L.U = es_te.eigenvectors();
    L.Vt = es_tm.eigenvectors();

    const Eigen::PartialPivLU<MatrixXc> lu_u(L.U), lu_v(L.Vt), lu_c(C);
    L.near_defective = lu_u.rcond() < 1e-10 || lu_v.rcond() < 1e-10;
    L.Ui = lu_u.inverse();
    L.Vti = lu_v.inverse();
    const MatrixXc Ci = lu_c.inverse();
    L.Pe = L.Ui * D * Ci;
    L.CVt = C * L.Vt;
    L.Pm = L.CVt.partialPivLu().inverse();
    L.DVt = D * L.Vt;
    L.Bi = L.beta2.inverse().matrix().asDiagonal() * L.Ui;
    L.Ub2 = L.U * L.beta2.matrix().asDiagonal();
    L.KxU = kx.asDiagonal() * L.U;
    L.Tm = L.Vti * L.KxU * L.Bi;
  }

  GratingGeometry geom_;
  cplx eps_;
  double omega_, kx_;
  int N_, M_;
  Eigen::ArrayXd Kx_;
  LayerData layer_;
};

inline ReflectionOperator grating_reflection(const GratingGeometry& geometry, cplx eps, const ModeBasis& basis,
                                             ReferencePlane ref = ReferencePlane::RidgeTop) {
  if (std::abs(basis.period() - geometry.period) > 1e-12 * geometry.period)
    throw std::invalid_argument("grating_reflection: basis period differs from grating period");
  GratingSolver solver(geometry, eps, basis.omega(), basis.kx(), basis.truncation());
  return solver.reflection(basis.ky(), ref);
}

/// Phase factors exp(i 2 pi n delta / d) per basis index.
inline VectorXc shift_phases(const ModeBasis& basis, double delta) {
  const int M = basis.orders(), N = basis.truncation();
  VectorXc ph(basis.dim());
  for (int i = 0; i < M; ++i)
    ph[i] = ph[M + i] = std::exp(cplx(0.0, 2.0 * constants::pi * (i - N) * delta / basis.period()));
  return ph;
}

/// R' = Phi(delta) R Phi(delta)^dagger. Equals the operator of the same grating
/// translated by -delta along x.
inline ReflectionOperator apply_lateral_shift(const ReflectionOperator& R, double delta) {
  const VectorXc ph = shift_phases(R.basis, delta);
  ReflectionOperator out = R;
  out.matrix = ph.asDiagonal() * R.matrix * ph.conjugate().asDiagonal();
  return out;
}

}  // namespace nfrht
