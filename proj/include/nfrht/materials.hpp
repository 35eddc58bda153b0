#pragma once

// Dielectric functions and thermal weights.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfrht/constants.hpp"

#ifndef NFRHT_DEFAULT_DATA_DIR
#define NFRHT_DEFAULT_DATA_DIR "data"
#endif

namespace nfrht {

using cplx = std::complex<double>;

/// One Lorentz term  wp^2 / (w0^2 - w^2 - i g w).
struct Oscillator {
  double plasma;     // rad/s
  double resonance;  // rad/s
  double damping;    // rad/s
};

struct OscillatorSet {
  double eps_inf = 1.0;
  std::vector<Oscillator> terms;
};

/// Samples (omega, n, k), ascending and strictly increasing in omega.
struct NkTable {
  std::vector<double> omega;
  std::vector<double> n;
  std::vector<double> k;
};

class DielectricModel {
 public:
  using Data = std::variant<OscillatorSet, NkTable>;

  DielectricModel(OscillatorSet set, std::string name = "oscillators")
      : data_(std::move(set)), name_(std::move(name)) {
    const auto& s = std::get<OscillatorSet>(data_);
    if (!(s.eps_inf > 0.0)) throw std::invalid_argument("eps_inf must be positive");
    for (const auto& t : s.terms)
      if (!(t.resonance >= 0.0 && t.damping >= 0.0 && std::isfinite(t.plasma)))
        throw std::invalid_argument("oscillator parameters must be finite and non-negative");
    find_resonances();
  }

  DielectricModel(NkTable table, std::string name = "table")
      : data_(std::move(table)), name_(std::move(name)) {
    const auto& t = std::get<NkTable>(data_);
    if (t.omega.size() < 2 || t.n.size() != t.omega.size() || t.k.size() != t.omega.size())
      throw std::invalid_argument("n,k table needs at least two consistent samples");
    for (std::size_t i = 0; i < t.omega.size(); ++i) {
      if (!(t.omega[i] > 0.0)) throw std::invalid_argument("n,k table: omega must be positive");
      if (i > 0 && !(t.omega[i] > t.omega[i - 1]))
        throw std::invalid_argument("n,k table: samples must be strictly increasing in omega");
      if (t.n[i] < 0.0 || t.k[i] < 0.0) throw std::invalid_argument("n,k table: n and k must be >= 0");
    }
    find_resonances();
  }

  /// Complex relative permittivity at angular frequency omega [rad/s].
  cplx operator()(double omega) const {
    if (!(omega > 0.0)) throw std::domain_error("permittivity: omega must be positive");
    if (const auto* s = std::get_if<OscillatorSet>(&data_)) {
      cplx eps = s->eps_inf;
      for (const auto& t : s->terms)
        eps += t.plasma * t.plasma / cplx(t.resonance * t.resonance - omega * omega, -t.damping * omega);
      return eps;
    }
    const auto& t = std::get<NkTable>(data_);
    if (omega < t.omega.front() || omega > t.omega.back()) {
      std::ostringstream msg;
      msg << "permittivity: omega " << omega << " rad/s outside table range [" << t.omega.front()
          << ", " << t.omega.back() << "] rad/s";
      throw std::out_of_range(msg.str());
    }
    auto hi = std::upper_bound(t.omega.begin(), t.omega.end(), omega);
    if (hi == t.omega.end()) --hi;
    const auto i = static_cast<std::size_t>(hi - t.omega.begin());
    const double x0 = std::log(t.omega[i - 1]);
    const double x1 = std::log(t.omega[i]);
    const double f = (std::log(omega) - x0) / (x1 - x0);
    const double n = t.n[i - 1] + f * (t.n[i] - t.n[i - 1]);
    const double k = t.k[i - 1] + f * (t.k[i] - t.k[i - 1]);
    const cplx m(n, k);
    return m * m;
  }

  bool tabulated() const { return std::holds_alternative<NkTable>(data_); }
  const Data& data() const { return data_; }
  const std::string& name() const { return name_; }

  /// Valid frequency interval; oscillator models are unbounded.
  std::pair<double, double> range() const {
    if (const auto* t = std::get_if<NkTable>(&data_)) return {t->omega.front(), t->omega.back()};
    return {0.0, INFINITY};
  }

  /// Frequencies where Re eps crosses -1 (surface-polariton condition), ascending.
  const std::vector<double>& resonances() const { return resonances_; }

 private:
  void find_resonances() {
    auto [lo, hi] = range();
    lo = std::max(lo, 1e12);
    hi = std::min(hi, 1e16);
    constexpr int kSteps = 4000;
    const double r = std::pow(hi / lo, 1.0 / kSteps);
    double w0 = lo;
    double f0 = (*this)(w0).real() + 1.0;
    for (int i = 1; i <= kSteps; ++i) {
      const double w1 = (i == kSteps) ? hi : w0 * r;
      const double f1 = (*this)(w1).real() + 1.0;
      if ((f0 < 0.0) != (f1 < 0.0)) {
        double a = w0, b = w1, fa = f0;
        for (int it = 0; it < 60; ++it) {
          const double m = 0.5 * (a + b);
          const double fm = (*this)(m).real() + 1.0;
          if ((fa < 0.0) == (fm < 0.0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
          }
        }
        resonances_.push_back(0.5 * (a + b));
      }
      w0 = w1;
      f0 = f1;
    }
  }

  Data data_;
  std::string name_;
  std::vector<double> resonances_;
};

inline cplx permittivity(const DielectricModel& model, double omega) { return model(omega); }

/// Temperatures of the two bodies [K].
struct ThermalState {
  double T1;
  double T2;

  ThermalState(double t1, double t2) : T1(t1), T2(t2) {
    if (!(T1 > 0.0 && T2 > 0.0)) throw std::invalid_argument("temperatures must be positive");
    if (T1 == T2) throw std::invalid_argument("T1 and T2 must differ");
  }
};

/// Mean energy of a field mode, hbar w / (exp(hbar w / k_B T) - 1).
inline double thermal_energy(double T, double omega) {
  if (!(T > 0.0) || !(omega > 0.0)) throw std::domain_error("thermal_energy: T and omega must be positive");
  using namespace constants;
  const double kT = k_B * T;
  const double x = hbar * omega / kT;
  if (x > 700.0) return 0.0;
  if (x < 1e-6) return kT * (1.0 - 0.5 * x);
  return hbar * omega / std::expm1(x);
}

// ---------------------------------------------------------------------------
// Loaders

/// Reads `wavelength_um n k` rows ('#' comments) and converts to ascending omega.
inline NkTable load_nk_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open n,k table: " + path.string());
  std::vector<double> lam, n, k;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    double l, nn, kk;
    if (!(row >> l >> nn >> kk))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 'wavelength_um n k'");
    if (!lam.empty() && !(l > lam.back()))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": wavelengths must be strictly increasing");
    lam.push_back(l);
    n.push_back(nn);
    k.push_back(kk);
  }
  NkTable t;
  for (std::size_t i = lam.size(); i-- > 0;) {
    t.omega.push_back(2.0 * constants::pi * constants::c / (lam[i] * 1e-6));
    t.n.push_back(n[i]);
    t.k.push_back(k[i]);
  }
  return t;
}

inline OscillatorSet load_oscillators(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open oscillator file: " + path.string());
  const auto doc = nlohmann::json::parse(in);
  OscillatorSet set;
  set.eps_inf = doc.at("eps_inf").get<double>();
  for (const auto& o : doc.at("oscillators"))
    set.terms.push_back({o.at("plasma_rad_s").get<double>(), o.at("resonance_rad_s").get<double>(),
                         o.at("damping_rad_s").get<double>()});
  return set;
}

inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("NFRHT_DATA_DIR")) return env;
  return NFRHT_DEFAULT_DATA_DIR;
}

/// Resolves "builtin:SiO2-oscillator", "builtin:SiO2-table" or a path to an n,k table.
inline DielectricModel load_material(const std::string& ref) {
  if (ref == "builtin:SiO2-oscillator")
    return DielectricModel(load_oscillators(data_dir() / "sio2_oscillators.json"), "SiO2-oscillator");
  if (ref == "builtin:SiO2-table") return DielectricModel(load_nk_table(data_dir() / "sio2_nk.txt"), "SiO2-table");
  if (ref.rfind("builtin:", 0) == 0) throw std::invalid_argument("unknown builtin material: " + ref);
  return DielectricModel(load_nk_table(ref), ref);
}

}  // namespace nfrht
