#pragma once

// Proximity (Derjaguin) estimate of the grating-grating coefficient.
//
// Per period, facing surfaces sit at three distances: ridge top to ridge top
// (L), ridge top to groove bottom or groove bottom to ridge top (L + a), and
// groove bottom to groove bottom (L + 2a). See docs/proximity.md.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "nfrht/rcwa.hpp"

namespace nfrht {

/// Weights of h0(L), h0(L + a), h0(L + 2a).
struct ProximityWeights {
  double at_L = 0.0;
  double at_L_plus_a = 0.0;
  double at_L_plus_2a = 0.0;
  /// True when delta > p' and the saturated form applies.
  bool saturated = false;
};

/// delta mapped to [0, d/2] by periodicity and mirror symmetry.
inline double reduce_shift(double delta, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("period must be positive");
  double r = std::fmod(delta, period);
  if (r < 0.0) r += period;
  return std::min(r, period - r);
}

inline ProximityWeights pa_weights(const GratingGeometry& g, double delta) {
  if (!(g.fill < 0.5))
    throw std::domain_error("proximity approximation supports filling factors below 0.5 only");
  const double d = g.period, w = g.ridge_width();
  const double s = reduce_shift(delta, d);
  ProximityWeights out;
  if (s <= w) {
    out.at_L = (w - s) / d;
    out.at_L_plus_a = 2.0 * s / d;
    out.at_L_plus_2a = 1.0 - (w + s) / d;
  } else {
    out.saturated = true;
    out.at_L_plus_a = 2.0 * w / d;
    out.at_L_plus_2a = 1.0 - 2.0 * w / d;
  }
  return out;
}

/// h^PA from the flat-plate coefficient at the three facing distances.
inline double pa_coefficient(const GratingGeometry& g, double h0_L, double h0_L_a, double h0_L_2a) {
  const ProximityWeights w = pa_weights(g, g.shift);
  return w.at_L * h0_L + w.at_L_plus_a * h0_L_a + w.at_L_plus_2a * h0_L_2a;
}

/// Same, with the flat-plate coefficient supplied as a function of distance.
inline double pa_coefficient(const GratingGeometry& g, double L, const std::function<double(double)>& h0) {
  if (!(L > 0.0)) throw std::invalid_argument("separation L must be positive");
  const ProximityWeights w = pa_weights(g, g.shift);
  double h = w.at_L_plus_2a * h0(L + 2.0 * g.depth);
  if (w.at_L != 0.0) h += w.at_L * h0(L);
  if (w.at_L_plus_a != 0.0) h += w.at_L_plus_a * h0(L + g.depth);
  return h;
}

}  // namespace nfrht
