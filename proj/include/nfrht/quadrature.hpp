#pragma once

// Adaptive Gauss-Kronrod (7/15 or 3/7) integration over a finite interval with
// deterministic parallel evaluation.
//
// Panels are refined in rounds. The set of panels split in a round depends only
// on the error estimates, never on thread timing, and panel sums are reduced in
// panel order, so the result is bit-identical for any worker count.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace nfrht {

/// Panel rule: Kronrod 15 over Gauss 7, or Kronrod 7 over Gauss 3 for smooth,
/// expensive integrands.
enum class QuadratureRule { GK15, GK7 };

/// Panel error estimate. Quadpack sharpens |K - G| by (200 |K - G| / resasc)^1.5,
/// which assumes exact integrand values; Difference keeps |K - G| and suits
/// integrands that are themselves quadrature results carrying noise.
enum class ErrorModel { Quadpack, Difference };

struct QuadratureConfig {
  double rel_tol = 1e-3;
  QuadratureRule rule = QuadratureRule::GK15;
  ErrorModel error_model = ErrorModel::Quadpack;
  double abs_tol = 0.0;
  /// Per-component absolute floors for vector integrands (overrides abs_tol
  /// when non-empty; size must match the integrand).
  std::vector<double> component_abs_tol;
  std::size_t max_nodes = 20000;
  /// Interior panel boundaries; points outside the interval are ignored.
  std::vector<double> breakpoints;
  /// Worker threads used to evaluate nodes; 0 selects NFRHT_WORKERS or 1.
  unsigned workers = 1;
  /// Maximum number of panels bisected per refinement round.
  std::size_t batch = 4;

  void validate() const {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("quadrature: rel_tol must be positive");
    if (abs_tol < 0.0) throw std::invalid_argument("quadrature: abs_tol must be non-negative");
    if (max_nodes < (rule == QuadratureRule::GK7 ? 7u : 15u))
      throw std::invalid_argument("quadrature: node budget below one panel");
    if (batch == 0) throw std::invalid_argument("quadrature: batch must be positive");
    for (double t : component_abs_tol)
      if (!(t >= 0.0)) throw std::invalid_argument("quadrature: component floors must be non-negative");
  }
};

/// Worker count after resolving 0 through the NFRHT_WORKERS environment variable.
inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NFRHT_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

template <class Value>
struct QuadResult {
  Value value;
  Value error;
  std::size_t nodes = 0;
  /// Nodes where the integrand returned a non-finite value and was discarded.
  std::size_t discarded = 0;
  /// Budget exhausted before the tolerance was met.
  bool flagged = false;
};

namespace detail {

// Gauss-Kronrod 15-point abscissae (descending) and weights; the Gauss 7-point
// rule uses every second abscissa.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Gauss-Kronrod 7-point rule over the Gauss 3-point rule.
inline constexpr std::array<double, 4> kXgk7 = {0.960491268708020283423507092629080, 0.774596669241483377035853079956480,
                                                0.434243749346802558002071502844628, 0.0};
inline constexpr std::array<double, 4> kWgk7 = {0.104656226026467265193823857192073, 0.268488089868333440728569280666710,
                                                0.401397414775962222905051818618432, 0.450916538658474142345110087045571};
inline constexpr std::array<double, 2> kWg3 = {0.555555555555555555555555555555556, 0.888888888888888888888888888888889};

struct RuleView {
  int half;  // abscissae per side; the panel has 2 * half + 1 nodes
  const double* x;
  const double* wk;
  const double* wg;  // Gauss weights for x[1], x[3], ..., centre last
};

inline RuleView rule_view(QuadratureRule r) {
  if (r == QuadratureRule::GK7) return {3, kXgk7.data(), kWgk7.data(), kWg3.data()};
  return {7, kXgk.data(), kWgk.data(), kWg.data()};
}

/// The nodes of a panel, ordered left to right.
inline void panel_nodes(const RuleView& r, double a, double b, std::vector<double>& out) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (int j = 0; j < r.half; ++j) out.push_back(c - h * r.x[j]);
  out.push_back(c);
  for (int j = r.half - 1; j >= 0; --j) out.push_back(c + h * r.x[j]);
}

inline double quadpack_error(double raw, double resasc, double resabs) {
  double err = raw;
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  return err;
}

/// Evaluates f at every x, with results stored by index (order independent).
template <class F, class Value>
void evaluate_nodes(const F& f, const std::vector<double>& xs, std::vector<Value>& out, unsigned workers) {
  out.resize(xs.size());
  if (workers <= 1 || xs.size() < 2) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
    return;
  }
  std::atomic<std::size_t> next{0};
  const unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(workers, xs.size()));
  std::vector<std::jthread> pool;
  pool.reserve(nthreads);
  for (unsigned t = 0; t < nthreads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < xs.size(); i = next.fetch_add(1)) out[i] = f(xs[i]);
    });
}

/// Pairwise sum over [lo, hi) so the reduction tree is fixed by panel index.
template <class Value, class Get>
Value tree_sum(std::size_t lo, std::size_t hi, const Get& get) {
  if (hi - lo == 1) return get(lo);
  const std::size_t mid = lo + (hi - lo) / 2;
  return tree_sum<Value>(lo, mid, get) + tree_sum<Value>(mid, hi, get);
}

}  // namespace detail

/// Integrates a vector-valued f: double -> Eigen::ArrayXd over [a, b].
/// Every component must meet err <= max(rel_tol |value|, abs_tol).
template <class F>
QuadResult<Eigen::ArrayXd> integrate_adaptive_vec(const F& f, double a, double b, const QuadratureConfig& cfg) {
  using Vec = Eigen::ArrayXd;
  cfg.validate();
  if (!(b > a)) throw std::invalid_argument("integrate_adaptive: need a < b");
  const unsigned workers = resolve_workers(cfg.workers);

  struct Panel {
    double a, b;
    Vec value, error;
    bool bad = false;
  };

  std::vector<double> cuts{a};
  {
    std::vector<double> bp;
    for (double x : cfg.breakpoints)
      if (x > a && x < b) bp.push_back(x);
    std::sort(bp.begin(), bp.end());
    for (double x : bp)
      if (x > cuts.back()) cuts.push_back(x);
    cuts.push_back(b);
  }

  QuadResult<Vec> res;
  Eigen::Index dim = -1;

  const detail::RuleView rule = detail::rule_view(cfg.rule);
  const int K = 2 * rule.half + 1;

  auto eval_panels = [&](const std::vector<std::pair<double, double>>& spans) {
    std::vector<double> xs;
    xs.reserve(K * spans.size());
    for (const auto& [pa, pb] : spans) detail::panel_nodes(rule, pa, pb, xs);
    std::vector<Vec> fx;
    detail::evaluate_nodes(f, xs, fx, workers);
    res.nodes += xs.size();
    if (dim < 0) dim = fx.front().size();

    std::vector<Panel> out;
    out.reserve(spans.size());
    std::vector<Vec> v(K);
    for (std::size_t p = 0; p < spans.size(); ++p) {
      const auto [pa, pb] = spans[p];
      const double h = 0.5 * (pb - pa);
      Panel panel{pa, pb, Vec::Zero(dim), Vec::Zero(dim)};
      for (int j = 0; j < K; ++j) {
        v[j] = fx[K * p + j];
        if (v[j].size() != dim) throw std::runtime_error("integrate_adaptive: integrand changed dimension");
        if (!v[j].allFinite()) {
          panel.bad = true;
          ++res.discarded;
          v[j] = v[j].isFinite().select(v[j], 0.0);
        }
      }
      const int c = rule.half;
      Vec kron = rule.wk[c] * v[c];
      Vec gauss = rule.wg[c / 2] * v[c];
      Vec resabs = rule.wk[c] * v[c].abs();
      for (int j = 0; j < c; ++j) {
        kron += rule.wk[j] * (v[j] + v[K - 1 - j]);
        resabs += rule.wk[j] * (v[j].abs() + v[K - 1 - j].abs());
        if (j % 2 == 1) gauss += rule.wg[j / 2] * (v[j] + v[K - 1 - j]);
      }
      const Vec mean = 0.5 * kron;
      Vec resasc = rule.wk[c] * (v[c] - mean).abs();
      for (int j = 0; j < c; ++j) resasc += rule.wk[j] * ((v[j] - mean).abs() + (v[K - 1 - j] - mean).abs());
      panel.value = kron * h;
      for (Eigen::Index c = 0; c < dim; ++c) {
        const double raw = std::abs((kron[c] - gauss[c]) * h);
        panel.error[c] = cfg.error_model == ErrorModel::Difference
                             ? raw
                             : detail::quadpack_error(raw, resasc[c] * std::abs(h), resabs[c] * std::abs(h));
      }
      out.push_back(std::move(panel));
    }
    return out;
  };

  std::vector<std::pair<double, double>> spans;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) spans.emplace_back(cuts[i], cuts[i + 1]);
  std::vector<Panel> panels = eval_panels(spans);

  auto totals = [&](Vec& value, Vec& error) {
    value = detail::tree_sum<Vec>(0, panels.size(), [&](std::size_t i) -> Vec { return panels[i].value; });
    error = detail::tree_sum<Vec>(0, panels.size(), [&](std::size_t i) -> Vec { return panels[i].error; });
  };

  Vec value, error;
  totals(value, error);
  const double min_width = 1e-13 * (b - a);
  Vec floor = Vec::Constant(dim, cfg.abs_tol);
  if (!cfg.component_abs_tol.empty()) {
    if (static_cast<Eigen::Index>(cfg.component_abs_tol.size()) != dim)
      throw std::invalid_argument("integrate_adaptive: component floors do not match integrand size");
    floor = Eigen::Map<const Vec>(cfg.component_abs_tol.data(), dim);
  }

  for (;;) {
    Vec target = (cfg.rel_tol * value.abs()).max(floor);
    const bool any_bad = std::any_of(panels.begin(), panels.end(), [&](const Panel& p) {
      return p.bad && (p.b - p.a) > min_width;
    });
    if (!any_bad && (error <= target).all()) break;

    target = target.max(std::numeric_limits<double>::min());
    std::vector<std::pair<double, std::size_t>> score;
    score.reserve(panels.size());
    for (std::size_t i = 0; i < panels.size(); ++i) {
      if (panels[i].b - panels[i].a <= min_width) continue;
      const double s = panels[i].bad ? INFINITY : (panels[i].error / target).maxCoeff();
      score.emplace_back(s, i);
    }
    if (score.empty()) {
      res.flagged = true;
      break;
    }
    std::sort(score.begin(), score.end(), [](const auto& l, const auto& r) {
      return l.first > r.first || (l.first == r.first && l.second < r.second);
    });
    std::vector<std::size_t> pick;
    const double worst = score.front().first;
    for (const auto& [s, i] : score) {
      if (pick.size() >= cfg.batch) break;
      if (!pick.empty() && !(s >= 0.25 * worst)) break;
      pick.push_back(i);
    }
    if (res.nodes + 2 * K * pick.size() > cfg.max_nodes) {
      res.flagged = true;
      break;
    }
    std::sort(pick.begin(), pick.end());
    std::vector<std::pair<double, double>> halves;
    for (std::size_t i : pick) {
      const double m = 0.5 * (panels[i].a + panels[i].b);
      halves.emplace_back(panels[i].a, m);
      halves.emplace_back(m, panels[i].b);
    }
    std::vector<Panel> fresh = eval_panels(halves);

    std::vector<Panel> merged;
    merged.reserve(panels.size() + pick.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      if (k < pick.size() && pick[k] == i) {
        merged.push_back(std::move(fresh[2 * k]));
        merged.push_back(std::move(fresh[2 * k + 1]));
        ++k;
      } else {
        merged.push_back(std::move(panels[i]));
      }
    }
    panels = std::move(merged);
    totals(value, error);
  }

  res.value = value;
  res.error = error;
  return res;
}

/// Scalar convenience wrapper around integrate_adaptive_vec.
template <class F>
QuadResult<double> integrate_adaptive(const F& f, double a, double b, const QuadratureConfig& cfg) {
  auto wrapped = [&f](double x) {
    Eigen::ArrayXd v(1);
    v[0] = f(x);
    return v;
  };
  const auto r = integrate_adaptive_vec(wrapped, a, b, cfg);
  return {r.value[0], r.error[0], r.nodes, r.discarded, r.flagged};
}

}  // namespace nfrht
