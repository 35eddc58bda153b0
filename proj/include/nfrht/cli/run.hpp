#pragma once

// Executes a validated JobConfig: expands sweep points, computes each one,
// writes results.csv and manifest.json.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "nfrht/cli/config.hpp"
#include "nfrht/constants.hpp"
#include "nfrht/planar_oracle.hpp"
#include "nfrht/proximity.hpp"
#include "nfrht/transfer.hpp"

#ifndef NFRHT_VERSION
#define NFRHT_VERSION "0.0.0"
#endif

namespace nfrht::cli {

inline constexpr const char* kToolVersion = NFRHT_VERSION;

/// 9 significant digits, scientific notation.
inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8e", x);
  return buf;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// One CSV row as ordered (column, value) pairs.
struct Row {
  std::vector<std::pair<std::string, std::string>> cells;
  bool flagged = false;
  void add(const std::string& name, const std::string& value) { cells.emplace_back(name, value); }
  void add(const std::string& name, double value) { cells.emplace_back(name, sci(value)); }
};

/// A single point: the config with any sweep value applied.
inline std::vector<JobConfig> expand_points(const JobConfig& cfg) {
  if (!cfg.sweep) return {cfg};
  std::vector<JobConfig> out;
  for (double v : cfg.sweep->values) {
    JobConfig p = cfg;
    p.sweep.reset();
    const std::string& axis = cfg.sweep->axis;
    if (axis == "L") p.separation = v * 1e-9;
    else if (axis == "d") p.period = v * 1e-9;
    else if (axis == "p") p.fill = v;
    else if (axis == "delta") p.shift = v * 1e-9;
    out.push_back(p);
  }
  return out;
}

/// Shares flat-plate values between points of one run.
class PlanarCache {
 public:
  PlanarCache(const DielectricModel& m, ThermalState t, PlanarConfig c) : material_(m), temps_(t), cfg_(c) {}

  PlanarTransferResult at(double L) {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(L); it != cache_.end()) return it->second;
    }
    const auto r = planar_h0(material_, temps_, L, cfg_);
    std::lock_guard lock(mu_);
    cache_.emplace(L, r);
    return r;
  }

 private:
  const DielectricModel& material_;
  ThermalState temps_;
  PlanarConfig cfg_;
  std::mutex mu_;
  std::map<double, PlanarTransferResult> cache_;
};

namespace detail {

inline double nm(double meters) { return meters * 1e9; }

inline void echo_common(Row& r, const JobConfig& p, bool geometry, bool shift) {
  r.add("material", p.material);
  if (geometry) {
    r.add("d_nm", nm(p.period));
    r.add("a_nm", nm(p.depth));
    r.add("p", p.fill);
    if (shift) r.add("delta_nm", nm(p.shift));
  }
  r.add("L_nm", nm(p.separation));
  r.add("T1_K", p.T1);
  r.add("T2_K", p.T2);
}

inline void echo_numerics(Row& r, const JobConfig& p) {
  const TransferConfig tc = p.transfer_config();
  r.add("N", std::to_string(effective_truncation(tc, GratingGeometry(p.period, p.depth, p.fill), p.separation)));
  r.add("rel_tol", p.numerics.rel_tol);
}

inline double pa_from_cache(PlanarCache& cache, const GratingGeometry& g, double L) {
  return pa_coefficient(g, L, [&](double x) { return cache.at(x).h0; });
}

}  // namespace detail

/// Computes one point; `material` must match p.material.
inline Row compute_point(const JobConfig& p, const DielectricModel& material, PlanarCache& cache) {
  Row r;
  const ThermalState temps(p.T1, p.T2);
  switch (p.quantity) {
    case Quantity::Plane: {
      detail::echo_common(r, p, false, false);
      r.add("planar_rel_tol", p.numerics.planar_rel_tol);
      const auto res = cache.at(p.separation);
      r.add("h0_W_per_m2K", res.h0);
      r.add("h0_err_W_per_m2K", res.error);
      r.add("h0_s_prop_W_per_m2K", res.s_propagating);
      r.add("h0_s_evan_W_per_m2K", res.s_evanescent);
      r.add("h0_p_prop_W_per_m2K", res.p_propagating);
      r.add("h0_p_evan_W_per_m2K", res.p_evanescent);
      r.add("flags", res.window_clamped ? "window-clamped" : "");
      break;
    }
    case Quantity::Pa: {
      detail::echo_common(r, p, true, true);
      r.add("planar_rel_tol", p.numerics.planar_rel_tol);
      const GratingGeometry g(p.period, p.depth, p.fill, p.shift);
      const ProximityWeights w = pa_weights(g, g.shift);
      r.add("hPA_W_per_m2K", detail::pa_from_cache(cache, g, p.separation));
      r.add("h0_L_W_per_m2K", cache.at(p.separation).h0);
      r.add("h0_L_plus_a_W_per_m2K", cache.at(p.separation + p.depth).h0);
      r.add("h0_L_plus_2a_W_per_m2K", cache.at(p.separation + 2.0 * p.depth).h0);
      r.add("saturated", w.saturated ? "1" : "0");
      break;
    }
    case Quantity::Grating: {
      detail::echo_common(r, p, true, true);
      detail::echo_numerics(r, p);
      const GratingGeometry g(p.period, p.depth, p.fill, p.shift);
      const TransferJob job{g, material, p.separation, temps, {}};
      const TransferSpectrum s = heat_transfer_coefficient(job, p.transfer_config());
      r.add("h_W_per_m2K", s.h);
      r.add("h_err_W_per_m2K", s.h_error);
      r.add("omega_nodes", std::to_string(s.omega_nodes));
      if (p.with_pa) {
        const double pa = detail::pa_from_cache(cache, g, p.separation);
        r.add("hPA_W_per_m2K", pa);
        r.add("pa_rel_gap", std::abs(pa - s.h) / s.h);
      }
      r.add("flags", s.flags.describe());
      r.flagged = s.flags.any();
      break;
    }
    case Quantity::Modulation: {
      detail::echo_common(r, p, true, false);
      detail::echo_numerics(r, p);
      const GratingGeometry g(p.period, p.depth, p.fill);
      const TransferJob job{g, material, p.separation, temps, {0.0, 0.5 * p.period}};
      const auto s = heat_transfer_coefficients(job, p.transfer_config());
      const double m = modulation_factor(s[0], s[1]);
      r.add("h_aligned_W_per_m2K", s[0].h);
      r.add("h_aligned_err_W_per_m2K", s[0].h_error);
      r.add("h_half_W_per_m2K", s[1].h);
      r.add("h_half_err_W_per_m2K", s[1].h_error);
      r.add("modulation", m);
      r.add("modulation_err", m * (s[0].h_error / s[0].h + s[1].h_error / s[1].h));
      r.add("omega_nodes", std::to_string(s[0].omega_nodes));
      if (p.with_pa) {
        GratingGeometry half = g;
        half.shift = 0.5 * p.period;
        const double pa0 = detail::pa_from_cache(cache, g, p.separation);
        const double pah = detail::pa_from_cache(cache, half, p.separation);
        r.add("hPA_aligned_W_per_m2K", pa0);
        r.add("hPA_half_W_per_m2K", pah);
        r.add("pa_gap_aligned", std::abs(pa0 - s[0].h) / s[0].h);
        r.add("pa_gap_half", std::abs(pah - s[1].h) / s[1].h);
        r.add("modulation_PA", pa0 / pah);
      }
      r.add("flags", s[0].flags.describe());
      r.flagged = s[0].flags.any();
      break;
    }
  }
  return r;
}

inline std::string to_csv(const std::vector<Row>& rows) {
  std::string out;
  if (rows.empty()) return out;
  for (std::size_t i = 0; i < rows[0].cells.size(); ++i) out += (i ? "," : "") + rows[0].cells[i].first;
  out += '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.cells.size(); ++i) out += (i ? "," : "") + r.cells[i].second;
    out += '\n';
  }
  return out;
}

struct RunOptions {
  std::filesystem::path out_dir = ".";
  bool parallel_points = false;
  std::string preset;  // recorded in the manifest only
  std::function<void(std::size_t, std::size_t, const Row&)> progress;
};

struct RunResult {
  std::vector<Row> rows;
  std::size_t flagged = 0;
  double wall_seconds = 0.0;
};

/// Computes every point, then writes results.csv and manifest.json.
inline RunResult run_job(const json& resolved, const JobConfig& cfg, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const DielectricModel material = load_material(cfg.material);
  PlanarCache cache(material, ThermalState(cfg.T1, cfg.T2), cfg.planar_config());
  const auto points = expand_points(cfg);

  RunResult res;
  res.rows.resize(points.size());
  std::mutex mu;
  std::size_t done = 0;
  auto one = [&](std::size_t i) {
    Row r = compute_point(points[i], material, cache);
    std::lock_guard lock(mu);
    res.rows[i] = std::move(r);
    ++done;
    if (opt.progress) opt.progress(done, points.size(), res.rows[i]);
  };

  if (opt.parallel_points && points.size() > 1) {
    const unsigned n = std::min<unsigned>(resolve_workers(cfg.numerics.workers), points.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
          try {
            one(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::size_t i = 0; i < points.size(); ++i) one(i);
  }
  for (const auto& r : res.rows) res.flagged += r.flagged ? 1 : 0;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::filesystem::create_directories(opt.out_dir);
  {
    std::ofstream csv(opt.out_dir / "results.csv", std::ios::binary);
    csv << to_csv(res.rows);
    if (!csv) throw std::runtime_error("cannot write " + (opt.out_dir / "results.csv").string());
  }
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json manifest = {{"tool", "nfrht"},
                   {"tool_version", kToolVersion},
                   {"config_sha256", sha256_hex(resolved.dump())},
                   {"constants_version", constants::kVersion},
                   {"material", material.name()},
                   {"points", points.size()},
                   {"flagged_points", res.flagged},
                   {"wall_time_s", res.wall_seconds},
                   {"timestamp_utc", stamp},
                   {"config", resolved}};
  if (!opt.preset.empty()) manifest["preset"] = opt.preset;
  std::ofstream mf(opt.out_dir / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << '\n';
  if (!mf) throw std::runtime_error("cannot write " + (opt.out_dir / "manifest.json").string());
  return res;
}

}  // namespace nfrht::cli
