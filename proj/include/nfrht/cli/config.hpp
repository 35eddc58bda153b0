#pragma once

// Job configuration: one JSON document, strictly validated.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfrht/materials.hpp"
#include "nfrht/planar_oracle.hpp"
#include "nfrht/transfer.hpp"

namespace nfrht::cli {

using nlohmann::json;

/// Carries every problem found, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& p : v) s += (s.empty() ? "" : "\n") + p;
    return s;
  }
  std::vector<std::string> problems_;
};

enum class Quantity { Plane, Grating, Pa, Modulation };

inline const char* to_string(Quantity q) {
  switch (q) {
    case Quantity::Plane: return "plane";
    case Quantity::Grating: return "grating";
    case Quantity::Pa: return "pa";
    case Quantity::Modulation: return "modulation";
  }
  return "?";
}

struct Numerics {
  int truncation = 15;
  double lateral_cutoff = 0.0;
  double evanescent_cutoff = 40.0;
  double ky_light_factor = 5.0;
  double omega_min = 1e13;
  double omega_max = 1e15;
  double rel_tol = 1e-3;
  double inner_tol_ratio = 0.3;
  double planar_rel_tol = 1e-6;
  unsigned workers = 0;
  std::size_t omega_budget = 3000;
  std::size_t kx_budget = 1500;
  std::size_t ky_budget = 3000;
};

struct SweepSpec {
  std::string axis;  // L, d, p, delta
  std::vector<double> values;
};

struct JobConfig {
  std::string mode;  // plane | grating | pa | sweep | modulation
  Quantity quantity = Quantity::Plane;
  std::string material = "builtin:SiO2-table";
  double period = 0.0, depth = 0.0, fill = 0.0, shift = 0.0;  // SI
  bool has_geometry = false;
  double separation = 0.0;
  double T1 = 0.0, T2 = 0.0;
  bool with_pa = false;
  Numerics numerics;
  std::optional<SweepSpec> sweep;

  TransferConfig transfer_config() const {
    TransferConfig c;
    c.truncation = numerics.truncation;
    c.lateral_cutoff = numerics.lateral_cutoff;
    c.evanescent_cutoff = numerics.evanescent_cutoff;
    c.ky_light_factor = numerics.ky_light_factor;
    c.omega_min = numerics.omega_min;
    c.omega_max = numerics.omega_max;
    c.rel_tol = numerics.rel_tol;
    c.inner_tol_ratio = numerics.inner_tol_ratio;
    c.workers = numerics.workers;
    c.omega_budget = numerics.omega_budget;
    c.kx_budget = numerics.kx_budget;
    c.ky_budget = numerics.ky_budget;
    return c;
  }

  PlanarConfig planar_config() const {
    PlanarConfig c;
    c.omega_min = numerics.omega_min;
    c.omega_max = numerics.omega_max;
    c.rel_tol = numerics.planar_rel_tol;
    c.evanescent_cutoff = numerics.evanescent_cutoff;
    c.light_factor = numerics.ky_light_factor;
    return c;
  }
};

namespace detail {

class Checker {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& where, const std::string& what) { problems.push_back(where + ": " + what); }

  // Rejects keys outside `allowed`.
  void keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail(where.empty() ? k : where + "." + k, "unknown key");
    }
  }

  std::optional<double> number(const json& obj, const char* key, const std::string& where, bool required) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!obj.contains(key)) {
      if (required) fail(path, "required");
      return std::nullopt;
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail(path, "must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<long long> integer(const json& obj, const char* key, const std::string& where) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(path, "expected an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<std::string> string(const json& obj, const char* key, const std::string& where, bool required) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!obj.contains(key)) {
      if (required) fail(path, "required");
      return std::nullopt;
    }
    if (!obj.at(key).is_string()) {
      fail(path, "expected a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

  const json* object(const json& obj, const char* key, const std::string& where, bool required) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!obj.contains(key)) {
      if (required) fail(path, "required");
      return nullptr;
    }
    if (!obj.at(key).is_object()) {
      fail(path, "expected an object");
      return nullptr;
    }
    return &obj.at(key);
  }
};

}  // namespace detail

/// Validates a parsed document; throws ConfigError listing every violation.
inline JobConfig config_from_json(const json& doc) {
  detail::Checker c;
  JobConfig cfg;
  if (!doc.is_object()) throw ConfigError({"<root>: expected a JSON object"});

  c.keys(doc, "", {"mode", "compute", "material", "geometry", "separation_nm", "temperatures_K", "with_pa",
                   "numerics", "sweep", "description"});
  c.string(doc, "description", "", false);

  const auto mode = c.string(doc, "mode", "", true);
  if (mode) {
    cfg.mode = *mode;
    if (cfg.mode == "plane") cfg.quantity = Quantity::Plane;
    else if (cfg.mode == "grating") cfg.quantity = Quantity::Grating;
    else if (cfg.mode == "pa") cfg.quantity = Quantity::Pa;
    else if (cfg.mode == "modulation") cfg.quantity = Quantity::Modulation;
    else if (cfg.mode != "sweep") c.fail("mode", "must be one of plane, grating, pa, sweep, modulation");
  }
  const auto compute = c.string(doc, "compute", "", cfg.mode == "sweep");
  if (compute) {
    if (cfg.mode != "sweep") c.fail("compute", "only allowed with mode 'sweep'");
    else if (*compute == "plane") cfg.quantity = Quantity::Plane;
    else if (*compute == "grating") cfg.quantity = Quantity::Grating;
    else if (*compute == "pa") cfg.quantity = Quantity::Pa;
    else if (*compute == "modulation") cfg.quantity = Quantity::Modulation;
    else c.fail("compute", "must be one of plane, grating, pa, modulation");
  }

  if (auto m = c.string(doc, "material", "", true)) {
    cfg.material = *m;
    if (cfg.material.rfind("builtin:", 0) == 0 && cfg.material != "builtin:SiO2-oscillator" &&
        cfg.material != "builtin:SiO2-table")
      c.fail("material", "unknown builtin (builtin:SiO2-oscillator or builtin:SiO2-table)");
    else if (cfg.material.rfind("builtin:", 0) != 0 && !std::filesystem::exists(cfg.material))
      c.fail("material", "n,k table not found: " + cfg.material);
  }

  const std::string axis = (doc.contains("sweep") && doc["sweep"].is_object() && doc["sweep"].contains("axis") &&
                            doc["sweep"]["axis"].is_string())
                               ? doc["sweep"]["axis"].get<std::string>()
                               : "";
  const bool sweeping = cfg.mode == "sweep";
  const bool needs_geometry = cfg.quantity != Quantity::Plane;

  if (const json* g = c.object(doc, "geometry", "", needs_geometry)) {
    cfg.has_geometry = true;
    c.keys(*g, "geometry", {"period_nm", "depth_nm", "fill", "shift_nm"});
    const bool swept_d = sweeping && axis == "d", swept_p = sweeping && axis == "p";
    if (auto v = c.number(*g, "period_nm", "geometry", !swept_d)) {
      if (!(*v > 0.0)) c.fail("geometry.period_nm", "must be positive");
      cfg.period = *v * 1e-9;
    }
    if (auto v = c.number(*g, "depth_nm", "geometry", true)) {
      if (*v < 0.0) c.fail("geometry.depth_nm", "must be >= 0");
      cfg.depth = *v * 1e-9;
    }
    if (auto v = c.number(*g, "fill", "geometry", !swept_p)) {
      if (!(*v > 0.0 && *v < 1.0)) c.fail("geometry.fill", "must lie in (0, 1)");
      cfg.fill = *v;
    }
    if (auto v = c.number(*g, "shift_nm", "geometry", false)) cfg.shift = *v * 1e-9;
  }

  if (auto v = c.number(doc, "separation_nm", "", !(sweeping && axis == "L"))) {
    if (!(*v > 0.0)) c.fail("separation_nm", "must be positive");
    cfg.separation = *v * 1e-9;
  }

  if (const json* t = c.object(doc, "temperatures_K", "", true)) {
    c.keys(*t, "temperatures_K", {"T1", "T2"});
    const auto t1 = c.number(*t, "T1", "temperatures_K", true);
    const auto t2 = c.number(*t, "T2", "temperatures_K", true);
    if (t1 && !(*t1 > 0.0)) c.fail("temperatures_K.T1", "must be positive");
    if (t2 && !(*t2 > 0.0)) c.fail("temperatures_K.T2", "must be positive");
    if (t1 && t2 && *t1 == *t2) c.fail("temperatures_K", "T1 and T2 must differ");
    if (t1) cfg.T1 = *t1;
    if (t2) cfg.T2 = *t2;
  }

  if (doc.contains("with_pa")) {
    if (!doc["with_pa"].is_boolean()) c.fail("with_pa", "expected true or false");
    else cfg.with_pa = doc["with_pa"].get<bool>();
    if (cfg.with_pa && cfg.quantity != Quantity::Grating && cfg.quantity != Quantity::Modulation)
      c.fail("with_pa", "only meaningful for grating or modulation results");
  }

  if (const json* n = c.object(doc, "numerics", "", false)) {
    auto& o = cfg.numerics;
    c.keys(*n, "numerics", {"truncation", "lateral_cutoff", "evanescent_cutoff", "ky_light_factor", "omega_min_rad_s",
                            "omega_max_rad_s", "rel_tol", "inner_tol_ratio", "planar_rel_tol", "workers",
                            "omega_budget", "kx_budget", "ky_budget"});
    if (auto v = c.integer(*n, "truncation", "numerics")) {
      if (*v < 0 || *v > 400) c.fail("numerics.truncation", "must lie in [0, 400]");
      o.truncation = static_cast<int>(*v);
    }
    auto positive = [&](const char* key, double& out) {
      if (auto v = c.number(*n, key, "numerics", false)) {
        if (!(*v > 0.0)) c.fail(std::string("numerics.") + key, "must be positive");
        out = *v;
      }
    };
    if (auto v = c.number(*n, "lateral_cutoff", "numerics", false)) {
      if (*v < 0.0) c.fail("numerics.lateral_cutoff", "must be >= 0");
      o.lateral_cutoff = *v;
    }
    positive("evanescent_cutoff", o.evanescent_cutoff);
    positive("ky_light_factor", o.ky_light_factor);
    if (n->contains("ky_light_factor") && o.ky_light_factor < 1.0)
      c.fail("numerics.ky_light_factor", "must be >= 1");
    positive("omega_min_rad_s", o.omega_min);
    positive("omega_max_rad_s", o.omega_max);
    if (o.omega_max <= o.omega_min) c.fail("numerics", "omega_max_rad_s must exceed omega_min_rad_s");
    positive("rel_tol", o.rel_tol);
    positive("inner_tol_ratio", o.inner_tol_ratio);
    positive("planar_rel_tol", o.planar_rel_tol);
    if (auto v = c.integer(*n, "workers", "numerics")) {
      if (*v < 0 || *v > 1024) c.fail("numerics.workers", "must lie in [0, 1024]");
      o.workers = static_cast<unsigned>(*v);
    }
    auto budget = [&](const char* key, std::size_t& out) {
      if (auto v = c.integer(*n, key, "numerics")) {
        if (*v < 15) c.fail(std::string("numerics.") + key, "must be at least 15");
        out = static_cast<std::size_t>(*v);
      }
    };
    budget("omega_budget", o.omega_budget);
    budget("kx_budget", o.kx_budget);
    budget("ky_budget", o.ky_budget);
  }

  if (const json* s = c.object(doc, "sweep", "", sweeping)) {
    if (!sweeping) c.fail("sweep", "only allowed with mode 'sweep'");
    c.keys(*s, "sweep", {"axis", "values", "range"});
    SweepSpec spec;
    if (auto a = c.string(*s, "axis", "sweep", true)) {
      spec.axis = *a;
      if (spec.axis != "L" && spec.axis != "d" && spec.axis != "p" && spec.axis != "delta")
        c.fail("sweep.axis", "must be one of L, d, p, delta");
    }
    const bool has_values = s->contains("values"), has_range = s->contains("range");
    if (cfg.quantity == Quantity::Plane && spec.axis != "L" && !spec.axis.empty())
      c.fail("sweep.axis", "plane results depend on L only");
    if (cfg.quantity == Quantity::Modulation && spec.axis == "delta")
      c.fail("sweep.axis", "modulation already compares delta = 0 with delta = d/2");
    if (has_values == has_range) c.fail("sweep", "give exactly one of 'values' or 'range'");
    if (has_values) {
      if (!(*s)["values"].is_array()) {
        c.fail("sweep.values", "expected an array of numbers");
      } else {
        for (const auto& v : (*s)["values"]) {
          if (!v.is_number()) c.fail("sweep.values", "expected an array of numbers");
          else spec.values.push_back(v.get<double>());
        }
      }
    }
    if (has_range) {
      if (const json* r = c.object(*s, "range", "sweep", true)) {
        c.keys(*r, "sweep.range", {"start", "stop", "count", "spacing"});
        const auto a = c.number(*r, "start", "sweep.range", true);
        const auto b = c.number(*r, "stop", "sweep.range", true);
        const auto n = c.integer(*r, "count", "sweep.range");
        const auto sp = c.string(*r, "spacing", "sweep.range", false).value_or("linear");
        if (!r->contains("count")) c.fail("sweep.range.count", "required");
        if (n && *n < 1) c.fail("sweep.range.count", "must be >= 1");
        if (sp != "linear" && sp != "log") c.fail("sweep.range.spacing", "must be linear or log");
        if (sp == "log" && a && b && !(*a > 0.0 && *b > 0.0)) c.fail("sweep.range", "log spacing needs start, stop > 0");
        if (a && b && n && *n >= 1) {
          for (long long i = 0; i < *n; ++i) {
            const double t = *n == 1 ? 0.0 : double(i) / double(*n - 1);
            spec.values.push_back(sp == "log" ? *a * std::pow(*b / *a, t) : *a + (*b - *a) * t);
          }
        }
      }
    }
    if (has_values && spec.values.empty()) c.fail("sweep.values", "empty sweep");
    for (double v : spec.values) {
      if (spec.axis == "delta") {
        if (!(v >= 0.0)) c.fail("sweep.values", "delta values must be >= 0");
      } else if (!(v > 0.0)) {
        c.fail("sweep.values", "values must be positive");
      } else if (spec.axis == "p" && !(v < 1.0)) {
        c.fail("sweep.values", "filling factors must lie below 1");
      }
      if (spec.axis == "p" && (cfg.quantity == Quantity::Pa || cfg.with_pa) && !(v < 0.5))
        c.fail("sweep.values", "proximity results need filling factors below 0.5");
    }
    cfg.sweep = spec;
  }

  if (cfg.has_geometry && (cfg.quantity == Quantity::Pa || cfg.with_pa) && cfg.fill >= 0.5 &&
      !(sweeping && axis == "p"))
    c.fail("geometry.fill", "proximity results need fill < 0.5");

  if (!c.problems.empty()) throw ConfigError(c.problems);
  return cfg;
}

/// Parses JSON text; syntax errors report line and column.
inline json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // the parser message already carries line and column
    throw ConfigError({origin + ": malformed JSON: " + e.what()});
  }
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path + ": cannot open"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace nfrht::cli
