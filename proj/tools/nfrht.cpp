// nfrht: batch driver for grating heat-transfer computations.
//
//   nfrht run <config.json> [--out DIR] [--strict] [--preset NAME] [--parallel-points]
//   nfrht validate <config.json>
//   nfrht presets
//
// Exit codes: 0 ok, 1 flagged results under --strict, 2 config error,
// 3 computation failed.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nfrht/cli/config.hpp"
#include "nfrht/cli/run.hpp"

#ifndef NFRHT_DEFAULT_PRESET_DIR
#define NFRHT_DEFAULT_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace nfrht::cli;

namespace {

constexpr int kOk = 0, kFlagged = 1, kConfigError = 2, kFailed = 3;

fs::path preset_dir() {
  if (const char* env = std::getenv("NFRHT_PRESET_DIR")) return env;
  return NFRHT_DEFAULT_PRESET_DIR;
}

json load_preset(const std::string& name) {
  const fs::path p = preset_dir() / (name + ".json");
  if (!fs::exists(p)) throw ConfigError({"--preset: no preset named '" + name + "' in " + preset_dir().string()});
  return parse_config_text(read_text(p.string()), p.string());
}

// Preset first, then the config file merged over it (RFC 7386).
json resolve(const std::string& config_path, const std::string& preset) {
  json doc;
  if (!preset.empty()) doc = load_preset(preset);
  if (!config_path.empty()) {
    json user = parse_config_text(read_text(config_path), config_path);
    if (preset.empty()) doc = std::move(user);
    else doc.merge_patch(user);
  }
  if (doc.is_null()) throw ConfigError({"run: give a config file, a --preset, or both"});
  return doc;
}

int report(const ConfigError& e) {
  std::cerr << "config error:\n";
  for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
  return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field heat transfer between lamellar gratings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path, preset, out_dir = ".";
  bool strict = false, parallel_points = false, quiet = false;

  auto* run = app.add_subcommand("run", "Compute a job and write results.csv and manifest.json");
  run->add_option("config", config_path, "Job configuration (JSON)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--strict", strict, "Exit 1 if any point is flagged");
  run->add_option("--preset", preset, "Start from a shipped preset; the config file, if given, overrides it");
  run->add_flag("--parallel-points", parallel_points, "Run sweep points concurrently");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a configuration and list every problem");
  validate->add_option("config", validate_path, "Job configuration (JSON)")->required();

  auto* presets = app.add_subcommand("presets", "List shipped presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*presets) {
    std::error_code ec;
    if (!fs::is_directory(preset_dir(), ec)) {
      std::cerr << "no preset directory at " << preset_dir() << '\n';
      return kConfigError;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(preset_dir()))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string desc;
      try {
        const json doc = json::parse(read_text(f.string()));
        desc = doc.value("description", "");
      } catch (const std::exception&) {
        desc = "(unreadable)";
      }
      std::cout << f.stem().string() << "\t" << desc << '\n';
    }
    return kOk;
  }

  if (*validate) {
    try {
      const JobConfig cfg = config_from_json(parse_config_text(read_text(validate_path), validate_path));
      std::cout << validate_path << ": ok (" << expand_points(cfg).size() << " point(s), "
                << to_string(cfg.quantity) << ")\n";
      return kOk;
    } catch (const ConfigError& e) {
      return report(e);
    }
  }

  json resolved;
  JobConfig cfg;
  try {
    resolved = resolve(config_path, preset);
    cfg = config_from_json(resolved);
  } catch (const ConfigError& e) {
    return report(e);
  }

  RunOptions opt;
  opt.out_dir = out_dir;
  opt.parallel_points = parallel_points;
  opt.preset = preset;
  if (!quiet) {
    opt.progress = [](std::size_t done, std::size_t total, const Row& r) {
      std::cerr << "[" << done << "/" << total << "]";
      for (const auto& [k, v] : r.cells)
        if (k.find("W_per_m2K") != std::string::npos && k.find("err") == std::string::npos)
          std::cerr << ' ' << k << '=' << v;
      std::cerr << '\n';
    };
  }
  try {
    const RunResult res = run_job(resolved, cfg, opt);
    if (!quiet)
      std::cerr << "wrote " << (fs::path(out_dir) / "results.csv").string() << " (" << res.rows.size()
                << " rows, " << res.flagged << " flagged, " << res.wall_seconds << " s)\n";
    return strict && res.flagged > 0 ? kFlagged : kOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
}
