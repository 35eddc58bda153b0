#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nfrht/cli/config.hpp"
#include "nfrht/cli/run.hpp"

namespace fs = std::filesystem;
using namespace nfrht::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nfrht_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(NFRHT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> problems_of(const std::string& text) {
  try {
    config_from_json(json::parse(text));
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

const char* kPlane = R"({
  "mode": "sweep", "compute": "plane", "material": "builtin:SiO2-oscillator",
  "temperatures_K": {"T1": 310, "T2": 290},
  "numerics": {"planar_rel_tol": 1e-4},
  "sweep": {"axis": "L", "values": [100, 1000]}
})";

}  // namespace

TEST(Config, ValidPlaneSweep) {
  const JobConfig c = config_from_json(json::parse(kPlane));
  EXPECT_EQ(c.quantity, Quantity::Plane);
  const auto pts = expand_points(c);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_DOUBLE_EQ(pts[1].separation, 1000e-9);
}

TEST(Config, EnumeratesEveryViolation) {
  const auto p = problems_of(R"({
    "mode": "grating", "material": "builtin:Gold", "separation_nm": -5,
    "geometry": {"period_nm": 0, "depth_nm": 100, "fill": 1.2},
    "temperatures_K": {"T1": 300, "T2": 300},
    "numerics": {"rel_tol": 0, "colour": 1}
  })");
  EXPECT_GE(p.size(), 7u);
  auto mentions = [&](const std::string& key) {
    for (const auto& s : p)
      if (s.find(key) != std::string::npos) return true;
    return false;
  };
  for (const char* k : {"material", "separation_nm", "period_nm", "fill", "temperatures_K", "rel_tol", "colour"})
    EXPECT_TRUE(mentions(k)) << k;
}

TEST(Config, RejectsUnknownKeys) {
  const auto p = problems_of(R"({"mode": "plane", "material": "builtin:SiO2-table", "separation_nm": 100,
    "temperatures_K": {"T1": 310, "T2": 290}, "seperation_nm": 10})");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NE(p[0].find("seperation_nm"), std::string::npos);
}

TEST(Config, EmptySweepAndProximityRange) {
  auto p = problems_of(R"({"mode": "sweep", "compute": "plane", "material": "builtin:SiO2-table",
    "temperatures_K": {"T1": 310, "T2": 290}, "sweep": {"axis": "L", "values": []}})");
  ASSERT_FALSE(p.empty());
  EXPECT_NE(p[0].find("empty"), std::string::npos);
  p = problems_of(R"({"mode": "sweep", "compute": "pa", "material": "builtin:SiO2-table", "separation_nm": 100,
    "geometry": {"period_nm": 500, "depth_nm": 500},
    "temperatures_K": {"T1": 310, "T2": 290}, "sweep": {"axis": "p", "values": [0.2, 0.6]}})");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NE(p[0].find("below 0.5"), std::string::npos);
}

TEST(Config, SyntaxErrorsCarryPosition) {
  try {
    parse_config_text("{\n  \"mode\": \"plane\",\n  oops\n}", "job.json");
    FAIL();
  } catch (const ConfigError& e) {
    ASSERT_FALSE(e.problems().empty());
    EXPECT_NE(e.problems()[0].find("job.json"), std::string::npos);
    EXPECT_NE(e.problems()[0].find("line 3"), std::string::npos);
  }
}

TEST(Csv, NineSignificantDigits) {
  EXPECT_EQ(sci(1234.5), "1.23450000e+03");
  EXPECT_EQ(sci(-2.0e-9), "-2.00000000e-09");
}

TEST(Tool, EmptySweepWritesNothing) {
  const fs::path dir = scratch("empty");
  const auto cfg = write(dir, "job.json", R"({"mode": "sweep", "compute": "plane", "material": "builtin:SiO2-table",
    "temperatures_K": {"T1": 310, "T2": 290}, "sweep": {"axis": "L", "values": []}})");
  EXPECT_EQ(run_tool("run " + cfg.string() + " --out " + (dir / "out").string()), 2);
  EXPECT_FALSE(fs::exists(dir / "out"));
  EXPECT_EQ(run_tool("validate " + cfg.string()), 2);
}

TEST(Tool, RerunIsByteIdentical) {
  const fs::path dir = scratch("rerun");
  const auto cfg = write(dir, "job.json", kPlane);
  ASSERT_EQ(run_tool("validate " + cfg.string()), 0);
  ASSERT_EQ(run_tool("run -q " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_tool("run -q " + cfg.string() + " --out " + (dir / "b").string()), 0);
  const std::string a = slurp(dir / "a" / "results.csv");
  EXPECT_EQ(a, slurp(dir / "b" / "results.csv"));
  EXPECT_NE(a.find("h0_W_per_m2K"), std::string::npos);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
  const json m = json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(m["points"], 2);
  EXPECT_EQ(m["config_sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(m["config_sha256"], json::parse(slurp(dir / "b" / "manifest.json"))["config_sha256"]);
}

TEST(Tool, StrictFlagsBudgetExhaustion) {
  const fs::path dir = scratch("strict");
  const auto cfg = write(dir, "job.json", R"({"mode": "grating", "material": "builtin:SiO2-oscillator",
    "geometry": {"period_nm": 1000, "depth_nm": 200, "fill": 0.3}, "separation_nm": 200,
    "temperatures_K": {"T1": 310, "T2": 290},
    "numerics": {"truncation": 0, "omega_min_rad_s": 1e14, "omega_max_rad_s": 1.2e14, "rel_tol": 1e-9,
                 "omega_budget": 15, "kx_budget": 15, "ky_budget": 15}})");
  EXPECT_EQ(run_tool("run -q " + cfg.string() + " --out " + (dir / "lenient").string()), 0);
  EXPECT_EQ(run_tool("run -q --strict " + cfg.string() + " --out " + (dir / "strict").string()), 1);
  EXPECT_TRUE(fs::exists(dir / "strict" / "results.csv"));
}

TEST(Tool, ComputationFailureExitCode) {
  const fs::path dir = scratch("fail");
  write(dir, "broken.txt", "not a table\n");
  const auto cfg = write(dir, "job.json", R"({"mode": "plane", "material": ")" + (dir / "broken.txt").string() +
                                              R"(", "separation_nm": 100, "temperatures_K": {"T1": 310, "T2": 290}})");
  EXPECT_EQ(run_tool("run -q " + cfg.string() + " --out " + (dir / "out").string()), 3);
}

TEST(Tool, PresetsAreListedAndValid) {
  EXPECT_EQ(run_tool("presets"), 0);
  for (const char* p : {"fig2", "fig4", "fig5", "fig6"})
    EXPECT_EQ(run_tool(std::string("validate ") + NFRHT_PRESET_SOURCE + "/" + p + ".json"), 0) << p;
  EXPECT_EQ(run_tool("run --preset nonexistent"), 2);
}
