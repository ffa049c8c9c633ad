#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsc/cli.hpp"
#include "tsc/scenario.hpp"

namespace fs = std::filesystem;
using namespace tsc;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result tscrl(std::vector<std::string> args) {
  args.insert(args.begin(), "tscrl");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  auto d = fs::temp_directory_path() / "tsc_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// A short-horizon copy of a preset.
fs::path short_scenario(const fs::path& dir, const std::string& preset, double period) {
  auto cfg = build_preset(preset);
  cfg.sim.start_time = 100;
  cfg.sim.sim_period = period;
  auto p = dir / (preset + "_short.scn");
  std::ofstream(p) << serialize_scenario(cfg);
  return p;
}

}  // namespace

TEST(Cli, ValidatePreset) {
  auto r = tscrl({"validate", std::string(TSC_SOURCE_DIR) + "/presets/arterial3.scn"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("ok: arterial3", 0), 0u);
  EXPECT_EQ(tscrl({"validate", "dayuan5"}).code, 0);
}

TEST(Cli, ValidateRejectsBadFile) {
  auto dir = workdir("validate");
  auto cfg = build_preset("single");
  cfg.demands[0].turn_ratios.left = 0.5;
  std::ofstream(dir / "bad.scn") << serialize_scenario(cfg);
  auto r = tscrl({"validate", (dir / "bad.scn").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("TurnRatioSum at demands[0].turn_ratios"), std::string::npos) << r.err;
  EXPECT_EQ(tscrl({"validate", (dir / "missing.scn").string()}).code, 1);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(tscrl({}).code, 1);
  EXPECT_EQ(tscrl({"run", "--bogus"}).code, 1);
  EXPECT_EQ(tscrl({"run", "--agent", "magic"}).code, 1);
  EXPECT_EQ(tscrl({"bench", "--workload", "W7"}).code, 1);
  EXPECT_EQ(tscrl({"--help"}).code, 0);
}

TEST(Cli, BenchRawW0) {
  auto r = tscrl({"bench", "--workload", "W0", "--mode", "raw", "--runs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "workload,mode,transport,latency_ms_mean,latency_ms_sd,steps_per_s,bus_calls");
  EXPECT_EQ(ls[1].rfind("W0,raw,inproc,", 0), 0u);
  EXPECT_EQ(ls[1].substr(ls[1].rfind(',') + 1), "36000");
}

TEST(Cli, CompareBenchFiles) {
  auto dir = workdir("compare");
  auto raw = (dir / "raw.csv").string(), fac = (dir / "facade.csv").string();
  ASSERT_EQ(tscrl({"bench", "--workload", "W2", "--mode", "raw", "--runs", "1", "--out", raw}).code, 0);
  ASSERT_EQ(tscrl({"bench", "--workload", "W2", "--mode", "facade", "--runs", "1", "--out", fac}).code, 0);
  auto r = tscrl({"compare", raw, fac});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "workload,transport,overhead_pct,throughput_ratio,call_reduction_pct");
  EXPECT_EQ(ls[1].rfind("W2,inproc,", 0), 0u);
  EXPECT_NEAR(std::stod(ls[1].substr(ls[1].rfind(',') + 1)), 100.0 * 10800 / 51120, 1e-3);
}

TEST(Cli, RunWritesMetricsAndLogs) {
  auto dir = workdir("run");
  auto scn = short_scenario(dir, "dayuan5", 700);
  auto out = dir / "out";
  auto r = tscrl({"run", "--scenario", scn.string(), "--agent", "fixed", "--seeds", "5", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(slurp(out / "metrics.csv"));
  ASSERT_EQ(ls.size(), 7u);
  EXPECT_EQ(ls[0].rfind("seed,", 0), 0u);
  EXPECT_EQ(ls[6].rfind("mean,", 0), 0u);
  int logs = 0;
  for (auto& e : fs::directory_iterator(out))
    if (e.path().filename().string().rfind("signals_seed", 0) == 0) ++logs;
  EXPECT_EQ(logs, 5);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Cli, ManifestReproducesRun) {
  auto dir = workdir("manifest");
  auto scn = short_scenario(dir, "arterial3", 600);
  auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(tscrl({"run", "--scenario", scn.string(), "--agent", "greedy", "--seeds", "2", "--out", a.string()}).code, 0);
  auto r = tscrl({"run", "--manifest", (a / "manifest.json").string(), "--out", b.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> names;
  for (auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  EXPECT_GE(names.size(), 4u);
  for (auto& n : names) {
    ASSERT_TRUE(fs::exists(b / n)) << n;
    EXPECT_EQ(slurp(a / n), slurp(b / n)) << n;
  }
}

TEST(Cli, BandFromRun) {
  auto dir = workdir("band");
  auto scn = short_scenario(dir, "arterial3", 900);
  auto run = dir / "run";
  ASSERT_EQ(tscrl({"run", "--scenario", scn.string(), "--agent", "fixed", "--seeds", "1", "--offsets", "0,21.6,43.2",
                   "--out", run.string()})
                .code,
            0);
  auto r = tscrl({"band", "--run", run.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(run / "band.svg"));
  auto csv = lines(slurp(run / "band.csv"));
  EXPECT_EQ(csv[0], "time_s,intersection_id,position_m,state");
  EXPECT_EQ(csv.size(), 1u + 3u * 600u);
  EXPECT_EQ(tscrl({"band", "--run", (dir / "nothing").string()}).code, 2);
}

TEST(Cli, TrainWritesCurve) {
  auto dir = workdir("train");
  auto scn = short_scenario(dir, "single", 400);
  auto out = dir / "out";
  auto r = tscrl({"train", "--scenario", scn.string(), "--episodes", "3", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(slurp(out / "curve.csv"));
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_EQ(ls[0], "episode,mean_delay,mean_waiting,return");
  EXPECT_TRUE(fs::exists(out / "qtable.json"));
  EXPECT_EQ(tscrl({"train", "--scenario", "arterial3", "--episodes", "1", "--out", out.string()}).code, 1);
}
