#include "tsc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tsc/agents.hpp"
#include "tsc/analysis.hpp"
#include "tsc/bench.hpp"

namespace tsc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Validation-class failures map to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot read '{}'", p.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot write '{}'", p.string()));
  f << text;
  if (!f) throw IoError(fmt::format("failed writing '{}'", p.string()));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    out.push_back(cur);
  }
  return out;
}

// ---- run

struct RunArgs {
  std::string scenario = "single";
  std::string agent = "fixed";
  int seeds = 5;
  std::optional<std::uint64_t> seed;
  std::vector<double> offsets;
  int jobs = 1;
};

struct SeedResult {
  std::uint64_t seed = 0;
  rl::EpisodeMetrics m;
  double arterial = 0.0;
  std::vector<analysis::ControllerLog> logs;
};

rl::EnvConfig quiet_env(const ScenarioConfig& cfg) {
  rl::EnvConfig c;
  c.scenario = cfg.name;
  c.scenario_cfg = cfg;
  c.logger.log_to_console = false;
  c.logger.enable_loggers.clear();
  return c;
}

SeedResult run_seed(const ScenarioConfig& cfg, const RunArgs& a, const agents::FixedTimePlan& plan, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  if (a.agent == "fixed") {
    Simulation sim(cfg, seed);
    auto res = agents::run_fixed_time(cfg, plan, seed, &sim);
    r.m = res.metrics;
    r.arterial = res.arterial_delay;
    r.logs = analysis::controller_logs(sim);
    return r;
  }
  rl::EnvConfig ec = quiet_env(cfg);
  ec.action_config = {"ChooseNextPhase"};
  rl::Env env(ec);
  std::map<std::string, std::vector<std::vector<std::size_t>>> layouts;
  for (const auto& ag : env.agents()) layouts[ag.id] = agents::greedy_layout(env, ag.id);
  auto obs = env.reset(seed).observations;
  while (true) {
    std::map<std::string, double> actions;
    for (const auto& id : env.active_agents())
      actions[id] = agents::greedy_longest_queue(obs.at(id), layouts.at(id));
    auto st = env.step(actions);
    obs = st.observations;
    if (env.done()) break;
  }
  r.m = env.episode_metrics();
  r.arterial = agents::arterial_delay(env.sim());
  r.logs = analysis::controller_logs(env.sim());
  return r;
}

std::string metrics_csv(const std::vector<SeedResult>& rs) {
  std::string out = "seed,mean_delay,mean_waiting,total_delay,spawned,arrived,arterial_delay\n";
  double d = 0, w = 0, t = 0, s = 0, ar = 0, art = 0;
  for (const auto& r : rs) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{},{},{:.6f}\n", r.seed, r.m.mean_delay, r.m.mean_waiting,
                       r.m.total_delay, r.m.spawned, r.m.arrived, r.arterial);
    d += r.m.mean_delay;
    w += r.m.mean_waiting;
    t += r.m.total_delay;
    s += static_cast<double>(r.m.spawned);
    ar += static_cast<double>(r.m.arrived);
    art += r.arterial;
  }
  const double n = static_cast<double>(rs.size());
  if (n > 0)
    out += fmt::format("mean,{:.6f},{:.6f},{:.6f},{:.1f},{:.1f},{:.6f}\n", d / n, w / n, t / n, s / n, ar / n, art / n);
  return out;
}

int do_run(RunArgs a, const std::string& manifest_path, fs::path out_dir, std::ostream& out) {
  ScenarioConfig cfg;
  if (!manifest_path.empty()) {
    json m = json::parse(read_file(manifest_path));
    if (m.value("command", "") != "run") throw UsageError("manifest was not written by `run`");
    cfg = parse_scenario(m.at("scenario").dump());
    require_valid(cfg);
    const json& args = m.at("args");
    a.scenario = args.at("scenario").get<std::string>();
    a.agent = args.at("agent").get<std::string>();
    a.seeds = args.at("seeds").get<int>();
    a.seed = args.at("seed").get<std::uint64_t>();
    a.offsets = args.at("offsets").get<std::vector<double>>();
  } else {
    cfg = resolve_scenario(a.scenario);
  }
  if (a.agent != "fixed" && a.agent != "greedy") throw UsageError("--agent must be fixed or greedy");
  if (a.seeds < 1) throw UsageError("--seeds must be at least 1");
  const std::uint64_t base = a.seed.value_or(cfg.sim.seed);
  if (out_dir.empty()) out_dir = fs::path("runs") / fmt::format("{}_{}", cfg.name, a.agent);

  agents::FixedTimePlan plan = agents::FixedTimePlan::from_scenario(cfg);
  if (!a.offsets.empty()) {
    if (a.agent != "fixed") throw UsageError("--offsets only applies to the fixed agent");
    if (a.offsets.size() != cfg.signals.size())
      throw UsageError(fmt::format("--offsets needs {} values (one per signal program)", cfg.signals.size()));
    for (std::size_t i = 0; i < cfg.signals.size(); ++i) plan.intersections[cfg.signals[i].intersection].offset = a.offsets[i];
  }
  agents::check_plan(plan, cfg);

  std::vector<SeedResult> results(static_cast<std::size_t>(a.seeds));
  std::vector<std::string> errors;
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    while (true) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next >= results.size() || !errors.empty()) return;
        k = next++;
      }
      try {
        results[k] = run_seed(cfg, a, plan, base + k);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(mu);
        errors.push_back(e.what());
      }
    }
  };
  const int jobs = std::max(1, std::min(a.jobs, a.seeds));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!errors.empty()) throw std::runtime_error(errors.front());

  fs::create_directories(out_dir);
  const std::string csv = metrics_csv(results);
  write_file(out_dir / "metrics.csv", csv);
  json seeds = json::array();
  for (const auto& r : results) {
    std::string name = fmt::format("signals_seed{}.csv", r.seed);
    analysis::write_controller_logs(out_dir / name, r.logs);
    seeds.push_back({{"seed", r.seed}, {"signals", name}});
  }
  json manifest = {{"command", "run"},
                   {"args",
                    {{"scenario", a.scenario},
                     {"agent", a.agent},
                     {"seeds", a.seeds},
                     {"seed", base},
                     {"offsets", a.offsets}}},
                   {"runs", seeds},
                   {"scenario", json::parse(serialize_scenario(cfg))}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  out << csv;
  return 0;
}

// ---- train

json qtable_json(const agents::QTable& q) {
  std::vector<std::uint64_t> keys;
  for (const auto& [k, v] : q.entries()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  json states = json::array();
  for (auto k : keys) states.push_back({{"state", k}, {"q", q.entries().at(k)}});
  return {{"actions", q.actions()}, {"states", states}};
}

struct TrainArgs {
  std::string scenario = "single";
  std::string action = "switch";
  int episodes = 200;
  std::uint64_t traffic_seed = 1000;
  std::uint64_t agent_seed = 7;
  std::string reward;  // JSON object of reward weights
};

int do_train(const TrainArgs& a, fs::path out_dir, std::ostream& out) {
  if (a.action != "switch") throw UsageError("the tabular learner supports --action switch only");
  if (a.episodes < 0) throw UsageError("--episodes must be non-negative");
  ScenarioConfig cfg = resolve_scenario(a.scenario);
  rl::EnvConfig ec = quiet_env(cfg);
  ec.single_agent = true;
  if (!a.reward.empty()) {
    json w;
    try {
      w = json::parse(a.reward);
    } catch (const json::exception& e) {
      throw UsageError(fmt::format("--reward is not valid JSON: {}", e.what()));
    }
    ec.reward_config.args = w;
  }
  rl::Env env(ec);
  auto res = agents::q_train(env, a.episodes, {}, a.traffic_seed, a.agent_seed);
  if (out_dir.empty()) out_dir = fs::path("runs") / fmt::format("{}_train", cfg.name);
  fs::create_directories(out_dir);
  const std::string csv = agents::curve_csv(res.curve);
  write_file(out_dir / "curve.csv", csv);
  write_file(out_dir / "qtable.json", qtable_json(res.table).dump(1) + "\n");
  json manifest = {{"command", "train"},
                   {"args",
                    {{"scenario", a.scenario},
                     {"action", a.action},
                     {"episodes", a.episodes},
                     {"traffic_seed", a.traffic_seed},
                     {"agent_seed", a.agent_seed},
                     {"reward", a.reward}}},
                   {"env", ec.to_json()},
                   {"scenario", json::parse(serialize_scenario(cfg))}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  out << csv;
  return 0;
}

// ---- bench

int do_bench(const std::string& workload, const std::string& mode, const std::string& transport, int runs,
             const std::string& out_path, std::ostream& out) {
  std::vector<Workload> ws;
  if (workload == "all")
    ws = {Workload::W0, Workload::W1, Workload::W2};
  else
    ws = {workload_from_name(workload)};
  std::vector<BusMode> ms;
  if (mode == "both")
    ms = {BusMode::Raw, BusMode::Facade};
  else
    ms = {mode_from_name(mode)};
  if (runs < 1) throw UsageError("--runs must be at least 1");
  std::string csv = bench_csv_header();
  for (auto w : ws)
    for (auto m : ms) {
      WorkloadSpec spec;
      spec.id = w;
      spec.mode = m;
      spec.transport = bus::transport_from_name(transport);
      csv += bench_csv_row(run_workload(spec, runs));
    }
  if (!out_path.empty()) write_file(out_path, csv);
  out << csv;
  return 0;
}

// ---- band

int do_band(const fs::path& run_dir, std::optional<std::uint64_t> seed, std::optional<double> from,
            std::optional<double> to, const std::string& movement, std::ostream& out) {
  json m = json::parse(read_file(run_dir / "manifest.json"));
  ScenarioConfig cfg = parse_scenario(m.at("scenario").dump());
  const json& runs = m.at("runs");
  if (runs.empty()) throw UsageError("manifest lists no runs");
  const json* pick = &runs.front();
  if (seed) {
    pick = nullptr;
    for (const auto& r : runs)
      if (r.at("seed").get<std::uint64_t>() == *seed) pick = &r;
    if (!pick) throw UsageError(fmt::format("run directory has no seed {}", *seed));
  }
  auto logs = analysis::read_controller_logs(run_dir / pick->at("signals").get<std::string>());
  auto rows = analysis::arterial_rows(cfg, movement);
  if (rows.empty()) throw UsageError(fmt::format("no intersection has movement '{}'", movement));
  const double t0 = from.value_or(cfg.sim.start_time);
  const double t1 = to.value_or(std::min(t0 + 600.0, cfg.sim.sim_period));
  auto band = analysis::extract_band(logs, cfg, rows, t0, t1);
  write_file(run_dir / "band.csv", analysis::band_csv(band));
  analysis::render_band(band, run_dir / "band.svg");
  out << fmt::format("band: {} rows x {} samples -> {}\n", band.rows.size(), band.samples(),
                     (run_dir / "band.svg").string());
  for (std::size_t r = 0; r + 1 < band.rows.size(); ++r) {
    try {
      out << fmt::format("offset {} -> {}: {} s\n", band.rows[r].intersection, band.rows[r + 1].intersection,
                         analysis::measure_offset(band, r, r + 1));
    } catch (const Aperiodic& e) {
      out << fmt::format("offset {} -> {}: aperiodic ({})\n", band.rows[r].intersection,
                         band.rows[r + 1].intersection, e.what());
    }
  }
  return 0;
}

// ---- compare

BenchReport report_from_row(const std::vector<std::string>& c) {
  if (c.size() != 7) throw UsageError("bench CSV rows need 7 columns");
  BenchReport r;
  r.spec.id = workload_from_name(c[0]);
  r.spec.mode = mode_from_name(c[1]);
  r.spec.transport = bus::transport_from_name(c[2]);
  r.latency_ms_mean = std::stod(c[3]);
  r.latency_ms_sd = std::stod(c[4]);
  r.steps_per_s = std::stod(c[5]);
  r.bus_calls = std::stoll(c[6]);
  return r;
}

int do_compare(const fs::path& a_path, const fs::path& b_path, std::ostream& out) {
  auto a = split(read_file(a_path), '\n');
  auto b = split(read_file(b_path), '\n');
  auto drop_empty = [](std::vector<std::string>& v) {
    v.erase(std::remove(v.begin(), v.end(), std::string()), v.end());
  };
  drop_empty(a);
  drop_empty(b);
  if (a.empty() || b.empty() || a.front() != b.front()) throw UsageError("files must share a CSV header");
  if (a.front() + "\n" == bench_csv_header()) {
    out << "workload,transport,overhead_pct,throughput_ratio,call_reduction_pct\n";
    int pairs = 0;
    for (std::size_t i = 1; i < a.size(); ++i) {
      BenchReport raw = report_from_row(split(a[i], ','));
      for (std::size_t j = 1; j < b.size(); ++j) {
        BenchReport fac = report_from_row(split(b[j], ','));
        if (fac.spec.id != raw.spec.id || fac.spec.transport != raw.spec.transport) continue;
        Comparison c = compare(raw, fac);
        out << fmt::format("{},{},{:.3f},{:.4f},{:.3f}\n", workload_name(raw.spec.id),
                           bus::transport_name(raw.spec.transport), c.overhead_pct, c.throughput_ratio,
                           c.call_reduction_pct);
        ++pairs;
      }
    }
    if (pairs == 0) throw WorkloadMismatch("no rows share a workload and transport");
    return 0;
  }
  if (a.front().rfind("seed,", 0) == 0) {
    auto header = split(a.front(), ',');
    auto mean_row = [](const std::vector<std::string>& lines) {
      for (const auto& l : lines)
        if (l.rfind("mean,", 0) == 0) return split(l, ',');
      throw UsageError("metrics CSV has no mean row");
    };
    auto ma = mean_row(a);
    auto mb = mean_row(b);
    out << "metric,baseline,candidate,change_pct\n";
    for (std::size_t k = 1; k < header.size() && k < ma.size() && k < mb.size(); ++k) {
      double x = std::stod(ma[k]), y = std::stod(mb[k]);
      out << fmt::format("{},{:.6f},{:.6f},{:.3f}\n", header[k], x, y, x != 0 ? (y - x) / x * 100.0 : 0.0);
    }
    return 0;
  }
  throw UsageError("unrecognised CSV (expected bench or run metrics output)");
}

bool is_validation(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const UnknownPreset*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const PlanMismatch*>(&e) || dynamic_cast<const UsageError*>(&e) ||
      dynamic_cast<const BadValue*>(&e))
    return true;
  return false;
}

void print_violations(const ValidationError& e, std::ostream& err) {
  for (const auto& v : e.violations()) err << fmt::format("  {} at {}: {}\n", v.code, v.path, v.message);
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Traffic-signal control RL platform"};
  app.require_subcommand(1);

  std::string scn;
  auto* validate = app.add_subcommand("validate", "Check a scenario file (or preset name)");
  validate->add_option("scenario", scn, "Scenario .scn path or preset name")->required();

  RunArgs ra;
  std::string run_out, manifest;
  std::vector<double> offsets;
  std::uint64_t run_seed_v = 0;
  auto* run = app.add_subcommand("run", "Run a baseline controller over several seeds");
  run->add_option("--scenario,--preset", ra.scenario, "Preset name or .scn path");
  run->add_option("--agent", ra.agent, "fixed or greedy")->check(CLI::IsMember({"fixed", "greedy"}));
  run->add_option("--seeds", ra.seeds, "Number of seeds");
  auto* seed_opt = run->add_option("--seed", run_seed_v, "First seed (default: scenario seed)");
  run->add_option("--offsets", offsets, "Fixed-time offsets, one per signal program")->delimiter(',');
  run->add_option("--jobs", ra.jobs, "Worker threads");
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--manifest", manifest, "Re-run the configuration stored in a manifest.json");

  TrainArgs ta;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train the tabular Q-learner");
  train->add_option("--scenario,--preset", ta.scenario, "Preset name or .scn path");
  train->add_option("--action", ta.action, "Action class (switch)");
  train->add_option("--episodes", ta.episodes, "Training episodes");
  train->add_option("--traffic-seed", ta.traffic_seed, "Seed of episode 0 (episode e uses seed + e)");
  train->add_option("--agent-seed", ta.agent_seed, "Exploration seed");
  train->add_option("--reward", ta.reward, "Reward weights as a JSON object");
  train->add_option("--out", train_out, "Output directory");

  std::string workload = "all", mode = "both", transport = "inproc", bench_out;
  int runs = 5;
  auto* bench = app.add_subcommand("bench", "Run the bus workloads");
  bench->add_option("--workload", workload, "W0, W1, W2 or all");
  bench->add_option("--mode", mode, "raw, facade or both");
  bench->add_option("--transport", transport, "inproc or socket");
  bench->add_option("--runs", runs, "Repetitions");
  bench->add_option("--out", bench_out, "CSV output file");

  std::string run_dir, movement = "W_S";
  std::uint64_t band_seed = 0;
  double from = 0, to = 0;
  auto* band = app.add_subcommand("band", "Extract and plot the arterial green band of a run");
  band->add_option("--run", run_dir, "Run directory written by `run`")->required();
  auto* band_seed_opt = band->add_option("--seed", band_seed, "Seed to analyse (default: first)");
  auto* from_opt = band->add_option("--from", from, "Window start (s, default warm-up end)");
  auto* to_opt = band->add_option("--to", to, "Window end (s, default start + 600)");
  band->add_option("--movement", movement, "Arterial movement id");

  std::string cmp_a, cmp_b;
  auto* cmp = app.add_subcommand("compare", "Compare two bench CSVs (raw, facade) or two run metrics CSVs");
  cmp->add_option("baseline", cmp_a, "Raw bench CSV or baseline metrics.csv")->required();
  cmp->add_option("candidate", cmp_b, "Facade bench CSV or candidate metrics.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*validate) {
      ScenarioConfig cfg = resolve_scenario(scn);
      out << fmt::format("ok: {} ({} intersections, {} links, {} demands)\n", cfg.name,
                         cfg.network.intersections.size(), cfg.network.links.size(), cfg.demands.size());
      return 0;
    }
    if (*run) {
      if (*seed_opt) ra.seed = run_seed_v;
      ra.offsets = offsets;
      return do_run(ra, manifest, run_out, out);
    }
    if (*train) return do_train(ta, train_out, out);
    if (*bench) return do_bench(workload, mode, transport, runs, bench_out, out);
    if (*band) {
      std::optional<std::uint64_t> s;
      if (*band_seed_opt) s = band_seed;
      std::optional<double> f, t;
      if (*from_opt) f = from;
      if (*to_opt) t = to;
      return do_band(run_dir, s, f, t, movement, out);
    }
    if (*cmp) return do_compare(cmp_a, cmp_b, out);
  } catch (const ValidationError& e) {
    err << "invalid: " << e.what() << "\n";
    print_violations(e, err);
    return 1;
  } catch (const std::exception& e) {
    const auto* te = dynamic_cast<const Error*>(&e);
    err << "error: " << (te ? te->code() + ": " : std::string()) << e.what() << "\n";
    return is_validation(e) ? 1 : 2;
  }
  return 2;
}

}  // namespace tsc::cli
