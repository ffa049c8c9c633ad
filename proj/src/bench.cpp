#include "tsc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "tsc/facade.hpp"

namespace tsc {

using bus::json;

const char* workload_name(Workload w) {
  switch (w) {
    case Workload::W0: return "W0";
    case Workload::W1: return "W1";
    case Workload::W2: return "W2";
  }
  return "?";
}

Workload workload_from_name(std::string_view s) {
  if (s == "W0") return Workload::W0;
  if (s == "W1") return Workload::W1;
  if (s == "W2") return Workload::W2;
  throw BadValue(fmt::format("unknown workload '{}' (expected W0, W1 or W2)", s));
}

const char* mode_name(BusMode m) { return m == BusMode::Raw ? "raw" : "facade"; }

BusMode mode_from_name(std::string_view s) {
  if (s == "raw") return BusMode::Raw;
  if (s == "facade") return BusMode::Facade;
  throw BadValue(fmt::format("unknown mode '{}' (expected raw or facade)", s));
}

namespace {

ScenarioConfig bench_config(const WorkloadSpec& spec) {
  ScenarioConfig cfg = resolve_scenario(spec.scenario);
  cfg.sim.sim_period = spec.horizon;
  cfg.sim.sim_res = spec.sim_res;
  cfg.sim.start_time = 0.0;
  return cfg;
}

struct Program {
  std::string id;
  std::vector<std::string> phases;
  std::vector<std::string> lanes;
  std::vector<std::string> links;
};

std::vector<Program> programs_of(const json& hello) {
  std::vector<Program> out;
  for (const auto& in : hello.at("intersections")) {
    Program p;
    p.id = in.at("id").get<std::string>();
    for (const auto& ph : in.at("phases")) p.phases.push_back(ph.at("state").get<std::string>());
    p.lanes = in.at("approach_lanes").get<std::vector<std::string>>();
    p.links = in.at("approach_links").get<std::vector<std::string>>();
    out.push_back(std::move(p));
  }
  return out;
}

// Next phase to request: the one after the phase the signal string shows, or
// after the last recognised phase while a transition is running.
std::size_t next_phase(const Program& p, const std::string& shown, std::size_t& last) {
  for (std::size_t i = 0; i < p.phases.size(); ++i)
    if (p.phases[i] == shown) last = i;
  return (last + 1) % p.phases.size();
}

double run_raw(const WorkloadSpec& spec, const ScenarioConfig& cfg, std::uint64_t seed, std::int64_t steps,
               std::int64_t every, std::int64_t& calls) {
  auto transport = bus::make_transport(spec.transport, Simulation(cfg, seed));
  bus::BusClient client(*transport);
  auto progs = programs_of(client.hello());
  std::vector<std::size_t> last(progs.size(), 0);

  auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t k = 0; k < steps; ++k) {
    if (spec.id != Workload::W0 && k % every == 0) {
      for (std::size_t i = 0; i < progs.size(); ++i) {
        const Program& p = progs[i];
        const std::size_t groups = p.phases.front().size();
        std::string shown;
        for (std::size_t g = 0; g < groups; ++g)
          shown += client.get(fmt::format("ts.{}.sg.{}.state", p.id, g)).get<std::string>();
        const std::string& want = p.phases[next_phase(p, shown, last[i])];
        for (std::size_t g = 0; g < groups; ++g)
          client.set(fmt::format("ts.{}.sg.{}.state", p.id, g), std::string(1, want[g]));
        if (spec.id == Workload::W2) {
          for (const auto& l : p.lanes) client.get(fmt::format("lane.{}.queue", l));
          for (const auto& l : p.links) client.get(fmt::format("link.{}.delay", l));
        }
      }
      if (spec.id == Workload::W2) client.get("net.total_delay");
    }
    client.step(1);
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  calls = client.counter().total_calls;
  if (calls != transport->server().counter().total_calls)
    throw Error("CounterMismatch", "client and server call counters disagree");
  client.bye();
  return secs;
}

double run_facade(const WorkloadSpec& spec, const ScenarioConfig& cfg, std::uint64_t seed, std::int64_t steps,
                  std::int64_t every, std::int64_t& calls) {
  Facade f(spec.transport);
  f.start(cfg, seed);
  auto progs = programs_of(f.topology());
  std::vector<std::size_t> last(progs.size(), 0);

  auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t k = 0; k < steps; ++k) {
    if (spec.id != Workload::W0 && k % every == 0) {
      for (std::size_t i = 0; i < progs.size(); ++i) {
        const Program& p = progs[i];
        std::string shown = f.sc_get_ts_phase(p.id);
        f.sc_set_ts_phase(p.id, p.phases[next_phase(p, shown, last[i])]);
        if (spec.id == Workload::W2) {
          f.eval_ts(p.id);
          f.eval_approach_delay(p.id);
          f.eval_boundary(p.id);
        }
      }
      if (spec.id == Workload::W2) f.eval_totals();
    }
    f.step();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  calls = f.counter().total_calls;
  if (calls != f.server_counter().total_calls)
    throw Error("CounterMismatch", "client and server call counters disagree");
  f.stop();
  return secs;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::int64_t expected_calls(const WorkloadSpec& spec) {
  ScenarioConfig cfg = bench_config(spec);
  const std::int64_t steps = cfg.sim.total_steps();
  const auto every = static_cast<std::int64_t>(std::llround(spec.decision_every * spec.sim_res));
  const std::int64_t decisions = spec.id == Workload::W0 ? 0 : (steps + every - 1) / every;
  std::int64_t per = 0;
  for (const auto& in : cfg.network.intersections) {
    int groups = in.group_count();
    int lanes = 0;
    std::vector<std::string> links;
    for (const auto& m : in.movements)
      if (std::find(links.begin(), links.end(), m.approach_link) == links.end()) links.push_back(m.approach_link);
    int entries = 0;
    for (const auto& l : links) {
      lanes += cfg.find_link(l)->lanes;
      for (const auto& d : cfg.demands)
        if (d.entry_link == l) ++entries;
    }
    if (spec.mode == BusMode::Raw) {
      per += 2 * groups;
      if (spec.id == Workload::W2) per += lanes + static_cast<int>(links.size());
    } else {
      per += 2;
      if (spec.id == Workload::W2) per += 2 + (entries > 0 ? 1 : 0);
    }
  }
  if (spec.id == Workload::W2) per += 1;
  return steps + decisions * per;
}

BenchReport run_workload(const WorkloadSpec& spec, int runs) {
  ScenarioConfig cfg = bench_config(spec);
  BenchReport r;
  r.spec = spec;
  r.steps = cfg.sim.total_steps();
  const auto every = static_cast<std::int64_t>(std::llround(spec.decision_every * spec.sim_res));
  std::vector<double> lat_ms;
  for (int run = 0; run < runs; ++run) {
    std::int64_t calls = 0;
    double secs = spec.mode == BusMode::Raw ? run_raw(spec, cfg, spec.seed + run, r.steps, every, calls)
                                            : run_facade(spec, cfg, spec.seed + run, r.steps, every, calls);
    r.run_seconds.push_back(secs);
    r.run_calls.push_back(calls);
    lat_ms.push_back(secs / static_cast<double>(r.steps) * 1000.0);
  }
  r.latency_ms_mean = mean(lat_ms);
  r.latency_ms_sd = sample_sd(lat_ms);
  r.steps_per_s = r.latency_ms_mean > 0 ? 1000.0 / r.latency_ms_mean : 0.0;
  r.bus_calls = r.run_calls.empty() ? 0 : r.run_calls.front();
  return r;
}

Comparison compare(const BenchReport& raw, const BenchReport& facade) {
  if (raw.spec.id != facade.spec.id || raw.spec.transport != facade.spec.transport)
    throw WorkloadMismatch(fmt::format("cannot compare {}/{} with {}/{}", workload_name(raw.spec.id),
                                       bus::transport_name(raw.spec.transport), workload_name(facade.spec.id),
                                       bus::transport_name(facade.spec.transport)));
  Comparison c;
  c.overhead_pct = (facade.latency_ms_mean - raw.latency_ms_mean) / raw.latency_ms_mean * 100.0;
  c.throughput_ratio = facade.steps_per_s / raw.steps_per_s;
  c.call_reduction_pct =
      static_cast<double>(raw.bus_calls - facade.bus_calls) / static_cast<double>(raw.bus_calls) * 100.0;
  return c;
}

std::string bench_csv_header() { return "workload,mode,transport,latency_ms_mean,latency_ms_sd,steps_per_s,bus_calls\n"; }

std::string bench_csv_row(const BenchReport& r) {
  return fmt::format("{},{},{},{:.6f},{:.6f},{:.1f},{}\n", workload_name(r.spec.id), mode_name(r.spec.mode),
                     bus::transport_name(r.spec.transport), r.latency_ms_mean, r.latency_ms_sd, r.steps_per_s,
                     r.bus_calls);
}

}  // namespace tsc
