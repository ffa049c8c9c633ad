#include "tsc/agents.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace tsc::agents {

FixedTimePlan FixedTimePlan::from_scenario(const ScenarioConfig& cfg) {
  FixedTimePlan plan;
  for (const auto& prog : cfg.signals) {
    Entry e;
    for (const auto& p : prog.phases) e.greens.push_back(p.default_green);
    plan.intersections[prog.intersection] = std::move(e);
  }
  return plan;
}

namespace {

double cycle_of(const FixedTimePlan::Entry& e, const Timing& t) {
  double c = 0.0;
  for (double g : e.greens) c += g;
  if (e.greens.size() > 1) c += static_cast<double>(e.greens.size()) * (t.yellow_time + t.allred_time);
  return c;
}

}  // namespace

double FixedTimePlan::cycle(const std::string& id, const Timing& t) const {
  auto it = intersections.find(id);
  if (it == intersections.end()) throw PlanMismatch(fmt::format("plan has no entry for intersection '{}'", id));
  return cycle_of(it->second, t);
}

void check_plan(const FixedTimePlan& plan, const ScenarioConfig& cfg) {
  for (const auto& [id, e] : plan.intersections) {
    const SignalProgram* prog = cfg.find_program(id);
    if (!prog) throw PlanMismatch(fmt::format("plan names unknown intersection '{}'", id));
    if (e.greens.size() != prog->phases.size())
      throw PlanMismatch(fmt::format("plan for '{}' has {} greens, program has {} phases", id, e.greens.size(),
                                     prog->phases.size()));
    for (double g : e.greens)
      if (g < cfg.timing.min_green || g > cfg.timing.max_green)
        throw PlanMismatch(fmt::format("green {} s for '{}' is outside [{}, {}]", g, id, cfg.timing.min_green,
                                       cfg.timing.max_green));
    if (e.offset < 0) throw PlanMismatch(fmt::format("negative offset for '{}'", id));
  }
  for (const auto& prog : cfg.signals)
    if (!plan.intersections.count(prog.intersection))
      throw PlanMismatch(fmt::format("plan does not cover intersection '{}'", prog.intersection));
}

int fixed_time_action(const FixedTimePlan::Entry& plan, const Controller& c, double clock) {
  if (plan.greens.size() != c.phase_count())
    throw PlanMismatch(fmt::format("plan has {} greens, controller {} has {} phases", plan.greens.size(), c.id(),
                                   c.phase_count()));
  if (c.stage() != Stage::Green || c.phase_count() < 2) return 0;
  const Timing& t = c.timing();
  const double cycle = cycle_of(plan, t);
  double tau = std::fmod(clock - plan.offset, cycle);
  if (tau < 0) tau += cycle;
  const double eps = 0.5 / c.sim_res();
  double start = 0.0;
  for (std::size_t i = 0; i < plan.greens.size(); ++i) {
    double end = start + plan.greens[i];
    if (tau + eps >= start && tau + eps < end) return i == c.current_phase() ? 0 : 1;
    start = end + t.yellow_time + t.allred_time;
  }
  return 1;  // plan is in an intergreen: the shown green is over
}

void install_plan(Simulation& sim, const FixedTimePlan& plan) {
  check_plan(plan, sim.config());
  for (auto& c : sim.controllers()) {
    const auto& e = plan.intersections.at(c.id());
    for (std::size_t p = 0; p < e.greens.size(); ++p) c.set_default_green(p, e.greens[p]);
    c.align_to_cycle(-e.offset);
  }
}

double arterial_delay(const Simulation& sim) {
  const ScenarioConfig& cfg = sim.config();
  auto horizontal = [&](int link) {
    const Link& l = cfg.network.links[link];
    return cfg.find_node(l.from_node)->y == cfg.find_node(l.to_node)->y;
  };
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& t : sim.trips())
    if (t.entered_time >= cfg.sim.start_time && horizontal(t.entry_link) && horizontal(t.exit_link)) {
      sum += t.delay;
      ++n;
    }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

BaselineResult run_fixed_time(const ScenarioConfig& cfg, const FixedTimePlan& plan, std::uint64_t seed,
                              Simulation* out) {
  Simulation sim(cfg, seed);
  install_plan(sim, plan);
  sim.run_until(cfg.sim.start_time);
  const double d0 = sim.total_delay();
  const double w0 = sim.total_iwaiting_time() + sim.total_bwaiting_time();
  const std::int64_t s0 = sim.spawned();
  const std::int64_t a0 = sim.total_arrived();
  while (sim.step_index() < sim.total_steps()) sim.step();

  BaselineResult r;
  r.metrics.total_delay = sim.total_delay() - d0;
  r.metrics.spawned = sim.spawned() - s0;
  r.metrics.arrived = sim.total_arrived() - a0;
  if (r.metrics.spawned > 0) {
    r.metrics.mean_delay = r.metrics.total_delay / static_cast<double>(r.metrics.spawned);
    r.metrics.mean_waiting =
        (sim.total_iwaiting_time() + sim.total_bwaiting_time() - w0) / static_cast<double>(r.metrics.spawned);
  }
  r.arterial_delay = arterial_delay(sim);
  if (out) *out = std::move(sim);
  return r;
}

std::vector<std::vector<std::size_t>> greedy_layout(const rl::Env& env, const std::string& agent_id) {
  const rl::AgentView* agent = nullptr;
  for (const auto& a : env.agents())
    if (a.id == agent_id) agent = &a;
  if (!agent) throw UnknownIntersection(fmt::format("'{}' is not a controlled intersection", agent_id));
  const Simulation probe(env.scenario());
  const IntersectionInfo& in = probe.intersections()[agent->intersection];
  const auto& program = probe.controllers()[agent->intersection].program();
  const std::size_t phases = program.size();
  const std::size_t L = agent->lanes.size();

  std::vector<std::vector<std::size_t>> layout(phases);
  for (std::size_t p = 0; p < phases; ++p) {
    for (const auto& m : in.movements) {
      if (program[p].state[m.group] != 'G') continue;
      int gl = probe.links()[m.approach_link].first_lane + m.approach_lane;
      auto it = std::find(agent->lanes.begin(), agent->lanes.end(), gl);
      std::size_t idx = phases + 1 + L + static_cast<std::size_t>(it - agent->lanes.begin());
      if (std::find(layout[p].begin(), layout[p].end(), idx) == layout[p].end()) layout[p].push_back(idx);
    }
    std::sort(layout[p].begin(), layout[p].end());
  }
  return layout;
}

int greedy_longest_queue(const std::vector<double>& obs, const std::vector<std::vector<std::size_t>>& layout) {
  int best = 0;
  double best_sum = -1.0;
  for (std::size_t p = 0; p < layout.size(); ++p) {
    double s = 0.0;
    for (std::size_t i : layout[p]) s += obs.at(i);
    if (s > best_sum) {
      best_sum = s;
      best = static_cast<int>(p);
    }
  }
  return best;
}

int queue_bin(int queue) {
  if (queue <= 0) return 0;
  if (queue <= 3) return 1;
  if (queue <= 8) return 2;
  return 3;
}

std::uint64_t discretize(const std::vector<int>& lane_queues, std::size_t phase) {
  std::uint64_t key = phase;
  for (int q : lane_queues) key = key * 4 + static_cast<std::uint64_t>(queue_bin(q));
  return key;
}

std::uint64_t agent_state(const rl::Env& env, const rl::AgentView& agent) {
  std::vector<int> queues;
  queues.reserve(agent.lanes.size());
  for (int gl : agent.lanes) queues.push_back(env.sim().lane_queue(gl));
  return discretize(queues, env.sim().controllers()[agent.intersection].current_phase());
}

double QTable::value(std::uint64_t s, int a) const {
  auto it = table_.find(s);
  return it == table_.end() ? 0.0 : it->second[a];
}

std::vector<double>& QTable::row(std::uint64_t s) {
  auto it = table_.find(s);
  if (it == table_.end()) it = table_.emplace(s, std::vector<double>(actions_, 0.0)).first;
  return it->second;
}

double QTable::max_value(std::uint64_t s) const {
  auto it = table_.find(s);
  if (it == table_.end()) return 0.0;
  return *std::max_element(it->second.begin(), it->second.end());
}

int QTable::best_action(std::uint64_t s) const {
  auto it = table_.find(s);
  if (it == table_.end()) return 0;
  return static_cast<int>(std::max_element(it->second.begin(), it->second.end()) - it->second.begin());
}

void q_update(QTable& q, std::uint64_t s, int a, double r, std::uint64_t s_next, const QParams& p) {
  double target = r + p.gamma * q.max_value(s_next);
  double& v = q.row(s)[a];
  v += p.alpha * (target - v);
}

double epsilon_at(const QParams& p, int episode, int episodes) {
  if (episodes <= 1) return p.eps_end;
  double f = static_cast<double>(episode) / static_cast<double>(episodes - 1);
  return p.eps_start + (p.eps_end - p.eps_start) * std::clamp(f, 0.0, 1.0);
}

TrainResult q_train(rl::Env& env, int episodes, const QParams& p, std::uint64_t traffic_seed,
                    std::uint64_t agent_seed) {
  if (!env.config().single_agent) throw ConfigError("q_train needs a single-agent environment");
  if (env.config().action_config.cls != "SwitchNextOrNot") throw ConfigError("q_train needs SwitchNextOrNot actions");
  TrainResult out;
  SplitMix64 rng(agent_seed);
  const rl::AgentView& agent = env.agents().front();
  for (int ep = 0; ep < episodes; ++ep) {
    const double eps = epsilon_at(p, ep, episodes);
    env.reset_single(traffic_seed + static_cast<std::uint64_t>(ep));
    std::uint64_t s = agent_state(env, agent);
    double ret = 0.0;
    while (true) {
      int a = rng.uniform() < eps ? static_cast<int>(rng.next() % 2) : out.table.best_action(s);
      auto st = env.step_single(a);
      std::uint64_t s2 = agent_state(env, agent);
      q_update(out.table, s, a, st.reward, s2, p);
      ret += st.reward;
      s = s2;
      if (st.truncated || st.terminated) break;
    }
    rl::EpisodeMetrics m = env.episode_metrics();
    out.curve.push_back({ep, m.mean_delay, m.mean_waiting, ret});
  }
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "episode,mean_delay,mean_waiting,return\n";
  for (const auto& c : curve) out += fmt::format("{},{:.6f},{:.6f},{:.6f}\n", c.episode, c.mean_delay, c.mean_waiting, c.ret);
  return out;
}

}  // namespace tsc::agents
