#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <tuple>

#include "tsc/rlenv.hpp"

using namespace tsc;
using namespace tsc::rl;

namespace {

EnvConfig make_cfg(json j) {
  j["log_to_console"] = false;
  return EnvConfig::from_json(j);
}

json action(const char* cls, json args = json::object()) { return {{"class", cls}, {"args", args}}; }

std::map<std::string, double> all(const Env& env, double a) {
  std::map<std::string, double> m;
  for (auto& id : env.active_agents()) m[id] = a;
  return m;
}

}  // namespace

TEST(RlEnv, Defaults) {
  EnvConfig c;
  EXPECT_EQ(c.action_config.cls, "SwitchNextOrNot");
  EXPECT_EQ(c.observation_config.cls, "DefaultObservationFunction");
  EXPECT_EQ(c.reward_config.cls, "DefaultRewardFunction");
  EXPECT_FALSE(c.single_agent);
  EXPECT_EQ(c.logger.log_level, "INFO");
  EXPECT_TRUE(c.logger.log_to_console);
  EXPECT_FALSE(c.logger.log_to_file);
  RewardWeights w;
  EXPECT_DOUBLE_EQ(w.w_itwt, -0.0001);
  EXPECT_DOUBLE_EQ(w.w_btwt, -0.0001);
  EXPECT_DOUBLE_EQ(w.w_throughput, 0.01);
  EXPECT_DOUBLE_EQ(w.w_speed, 0.001);
}

TEST(RlEnv, AgentCounts) {
  Env s(make_cfg({{"scenario", "single"}, {"single_agent", true}}));
  EXPECT_EQ(s.agents().size(), 1u);
  Env a(make_cfg({{"scenario", "arterial3"}, {"ctrl_intersections", "all"}}));
  EXPECT_EQ(a.agent_ids(), (std::vector<std::string>{"1", "2", "3"}));
  EXPECT_THROW(Env(make_cfg({{"scenario", "arterial3"}, {"single_agent", true}})), ConfigError);
  Env one(make_cfg({{"scenario", "arterial3"}, {"ctrl_intersections", {"2"}}, {"single_agent", true}}));
  EXPECT_EQ(one.agent_ids(), (std::vector<std::string>{"2"}));
}

TEST(RlEnv, ConfigErrors) {
  EXPECT_THROW(make_cfg({{"sceanrio", "single"}}), ConfigError);
  EXPECT_THROW(make_cfg({{"single_agent", "yes"}}), ConfigError);
  EXPECT_THROW(make_cfg({{"ctrl_intersections", "some"}}), ConfigError);
  EXPECT_THROW(Env(make_cfg({{"scenario", "grid"}})), ParseError);  // neither a preset nor a file
  EXPECT_THROW(Env(make_cfg({{"action_config", action("Teleport")}})), ConfigError);
  EXPECT_THROW(Env(make_cfg({{"action_config", action("SwitchNextOrNot", {{"bogus", 1}})}})), ConfigError);
  EXPECT_THROW(Env(make_cfg({{"reward_config", action("DefaultRewardFunction", {{"w_fun", 1}})}})), ConfigError);
  EXPECT_THROW(Env(make_cfg({{"ctrl_intersections", {"9"}}})), ConfigError);
  EXPECT_THROW(Env(make_cfg({{"log_level", "LOUD"}})), ConfigError);
  EXPECT_THROW(Env(make_cfg({{"start_time", 5000.0}})), ValidationError);
}

TEST(RlEnv, ConfigRoundTrip) {
  auto c = make_cfg({{"scenario", "arterial3"}, {"min_green", 8.0}, {"action_config", action("ChooseNextPhase")}});
  auto back = EnvConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_DOUBLE_EQ(back.resolved_scenario().timing.min_green, 8.0);
}

TEST(RlEnv, ResetLayoutSingle) {
  Env env(make_cfg({{"scenario", "single"}, {"single_agent", true}}));
  auto obs = env.reset_single();
  EXPECT_DOUBLE_EQ(env.sim().clock(), 600.0);
  EXPECT_EQ(obs.size(), 4u + 1 + 8 + 8 + 1);
  EXPECT_EQ(env.observation_size("1"), 22u);
  EXPECT_EQ(env.action_space("1"), (ActionSpace{true, 2}));

  const auto& c = env.sim().controllers()[0];
  for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(obs[p], p == c.current_phase() ? 1.0 : 0.0);
  EXPECT_EQ(obs[4], c.min_green_met() ? 1.0 : 0.0);
  const auto& lanes = env.agents()[0].lanes;
  for (std::size_t k = 0; k < lanes.size(); ++k) {
    double cap = 21.0;
    EXPECT_DOUBLE_EQ(obs[5 + k], std::min(1.0, env.sim().lane_count(lanes[k]) / cap));
    EXPECT_DOUBLE_EQ(obs[13 + k], std::min(1.0, env.sim().lane_queue(lanes[k]) / cap));
  }
  double elapsed = std::min(1.0, (env.sim().clock() - c.last_change_time()) / 120.0);
  EXPECT_DOUBLE_EQ(obs[21], elapsed);
}

TEST(RlEnv, ResetLayoutArterial) {
  Env local(make_cfg({{"scenario", "arterial3"}}));
  auto r = local.reset();
  ASSERT_EQ(r.observations.size(), 3u);
  for (auto& [id, o] : r.observations) EXPECT_EQ(o.size(), 2u + 1 + 4 + 4 + 1) << id;

  Env global(make_cfg({{"scenario", "arterial3"}, {"observation_config", action("GlobalObservationFunction")}}));
  auto g = global.reset();
  std::vector<double> concat;
  for (auto& id : {"1", "2", "3"}) concat.insert(concat.end(), r.observations[id].begin(), r.observations[id].end());
  for (auto& [id, o] : g.observations) {
    EXPECT_EQ(o.size(), 36u);
    EXPECT_EQ(o, concat) << id;
  }
}

TEST(RlEnv, ResetIsDeterministic) {
  Env env(make_cfg({{"scenario", "arterial3"}}));
  auto a = env.reset(5).observations;
  env.step(all(env, 0));
  auto b = env.reset(5).observations;
  EXPECT_EQ(a, b);
  auto c = env.reset(6).observations;
  EXPECT_NE(a, c);
}

TEST(RlEnv, RewardArithmetic) {
  IntervalMetrics m;
  m.d_iwait = 100;
  m.d_bwait = 50;
  m.throughput = 10;
  m.speed = 10;
  EXPECT_NEAR(default_reward(m, RewardWeights{}), 0.095, 1e-12);
  EXPECT_EQ(default_reward(IntervalMetrics{}, RewardWeights{}), 0.0);
  RewardWeights zero{0, 0, 0, 0, 0, 0};
  EXPECT_EQ(default_reward(m, zero), 0.0);
  m.d_delay = 7;
  m.d_travel_time = 3;
  RewardWeights extra;
  extra.w_delay = -0.5;
  extra.w_travel_time = 1.0;
  EXPECT_NEAR(default_reward(m, extra), 0.095 - 3.5 + 3.0, 1e-12);
}

TEST(RlEnv, RewardLinearInWeights) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 500);
  for (int i = 0; i < 200; ++i) {
    IntervalMetrics m{u(gen), u(gen), std::floor(u(gen) / 10), u(gen) / 40, u(gen), u(gen), 5.0};
    RewardWeights w{-u(gen) / 1e4, -u(gen) / 1e4, u(gen) / 1e3, u(gen) / 1e3, -u(gen) / 1e4, -u(gen) / 1e4};
    for (double a : {0.0, 0.5, 2.0, -3.0, 1e3})
      EXPECT_NEAR(default_reward(m, w.scaled(a)), a * default_reward(m, w), 1e-12 * (1 + std::fabs(a)));
  }
}

TEST(RlEnv, RewardWeightsFromJson) {
  auto w = RewardWeights::from_json({{"w_itwt", -1.0}, {"w_speed", 0.5}});
  EXPECT_EQ(w.w_itwt, -1.0);
  EXPECT_EQ(w.w_speed, 0.5);
  EXPECT_EQ(w.w_throughput, 0.01);
  EXPECT_THROW(RewardWeights::from_json({{"w_itwt", "x"}}), ConfigError);
}

TEST(RlEnv, KeepAdvancesFiveSecondsWithoutChange) {
  Env env(make_cfg({{"scenario", "arterial3"}}));
  env.reset();
  for (int k = 0; k < 10; ++k) {
    double t0 = env.sim().clock();
    std::vector<std::size_t> hist;
    for (auto& c : env.sim().controllers()) hist.push_back(c.history().size());
    std::vector<bool> green;
    for (auto& c : env.sim().controllers()) green.push_back(c.stage() == Stage::Green);
    env.step(all(env, 0));
    EXPECT_NEAR(env.sim().clock() - t0, 5.0, 1e-9);
    for (std::size_t i = 0; i < hist.size(); ++i)
      if (green[i]) EXPECT_EQ(env.sim().controllers()[i].history().size(), hist[i]) << "step " << k;
  }
}

TEST(RlEnv, SwitchProducesOneTransition) {
  Env env(make_cfg({{"scenario", "arterial3"}, {"ctrl_intersections", {"1"}}, {"single_agent", true}}));
  env.reset_single();
  const Controller& c = env.sim().controllers()[0];
  while (!(c.stage() == Stage::Green && c.min_green_met())) env.step_single(0);
  std::size_t from = c.current_phase();
  std::size_t h0 = c.history().size();
  env.step_single(1);
  EXPECT_EQ(c.stage(), Stage::Green);
  EXPECT_EQ(c.current_phase(), (from + 1) % 2);
  ASSERT_EQ(c.history().size(), h0 + 3);
  EXPECT_EQ(c.history()[h0].stage, Stage::Yellow);
  EXPECT_EQ(c.history()[h0 + 1].stage, Stage::AllRed);
  EXPECT_EQ(c.history()[h0 + 2].stage, Stage::Green);
  // switching again right away falls inside min green: deferred, one transition only
  env.step_single(1);
  env.step_single(1);
  EXPECT_EQ(c.current_phase(), from);
}

TEST(RlEnv, KeepUntilMaxGreenForcesTransition) {
  Env env(make_cfg({{"scenario", "single"}, {"single_agent", true}}));
  env.reset_single();
  const Controller& c = env.sim().controllers()[0];
  std::size_t p = c.current_phase();
  int steps = 0;
  while (c.current_phase() == p && steps < 40) {
    env.step_single(0);
    ++steps;
  }
  EXPECT_NE(c.current_phase(), p);
  EXPECT_LE(steps * 5.0, 120.0 + 10.0 + 5.0);
}

TEST(RlEnv, ChooseAction) {
  Env env(make_cfg({{"scenario", "single"}, {"single_agent", true}, {"action_config", action("ChooseNextPhase")}}));
  env.reset_single();
  EXPECT_EQ(env.action_space("1"), (ActionSpace{true, 4}));
  EXPECT_THROW(env.step_single(7), OutOfSpaceAction);
  EXPECT_THROW(env.step_single(1.5), OutOfSpaceAction);
  const Controller& c = env.sim().controllers()[0];
  while (!(c.stage() == Stage::Green && c.min_green_met())) env.step_single(c.current_phase());
  std::size_t target = (c.current_phase() + 2) % 4;
  env.step_single(static_cast<double>(c.current_phase()));
  EXPECT_EQ(c.stage(), Stage::Green);
  env.step_single(static_cast<double>(target));
  EXPECT_EQ(c.current_phase(), target);
  EXPECT_TRUE(c.at_green_onset());
}

TEST(RlEnv, DurationAction) {
  Env env(make_cfg({{"scenario", "single"}, {"single_agent", true}, {"action_config", action("SetPhaseDuration")}}));
  env.reset_single();
  auto sp = env.action_space("1");
  EXPECT_FALSE(sp.discrete);
  EXPECT_THROW(env.step_single(1.5), OutOfSpaceAction);
  env.step_single(0.0);  // first decision lands mid-green; afterwards every decision is a green onset
  const Controller& c = env.sim().controllers()[0];
  ASSERT_TRUE(c.at_green_onset());
  for (double a : {0.0, 1.0, 0.5, 0.2}) {
    double t0 = env.sim().clock();
    env.step_single(a);
    double d = 5.0 + a * 115.0;
    if (a == 0.5) EXPECT_DOUBLE_EQ(d, 62.5);
    EXPECT_NEAR(env.sim().clock() - t0, d + 3.0 + 2.0, 1e-9) << a;
    EXPECT_TRUE(c.at_green_onset());
  }
}

TEST(RlEnv, DurationBins) {
  Env env(make_cfg({{"scenario", "single"},
                    {"single_agent", true},
                    {"action_config", action("SetPhaseDuration", {{"bins", true}})}}));
  env.reset_single();
  EXPECT_EQ(env.action_space("1"), (ActionSpace{true, 24}));
  EXPECT_THROW(env.step_single(24), OutOfSpaceAction);
}

TEST(RlEnv, DurationMasksInactiveAgents) {
  Env env(make_cfg({{"scenario", "dayuan5"}, {"action_config", action("SetPhaseDuration")}}));
  env.reset();
  env.step(all(env, 0.3));
  for (int k = 0; k < 20; ++k) {
    auto active = env.active_agents();
    ASSERT_FALSE(active.empty());
    for (auto& id : active) EXPECT_TRUE(env.sim().controllers()[env.sim().intersection_index(id)].at_green_onset());
    auto r = env.step(all(env, 0.3));
    EXPECT_EQ(r.observations.size(), r.rewards.size());
    std::map<std::string, double> missing;
    if (!env.active_agents().empty()) EXPECT_THROW(env.step(missing), MissingAgentAction);
  }
}

TEST(RlEnv, ProtocolShapeAndTruncation) {
  Env env(make_cfg({{"scenario", "arterial3"}, {"sim_period", 700.0}}));
  env.reset();
  std::mt19937 gen(1);
  int steps = 0;
  while (!env.done()) {
    std::map<std::string, double> act;
    for (auto& id : env.active_agents()) act[id] = gen() % 2;
    auto r = env.step(act);
    ++steps;
    ASSERT_EQ(r.observations.size(), 3u);
    for (auto& [id, o] : r.observations) {
      ASSERT_TRUE(r.rewards.count(id));
      ASSERT_TRUE(r.terminated.count(id));
      ASSERT_TRUE(r.truncated.count(id));
      ASSERT_TRUE(r.infos.count(id));
      EXPECT_EQ(o.size(), 12u);
      for (double x : o) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
      EXPECT_FALSE(r.terminated.at(id));
      EXPECT_EQ(r.truncated.at(id), env.done());
    }
  }
  EXPECT_EQ(steps, 20);
  EXPECT_DOUBLE_EQ(env.sim().clock(), 700.0);
  EXPECT_THROW(env.step(all(env, 0)), EpisodeOver);
}

TEST(RlEnv, UnresetStepFails) {
  Env env(make_cfg({{"scenario", "single"}}));
  EXPECT_THROW(env.step({{"1", 0}}), EpisodeOver);
}

TEST(RlEnv, ScriptedRunsAreIdentical) {
  auto run = [] {
    Env env(make_cfg({{"scenario", "arterial3"}, {"sim_period", 900.0}}));
    env.reset(3);
    std::vector<EnvStep> out;
    int k = 0;
    while (!env.done()) {
      out.push_back(env.step(all(env, (k++ % 3 == 0) ? 1 : 0)));
    }
    return out;
  };
  auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].observations, b[i].observations);
    EXPECT_EQ(a[i].rewards, b[i].rewards);
    EXPECT_EQ(a[i].totals, b[i].totals);
  }
}

TEST(RlEnv, RewardMatchesIntervalMetrics) {
  // The single-agent reward equals the weighted increments read straight off the engine.
  Env env(make_cfg({{"scenario", "single"}, {"single_agent", true}}));
  env.reset_single(8);
  const auto& a = env.agents()[0];
  auto read = [&] {
    const Simulation& s = env.sim();
    double iw = 0, bw = 0;
    for (int l : a.lanes) iw += s.lane_iwait(l);
    for (int e : a.entries) bw += s.boundary_queues()[e].waiting_boundary;
    return std::make_tuple(iw, bw, s.crossings(a.intersection), s.approach_speed_integral(a.intersection));
  };
  for (int k = 0; k < 30; ++k) {
    auto [iw0, bw0, c0, sp0] = read();
    auto r = env.step_single(k % 4 == 0);
    auto [iw1, bw1, c1, sp1] = read();
    double expect = -0.0001 * (iw1 - iw0) - 0.0001 * (bw1 - bw0) + 0.01 * (c1 - c0) + 0.001 * (sp1 - sp0) / 5.0;
    EXPECT_NEAR(r.reward, expect, 1e-9);
    EXPECT_EQ(r.info.crossings, c1 - c0);
  }
}

namespace {

class ConstantObservation : public ObservationFunction {
 public:
  std::size_t size(const Env&, const AgentView&) const override { return 3; }
  std::vector<double> observe(const Env&, const AgentView&) const override { return {0.25, 0.5, 0.75}; }
};

}  // namespace

TEST(RlEnv, CustomObservationRegistered) {
  register_observation("ConstantObservation", [](const json&) { return std::make_unique<ConstantObservation>(); });
  Env env(make_cfg({{"scenario", "single"}, {"observation_config", action("ConstantObservation")}}));
  auto r = env.reset();
  EXPECT_EQ(r.observations["1"], (std::vector<double>{0.25, 0.5, 0.75}));
}
