#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsc/engine.hpp"

namespace spdlog {
class logger;
}

namespace tsc::rl {

using json = nlohmann::json;

struct ElementConfig {
  std::string cls;
  json args = json::object();
};

struct LoggerConfig {
  // "all", none (empty list) or a list of logger names
  std::vector<std::string> enable_loggers = {"tsc.rlenv"};
  std::string log_dir = "logs";
  std::string log_suffix = "tscrl";
  bool log_to_file = false;
  bool log_to_console = true;
  std::string log_level = "INFO";
};

struct EnvConfig {
  std::string scenario = "single";              // preset name or .scn path
  std::optional<ScenarioConfig> scenario_cfg;   // takes precedence over `scenario`
  std::optional<double> start_time;
  std::optional<double> sim_period;
  std::optional<int> sim_res;
  std::optional<std::uint64_t> seed;
  std::optional<double> yellow_time;
  std::optional<double> intergreen_time;
  std::optional<double> min_green;
  std::optional<double> max_green;
  bool single_agent = false;
  std::vector<std::string> ctrl_intersections;  // empty = all
  ElementConfig observation_config{"DefaultObservationFunction"};
  ElementConfig action_config{"SwitchNextOrNot"};
  ElementConfig reward_config{"DefaultRewardFunction"};
  LoggerConfig logger;

  // Throws ConfigError on unknown keys or ill-typed values.
  static EnvConfig from_json(const json& j);
  json to_json() const;
  // The scenario with every override applied.
  ScenarioConfig resolved_scenario() const;
};

// Metric increments over one agent's decision interval.
struct IntervalMetrics {
  double d_iwait = 0.0;        // s, on the agent's approach lanes
  double d_bwait = 0.0;        // s, at entries feeding the agent
  double throughput = 0.0;     // stop-line crossings
  double speed = 0.0;          // m/s, time-averaged mean over approach lanes
  double d_delay = 0.0;        // s, on approach links
  double d_travel_time = 0.0;  // s, network-wide
  double duration = 0.0;       // s
};

struct RewardWeights {
  double w_itwt = -0.0001;
  double w_btwt = -0.0001;
  double w_throughput = 0.01;
  double w_speed = 0.001;
  double w_delay = 0.0;
  double w_travel_time = 0.0;

  static RewardWeights from_json(const json& args);
  RewardWeights scaled(double a) const;
};

double default_reward(const IntervalMetrics& m, const RewardWeights& w);

struct ActionSpace {
  bool discrete = true;
  int n = 0;  // discrete size
  double low = 0.0;
  double high = 1.0;
  bool operator==(const ActionSpace&) const = default;
};

class Env;

// Read-only view of one controlled intersection.
struct AgentView {
  std::string id;
  int intersection = -1;
  std::vector<int> lanes;    // approach lanes (global indices)
  std::vector<int> links;    // approach links
  std::vector<int> entries;  // boundary queues feeding this intersection
};

class ObservationFunction {
 public:
  virtual ~ObservationFunction() = default;
  virtual std::size_t size(const Env& env, const AgentView& agent) const = 0;
  virtual std::vector<double> observe(const Env& env, const AgentView& agent) const = 0;
};

class ActionFunction {
 public:
  virtual ~ActionFunction() = default;
  virtual ActionSpace space(const Controller& c) const = 0;
  // Translates an action into controller commands. Throws OutOfSpaceAction.
  virtual void apply(Controller& c, double action) const = 0;
  // Event-driven classes decide only at green onsets.
  virtual bool event_driven() const { return false; }
  virtual double delta_time() const { return 5.0; }
};

class RewardFunction {
 public:
  virtual ~RewardFunction() = default;
  virtual double reward(const IntervalMetrics& m) const = 0;
};

using ObservationFactory = std::function<std::unique_ptr<ObservationFunction>(const json& args)>;
using ActionFactory = std::function<std::unique_ptr<ActionFunction>(const json& args)>;
using RewardFactory = std::function<std::unique_ptr<RewardFunction>(const json& args)>;

// Name registries; built-ins are registered on first use.
void register_observation(const std::string& name, ObservationFactory f);
void register_action(const std::string& name, ActionFactory f);
void register_reward(const std::string& name, RewardFactory f);
std::unique_ptr<ObservationFunction> make_observation(const ElementConfig& c);
std::unique_ptr<ActionFunction> make_action(const ElementConfig& c);
std::unique_ptr<RewardFunction> make_reward(const ElementConfig& c);

// Layout [phase one-hot | min_green_met | density per lane | queue per lane | elapsed].
std::vector<double> local_observation(const Env& env, const AgentView& agent);
std::size_t local_observation_size(const Env& env, const AgentView& agent);

class DefaultRewardFunction : public RewardFunction {
 public:
  explicit DefaultRewardFunction(RewardWeights w = {}) : w_(w) {}
  double reward(const IntervalMetrics& m) const override { return default_reward(m, w_); }
  const RewardWeights& weights() const { return w_; }

 private:
  RewardWeights w_;
};

struct AgentInfo {
  double queue_sum = 0.0;
  std::int64_t crossings = 0;
  double d_iwait = 0.0;
  double d_bwait = 0.0;
};

using Obs = std::map<std::string, std::vector<double>>;

struct ResetResult {
  Obs observations;
  std::map<std::string, AgentInfo> infos;
};

struct EnvStep {
  Obs observations;
  std::map<std::string, double> rewards;
  std::map<std::string, bool> terminated;
  std::map<std::string, bool> truncated;
  std::map<std::string, AgentInfo> infos;
  MetricsSnapshot totals;
};

// Post-warm-up episode summary.
struct EpisodeMetrics {
  double mean_delay = 0.0;    // delay accrued after warm-up per vehicle spawned after warm-up
  double mean_waiting = 0.0;  // (internal + boundary waiting) per vehicle spawned after warm-up
  double total_delay = 0.0;
  std::int64_t spawned = 0;
  std::int64_t arrived = 0;
};

class Env {
 public:
  explicit Env(EnvConfig cfg);
  ~Env();
  Env(Env&&) noexcept;
  Env& operator=(Env&&) noexcept;

  ResetResult reset(std::optional<std::uint64_t> seed = std::nullopt);
  EnvStep step(const std::map<std::string, double>& actions);

  // Single-agent convenience (requires single_agent).
  std::vector<double> reset_single(std::optional<std::uint64_t> seed = std::nullopt);
  struct SingleStep {
    std::vector<double> observation;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
    AgentInfo info;
  };
  SingleStep step_single(double action);

  const EnvConfig& config() const { return cfg_; }
  const ScenarioConfig& scenario() const { return scenario_; }
  const std::vector<AgentView>& agents() const { return agents_; }
  std::vector<std::string> agent_ids() const;
  // Agents expected in the next step() call.
  std::vector<std::string> active_agents() const;
  std::size_t observation_size(const std::string& agent) const;
  ActionSpace action_space(const std::string& agent) const;
  bool done() const { return done_; }
  bool was_reset() const { return sim_ != nullptr; }

  const Simulation& sim() const;
  Simulation& mutable_sim();
  EpisodeMetrics episode_metrics() const;
  const ActionFunction& action_function() const { return *action_; }

 private:
  struct Latch {
    double iwait = 0.0;
    double bwait = 0.0;
    std::int64_t crossings = 0;
    double speed_integral = 0.0;
    double delay = 0.0;
    double travel_time = 0.0;
    double clock = 0.0;
  };
  Latch latch(const AgentView& a) const;
  IntervalMetrics interval(const AgentView& a, const Latch& from) const;
  AgentInfo info_for(const AgentView& a, const IntervalMetrics& m) const;
  const AgentView& agent(const std::string& id) const;
  Obs observe(const std::vector<std::string>& ids) const;
  void update_active();

  EnvConfig cfg_;
  ScenarioConfig scenario_;
  std::vector<AgentView> agents_;
  std::unique_ptr<ObservationFunction> observation_;
  std::unique_ptr<ActionFunction> action_;
  std::unique_ptr<RewardFunction> reward_;
  std::unique_ptr<Simulation> sim_;
  std::vector<Latch> latches_;
  std::vector<bool> active_;
  bool done_ = false;
  double episode_start_delay_ = 0.0;
  double episode_start_iwait_ = 0.0;
  double episode_start_bwait_ = 0.0;
  std::int64_t episode_start_spawned_ = 0;
  std::int64_t episode_start_arrived_ = 0;
  std::shared_ptr<spdlog::logger> log_;
};

// Orders ids numerically when both are integers, lexicographically otherwise.
bool id_less(const std::string& a, const std::string& b);

}  // namespace tsc::rl
