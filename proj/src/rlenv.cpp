#include "tsc/rlenv.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace tsc::rl {

// ---------------------------------------------------------------- config

namespace {

template <typename T>
T typed(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config key '{}' has the wrong type ({})", key, j.dump()));
  }
}

ElementConfig element_from_json(const json& j, const char* key) {
  if (!j.is_object() || !j.contains("class") || !j["class"].is_string())
    throw ConfigError(fmt::format("'{}' must be an object with a string 'class'", key));
  ElementConfig e;
  e.cls = j["class"].get<std::string>();
  e.args = j.contains("args") ? j["args"] : json::object();
  if (!e.args.is_object()) throw ConfigError(fmt::format("'{}.args' must be an object", key));
  return e;
}

json element_to_json(const ElementConfig& e) { return {{"class", e.cls}, {"args", e.args}}; }

}  // namespace

EnvConfig EnvConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("environment config must be a JSON object");
  EnvConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "scenario") {
      c.scenario = typed<std::string>(v, "scenario");
    } else if (key == "start_time") {
      c.start_time = typed<double>(v, "start_time");
    } else if (key == "sim_period") {
      c.sim_period = typed<double>(v, "sim_period");
    } else if (key == "sim_res") {
      c.sim_res = typed<int>(v, "sim_res");
    } else if (key == "seed") {
      c.seed = typed<std::uint64_t>(v, "seed");
    } else if (key == "yellow_time") {
      c.yellow_time = typed<double>(v, "yellow_time");
    } else if (key == "intergreen_time") {
      c.intergreen_time = typed<double>(v, "intergreen_time");
    } else if (key == "min_green") {
      c.min_green = typed<double>(v, "min_green");
    } else if (key == "max_green") {
      c.max_green = typed<double>(v, "max_green");
    } else if (key == "single_agent") {
      c.single_agent = typed<bool>(v, "single_agent");
    } else if (key == "ctrl_intersections") {
      if (v.is_string()) {
        if (v != "all") throw ConfigError("ctrl_intersections must be \"all\" or a list of ids");
      } else {
        c.ctrl_intersections = typed<std::vector<std::string>>(v, "ctrl_intersections");
      }
    } else if (key == "observation_config") {
      c.observation_config = element_from_json(v, "observation_config");
    } else if (key == "action_config") {
      c.action_config = element_from_json(v, "action_config");
    } else if (key == "reward_config") {
      c.reward_config = element_from_json(v, "reward_config");
    } else if (key == "enable_loggers") {
      if (v.is_null()) {
        c.logger.enable_loggers.clear();
      } else if (v.is_string()) {
        c.logger.enable_loggers = {v.get<std::string>()};
      } else {
        c.logger.enable_loggers = typed<std::vector<std::string>>(v, "enable_loggers");
      }
    } else if (key == "log_dir") {
      c.logger.log_dir = typed<std::string>(v, "log_dir");
    } else if (key == "log_suffix") {
      c.logger.log_suffix = typed<std::string>(v, "log_suffix");
    } else if (key == "log_to_file") {
      c.logger.log_to_file = typed<bool>(v, "log_to_file");
    } else if (key == "log_to_console") {
      c.logger.log_to_console = typed<bool>(v, "log_to_console");
    } else if (key == "log_level") {
      c.logger.log_level = typed<std::string>(v, "log_level");
    } else {
      throw ConfigError(fmt::format("unknown environment config key '{}'", key));
    }
  }
  return c;
}

json EnvConfig::to_json() const {
  json j;
  j["scenario"] = scenario_cfg ? scenario_cfg->name : scenario;
  auto put = [&](const char* k, const auto& opt) {
    if (opt) j[k] = *opt;
  };
  put("start_time", start_time);
  put("sim_period", sim_period);
  put("sim_res", sim_res);
  put("seed", seed);
  put("yellow_time", yellow_time);
  put("intergreen_time", intergreen_time);
  put("min_green", min_green);
  put("max_green", max_green);
  j["single_agent"] = single_agent;
  j["ctrl_intersections"] = ctrl_intersections.empty() ? json("all") : json(ctrl_intersections);
  j["observation_config"] = element_to_json(observation_config);
  j["action_config"] = element_to_json(action_config);
  j["reward_config"] = element_to_json(reward_config);
  j["enable_loggers"] = logger.enable_loggers;
  j["log_dir"] = logger.log_dir;
  j["log_suffix"] = logger.log_suffix;
  j["log_to_file"] = logger.log_to_file;
  j["log_to_console"] = logger.log_to_console;
  j["log_level"] = logger.log_level;
  return j;
}

ScenarioConfig EnvConfig::resolved_scenario() const {
  ScenarioConfig s = scenario_cfg ? *scenario_cfg : resolve_scenario(scenario);
  if (start_time) s.sim.start_time = *start_time;
  if (sim_period) s.sim.sim_period = *sim_period;
  if (sim_res) s.sim.sim_res = *sim_res;
  if (seed) s.sim.seed = *seed;
  if (yellow_time) s.timing.yellow_time = *yellow_time;
  if (intergreen_time) {
    double allred = *intergreen_time - s.timing.yellow_time;
    if (allred < 0)
      throw ConfigError(fmt::format("intergreen_time {} is shorter than yellow_time {}", *intergreen_time,
                                    s.timing.yellow_time));
    s.timing.allred_time = allred;
  }
  if (min_green) s.timing.min_green = *min_green;
  if (max_green) s.timing.max_green = *max_green;
  return s;
}

// ---------------------------------------------------------------- reward

RewardWeights RewardWeights::from_json(const json& args) {
  RewardWeights w;
  const json& src = args.contains("weights") ? args["weights"] : args;
  for (const auto& [key, v] : src.items()) {
    std::string k = key.rfind("w_", 0) == 0 ? key.substr(2) : key;
    if (!v.is_number()) throw ConfigError(fmt::format("reward weight '{}' must be a number", key));
    double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(fmt::format("reward weight '{}' must be finite", key));
    if (k == "itwt") w.w_itwt = x;
    else if (k == "btwt") w.w_btwt = x;
    else if (k == "throughput") w.w_throughput = x;
    else if (k == "speed") w.w_speed = x;
    else if (k == "delay") w.w_delay = x;
    else if (k == "travel_time") w.w_travel_time = x;
    else throw ConfigError(fmt::format("unknown reward weight '{}'", key));
  }
  return w;
}

RewardWeights RewardWeights::scaled(double a) const {
  return {w_itwt * a, w_btwt * a, w_throughput * a, w_speed * a, w_delay * a, w_travel_time * a};
}

double default_reward(const IntervalMetrics& m, const RewardWeights& w) {
  // extended-precision accumulation, rounded once at the end
  long double r = static_cast<long double>(w.w_itwt) * m.d_iwait;
  r += static_cast<long double>(w.w_btwt) * m.d_bwait;
  r += static_cast<long double>(w.w_throughput) * m.throughput;
  r += static_cast<long double>(w.w_speed) * m.speed;
  r += static_cast<long double>(w.w_delay) * m.d_delay;
  r += static_cast<long double>(w.w_travel_time) * m.d_travel_time;
  return static_cast<double>(r);
}

// ---------------------------------------------------------------- elements

bool id_less(const std::string& a, const std::string& b) {
  auto numeric = [](const std::string& s) {
    return !s.empty() && s.size() < 18 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (numeric(a) && numeric(b)) return std::stoll(a) < std::stoll(b);
  return a < b;
}

std::size_t local_observation_size(const Env& env, const AgentView& agent) {
  const SignalProgram* prog = env.scenario().find_program(agent.id);
  return prog->phases.size() + 1 + 2 * agent.lanes.size() + 1;
}

std::vector<double> local_observation(const Env& env, const AgentView& agent) {
  const Simulation& sim = env.sim();
  const Controller& c = sim.controllers()[agent.intersection];
  std::vector<double> o;
  o.reserve(local_observation_size(env, agent));
  for (std::size_t p = 0; p < c.phase_count(); ++p) o.push_back(p == c.current_phase() ? 1.0 : 0.0);
  o.push_back(c.min_green_met() ? 1.0 : 0.0);
  for (int gl : agent.lanes) {
    double cap = sim.lanes()[gl].capacity;
    o.push_back(std::clamp(sim.lane_count(gl) / cap, 0.0, 1.0));
  }
  for (int gl : agent.lanes) {
    double cap = sim.lanes()[gl].capacity;
    o.push_back(std::clamp(sim.lane_queue(gl) / cap, 0.0, 1.0));
  }
  o.push_back(std::min(1.0, (sim.clock() - c.last_change_time()) / c.timing().max_green));
  return o;
}

namespace {

class LocalObservationFunction : public ObservationFunction {
 public:
  std::size_t size(const Env& env, const AgentView& a) const override { return local_observation_size(env, a); }
  std::vector<double> observe(const Env& env, const AgentView& a) const override { return local_observation(env, a); }
};

class GlobalObservationFunction : public ObservationFunction {
 public:
  std::size_t size(const Env& env, const AgentView&) const override {
    std::size_t n = 0;
    for (const auto& a : env.agents()) n += local_observation_size(env, a);
    return n;
  }
  std::vector<double> observe(const Env& env, const AgentView&) const override {
    std::vector<double> out;
    for (const auto& a : env.agents()) {
      auto o = local_observation(env, a);
      out.insert(out.end(), o.begin(), o.end());
    }
    return out;
  }
};

double arg_number(const json& args, const char* key, double dflt) {
  if (!args.contains(key)) return dflt;
  if (!args[key].is_number()) throw ConfigError(fmt::format("action argument '{}' must be a number", key));
  return args[key].get<double>();
}

void check_args(const json& args, std::initializer_list<const char*> allowed, const char* cls) {
  for (const auto& [k, v] : args.items()) {
    (void)v;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(fmt::format("unknown argument '{}' for {}", k, cls));
  }
}

int discrete_action(double a, int n) {
  if (!std::isfinite(a) || a != std::floor(a) || a < 0 || a >= n)
    throw OutOfSpaceAction(fmt::format("action {} is outside Discrete({})", a, n));
  return static_cast<int>(a);
}

// Holds the current green for another delta_time seconds.
void extend(Controller& c, double delta) {
  if (c.stage() == Stage::Green) c.set_committed_duration(c.green_elapsed() + delta);
}

class SwitchNextOrNot : public ActionFunction {
 public:
  explicit SwitchNextOrNot(double delta) : delta_(delta) {}
  ActionSpace space(const Controller&) const override { return {true, 2}; }
  void apply(Controller& c, double action) const override {
    int a = discrete_action(action, 2);
    if (a == 0) {
      extend(c, delta_);
    } else if (c.stage() == Stage::Green) {
      // during a transition the switch is already under way
      std::size_t next = (c.current_phase() + 1) % c.phase_count();
      c.set_next_phase(next, c.program()[next].default_green);
    }
  }
  double delta_time() const override { return delta_; }

 private:
  double delta_;
};

class ChooseNextPhase : public ActionFunction {
 public:
  explicit ChooseNextPhase(double delta) : delta_(delta) {}
  ActionSpace space(const Controller& c) const override { return {true, static_cast<int>(c.phase_count())}; }
  void apply(Controller& c, double action) const override {
    auto a = static_cast<std::size_t>(discrete_action(action, static_cast<int>(c.phase_count())));
    if (a == c.current_phase() && c.stage() == Stage::Green) {
      extend(c, delta_);
    } else {
      c.set_next_phase(a, c.program()[a].default_green);
    }
  }
  double delta_time() const override { return delta_; }

 private:
  double delta_;
};

class SetPhaseDuration : public ActionFunction {
 public:
  SetPhaseDuration(bool bins, double bin_size) : bins_(bins), bin_size_(bin_size) {}
  ActionSpace space(const Controller& c) const override {
    if (!bins_) return {false, 0, 0.0, 1.0};
    const Timing& t = c.timing();
    return {true, static_cast<int>(std::floor((t.max_green - t.min_green) / bin_size_ + 1e-9)) + 1};
  }
  void apply(Controller& c, double action) const override {
    const Timing& t = c.timing();
    double d;
    if (bins_) {
      d = t.min_green + bin_size_ * discrete_action(action, space(c).n);
    } else {
      if (!std::isfinite(action) || action < 0.0 || action > 1.0)
        throw OutOfSpaceAction(fmt::format("action {} is outside [0, 1]", action));
      d = duration_for(t, action);
    }
    if (c.stage() == Stage::Green) c.set_committed_duration(d);
  }
  bool event_driven() const override { return true; }
  static double duration_for(const Timing& t, double a) { return t.min_green + a * (t.max_green - t.min_green); }

 private:
  bool bins_;
  double bin_size_;
};

struct Registry {
  std::mutex mu;
  std::map<std::string, ObservationFactory> obs;
  std::map<std::string, ActionFactory> act;
  std::map<std::string, RewardFactory> rew;

  Registry() {
    auto local = [](const json& args) -> std::unique_ptr<ObservationFunction> {
      check_args(args, {}, "LocalObservationFunction");
      return std::make_unique<LocalObservationFunction>();
    };
    obs["DefaultObservationFunction"] = local;
    obs["LocalObservationFunction"] = local;
    obs["GlobalObservationFunction"] = [](const json& args) -> std::unique_ptr<ObservationFunction> {
      check_args(args, {}, "GlobalObservationFunction");
      return std::make_unique<GlobalObservationFunction>();
    };
    act["SwitchNextOrNot"] = [](const json& args) -> std::unique_ptr<ActionFunction> {
      check_args(args, {"delta_time"}, "SwitchNextOrNot");
      return std::make_unique<SwitchNextOrNot>(arg_number(args, "delta_time", 5.0));
    };
    act["ChooseNextPhase"] = [](const json& args) -> std::unique_ptr<ActionFunction> {
      check_args(args, {"delta_time"}, "ChooseNextPhase");
      return std::make_unique<ChooseNextPhase>(arg_number(args, "delta_time", 5.0));
    };
    act["SetPhaseDuration"] = [](const json& args) -> std::unique_ptr<ActionFunction> {
      check_args(args, {"bins", "bin_size"}, "SetPhaseDuration");
      bool bins = args.value("bins", false);
      return std::make_unique<SetPhaseDuration>(bins, arg_number(args, "bin_size", 5.0));
    };
    rew["DefaultRewardFunction"] = [](const json& args) -> std::unique_ptr<RewardFunction> {
      return std::make_unique<DefaultRewardFunction>(RewardWeights::from_json(args));
    };
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

template <typename Map>
auto lookup(Map& m, const std::string& name, const char* what) {
  auto it = m.find(name);
  if (it == m.end()) throw ConfigError(fmt::format("unknown {} class '{}'", what, name));
  return it->second;
}

}  // namespace

void register_observation(const std::string& name, ObservationFactory f) {
  std::lock_guard lk(registry().mu);
  registry().obs[name] = std::move(f);
}

void register_action(const std::string& name, ActionFactory f) {
  std::lock_guard lk(registry().mu);
  registry().act[name] = std::move(f);
}

void register_reward(const std::string& name, RewardFactory f) {
  std::lock_guard lk(registry().mu);
  registry().rew[name] = std::move(f);
}

std::unique_ptr<ObservationFunction> make_observation(const ElementConfig& c) {
  ObservationFactory f;
  {
    std::lock_guard lk(registry().mu);
    f = lookup(registry().obs, c.cls, "observation");
  }
  return f(c.args);
}

std::unique_ptr<ActionFunction> make_action(const ElementConfig& c) {
  ActionFactory f;
  {
    std::lock_guard lk(registry().mu);
    f = lookup(registry().act, c.cls, "action");
  }
  return f(c.args);
}

std::unique_ptr<RewardFunction> make_reward(const ElementConfig& c) {
  RewardFactory f;
  {
    std::lock_guard lk(registry().mu);
    f = lookup(registry().rew, c.cls, "reward");
  }
  return f(c.args);
}

// ---------------------------------------------------------------- env

namespace {

std::shared_ptr<spdlog::logger> make_logger(const LoggerConfig& lc) {
  const char* name = "tsc.rlenv";
  bool enabled = std::any_of(lc.enable_loggers.begin(), lc.enable_loggers.end(),
                             [&](const std::string& s) { return s == "all" || s == name; });
  std::vector<spdlog::sink_ptr> sinks;
  if (enabled && lc.log_to_console) sinks.push_back(std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
  if (enabled && lc.log_to_file)
    sinks.push_back(std::make_shared<spdlog::sinks::basic_file_sink_mt>(
        fmt::format("{}/{}_{}.log", lc.log_dir, name, lc.log_suffix)));
  auto logger = std::make_shared<spdlog::logger>(name, sinks.begin(), sinks.end());
  std::string lower = lc.log_level;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  auto level = spdlog::level::from_str(lower);
  if (level == spdlog::level::off && lower != "off")
    throw ConfigError(fmt::format("unknown log_level '{}'", lc.log_level));
  logger->set_level(level);
  logger->set_pattern("%Y-%m-%d %H:%M:%S.%e %n %l %v");
  return logger;
}

}  // namespace

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
  try {
    scenario_ = cfg_.resolved_scenario();
  } catch (const UnknownPreset& e) {
    throw ConfigError(e.what());
  }
  require_valid(scenario_);
  if (!(scenario_.sim.start_time < scenario_.sim.sim_period))
    throw ConfigError("start_time must be before sim_period");

  // Probe instance for topology; reset() builds the real one.
  Simulation probe(scenario_);
  std::vector<std::string> ids = cfg_.ctrl_intersections;
  if (ids.empty())
    for (const auto& in : probe.intersections()) ids.push_back(in.id);
  std::sort(ids.begin(), ids.end(), id_less);
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ConfigError("ctrl_intersections has duplicates");
  if (ids.empty()) throw ConfigError("no controlled intersections");
  for (const auto& id : ids) {
    int ii = probe.intersection_index(id);
    if (ii < 0) throw ConfigError(fmt::format("ctrl_intersections names unknown intersection '{}'", id));
    AgentView a;
    a.id = id;
    a.intersection = ii;
    a.lanes = probe.intersections()[ii].approach_lanes;
    a.links = probe.intersections()[ii].approach_links;
    for (std::size_t e = 0; e < probe.boundary_queues().size(); ++e)
      if (probe.links()[probe.boundary_queues()[e].link].to_intersection == ii) a.entries.push_back(static_cast<int>(e));
    agents_.push_back(std::move(a));
  }
  if (cfg_.single_agent && agents_.size() != 1)
    throw ConfigError(fmt::format("single_agent needs exactly one controlled intersection, got {}", agents_.size()));

  observation_ = make_observation(cfg_.observation_config);
  action_ = make_action(cfg_.action_config);
  reward_ = make_reward(cfg_.reward_config);
  log_ = make_logger(cfg_.logger);
}

Env::~Env() = default;
Env::Env(Env&&) noexcept = default;
Env& Env::operator=(Env&&) noexcept = default;

const Simulation& Env::sim() const {
  if (!sim_) throw EpisodeOver("environment has not been reset");
  return *sim_;
}

Simulation& Env::mutable_sim() {
  if (!sim_) throw EpisodeOver("environment has not been reset");
  return *sim_;
}

std::vector<std::string> Env::agent_ids() const {
  std::vector<std::string> out;
  for (const auto& a : agents_) out.push_back(a.id);
  return out;
}

std::vector<std::string> Env::active_agents() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < agents_.size(); ++i)
    if (active_.empty() || active_[i]) out.push_back(agents_[i].id);
  return out;
}

const AgentView& Env::agent(const std::string& id) const {
  for (const auto& a : agents_)
    if (a.id == id) return a;
  throw UnknownIntersection(fmt::format("'{}' is not a controlled intersection", id));
}

std::size_t Env::observation_size(const std::string& id) const { return observation_->size(*this, agent(id)); }

ActionSpace Env::action_space(const std::string& id) const {
  const AgentView& a = agent(id);
  if (sim_) return action_->space(sim_->controllers()[a.intersection]);
  Simulation probe(scenario_);
  return action_->space(probe.controllers()[a.intersection]);
}

Env::Latch Env::latch(const AgentView& a) const {
  Latch l;
  for (int gl : a.lanes) l.iwait += sim_->lane_iwait(gl);
  for (int e : a.entries) l.bwait += sim_->boundary_queues()[e].waiting_boundary;
  for (int lk : a.links) l.delay += sim_->link_delay(lk);
  l.crossings = sim_->crossings(a.intersection);
  l.speed_integral = sim_->approach_speed_integral(a.intersection);
  l.travel_time = sim_->total_travel_time();
  l.clock = sim_->clock();
  return l;
}

IntervalMetrics Env::interval(const AgentView& a, const Latch& from) const {
  Latch now = latch(a);
  IntervalMetrics m;
  m.d_iwait = now.iwait - from.iwait;
  m.d_bwait = now.bwait - from.bwait;
  m.throughput = static_cast<double>(now.crossings - from.crossings);
  m.duration = now.clock - from.clock;
  m.speed = m.duration > 0 ? (now.speed_integral - from.speed_integral) / m.duration : 0.0;
  m.d_delay = now.delay - from.delay;
  m.d_travel_time = now.travel_time - from.travel_time;
  return m;
}

AgentInfo Env::info_for(const AgentView& a, const IntervalMetrics& m) const {
  AgentInfo info;
  for (int gl : a.lanes) info.queue_sum += sim_->lane_queue(gl);
  info.crossings = static_cast<std::int64_t>(m.throughput);
  info.d_iwait = m.d_iwait;
  info.d_bwait = m.d_bwait;
  return info;
}

Obs Env::observe(const std::vector<std::string>& ids) const {
  Obs out;
  for (const auto& id : ids) out[id] = observation_->observe(*this, agent(id));
  return out;
}

void Env::update_active() {
  active_.assign(agents_.size(), true);
  if (!action_->event_driven()) return;
  for (std::size_t i = 0; i < agents_.size(); ++i)
    active_[i] = sim_->controllers()[agents_[i].intersection].at_green_onset();
}

ResetResult Env::reset(std::optional<std::uint64_t> seed) {
  sim_ = std::make_unique<Simulation>(scenario_, seed.value_or(scenario_.sim.seed));
  // warm-up: controllers run their default fixed-time cycle
  sim_->run_until(scenario_.sim.start_time);
  latches_.clear();
  for (const auto& a : agents_) latches_.push_back(latch(a));
  active_.assign(agents_.size(), true);
  done_ = false;
  episode_start_delay_ = sim_->total_delay();
  episode_start_iwait_ = sim_->total_iwaiting_time();
  episode_start_bwait_ = sim_->total_bwaiting_time();
  episode_start_spawned_ = sim_->spawned();
  episode_start_arrived_ = sim_->total_arrived();
  log_->info("reset scenario={} seed={} clock={:.1f} agents={}", scenario_.name, sim_->config().sim.seed,
             sim_->clock(), agents_.size());

  ResetResult r;
  auto ids = agent_ids();
  r.observations = observe(ids);
  for (std::size_t i = 0; i < agents_.size(); ++i) r.infos[agents_[i].id] = info_for(agents_[i], IntervalMetrics{});
  return r;
}

EnvStep Env::step(const std::map<std::string, double>& actions) {
  if (!sim_) throw EpisodeOver("call reset() before step()");
  if (done_) throw EpisodeOver("episode is over; call reset()");

  for (const auto& [id, a] : actions) {
    (void)a;
    agent(id);  // unknown ids are rejected
  }
  // Validate every action before any controller is touched.
  std::vector<std::pair<std::size_t, double>> todo;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (!active_[i]) continue;
    auto it = actions.find(agents_[i].id);
    if (it == actions.end())
      throw MissingAgentAction(fmt::format("no action for active agent '{}'", agents_[i].id));
    ActionSpace sp = action_->space(sim_->controllers()[agents_[i].intersection]);
    double a = it->second;
    bool ok = sp.discrete ? (std::isfinite(a) && a == std::floor(a) && a >= 0 && a < sp.n)
                          : (std::isfinite(a) && a >= sp.low && a <= sp.high);
    if (!ok) throw OutOfSpaceAction(fmt::format("action {} for agent '{}' is outside its space", a, agents_[i].id));
    todo.emplace_back(i, a);
  }
  for (const auto& [i, a] : todo) action_->apply(sim_->controllers()[agents_[i].intersection], a);

  const std::int64_t horizon = sim_->total_steps();
  if (action_->event_driven()) {
    do {
      sim_->step();
      update_active();
    } while (sim_->step_index() < horizon && std::none_of(active_.begin(), active_.end(), [](bool b) { return b; }));
  } else {
    auto n = static_cast<std::int64_t>(std::llround(action_->delta_time() * scenario_.sim.sim_res));
    n = std::max<std::int64_t>(1, std::min(n, horizon - sim_->step_index()));
    for (std::int64_t k = 0; k < n; ++k) sim_->step();
  }
  const bool truncated = sim_->step_index() >= horizon;
  if (truncated) {
    done_ = true;
    active_.assign(agents_.size(), true);
  }

  EnvStep out;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (!active_[i]) continue;
    const AgentView& a = agents_[i];
    IntervalMetrics m = interval(a, latches_[i]);
    latches_[i] = latch(a);
    out.rewards[a.id] = reward_->reward(m);
    out.terminated[a.id] = false;
    out.truncated[a.id] = truncated;
    out.infos[a.id] = info_for(a, m);
    ids.push_back(a.id);
  }
  out.observations = observe(ids);
  out.totals = sim_->metrics_snapshot();
  log_->debug("step clock={:.1f} agents={}", sim_->clock(), ids.size());
  if (truncated) {
    EpisodeMetrics em = episode_metrics();
    log_->info("episode end clock={:.1f} mean_delay={:.3f} mean_waiting={:.3f}", sim_->clock(), em.mean_delay,
               em.mean_waiting);
  }
  return out;
}

std::vector<double> Env::reset_single(std::optional<std::uint64_t> seed) {
  if (!cfg_.single_agent) throw ConfigError("reset_single requires single_agent");
  return reset(seed).observations.begin()->second;
}

Env::SingleStep Env::step_single(double action) {
  if (!cfg_.single_agent) throw ConfigError("step_single requires single_agent");
  const std::string& id = agents_.front().id;
  EnvStep s = step({{id, action}});
  SingleStep r;
  r.observation = s.observations.at(id);
  r.reward = s.rewards.at(id);
  r.terminated = s.terminated.at(id);
  r.truncated = s.truncated.at(id);
  r.info = s.infos.at(id);
  return r;
}

EpisodeMetrics Env::episode_metrics() const {
  const Simulation& s = sim();
  EpisodeMetrics m;
  m.total_delay = s.total_delay() - episode_start_delay_;
  m.spawned = s.spawned() - episode_start_spawned_;
  m.arrived = s.total_arrived() - episode_start_arrived_;
  double waiting = (s.total_iwaiting_time() - episode_start_iwait_) + (s.total_bwaiting_time() - episode_start_bwait_);
  if (m.spawned > 0) {
    m.mean_delay = m.total_delay / static_cast<double>(m.spawned);
    m.mean_waiting = waiting / static_cast<double>(m.spawned);
  }
  return m;
}

}  // namespace tsc::rl
