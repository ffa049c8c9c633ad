#include "tsc/facade.hpp"

#include <cmath>

#include <fmt/format.h>

namespace tsc {

using bus::json;

Facade::Facade(bus::TransportKind kind) : kind_(kind) {}

Facade::~Facade() {
  try {
    if (active()) stop();
  } catch (const std::exception&) {
  }
}

void Facade::start(const ScenarioConfig& cfg) { start(cfg, cfg.sim.seed); }

void Facade::start(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (active()) throw AlreadyStarted("a simulation session is already running; call stop() first");
  transport_ = bus::make_transport(kind_, Simulation(cfg, seed));
  client_ = std::make_unique<bus::BusClient>(*transport_);
  topology_ = client_->hello();
  sim_res_ = topology_.at("sim_res").get<int>();
  sim_period_ = topology_.at("sim_period").get<double>();
  ts_.clear();
  ts_order_.clear();
  for (const auto& in : topology_.at("intersections")) {
    TsInfo info;
    info.groups = in.at("groups").get<int>();
    info.lanes = in.at("approach_lanes").get<std::vector<std::string>>();
    info.links = in.at("approach_links").get<std::vector<std::string>>();
    info.entries = in.at("entries").get<std::vector<std::string>>();
    std::string id = in.at("id").get<std::string>();
    ts_order_.push_back(id);
    ts_.emplace(std::move(id), std::move(info));
  }
  clock_ = 0.0;
  step_serial_ = 0;
  cache_.clear();
}

void Facade::stop() {
  if (!active()) throw NotStarted("no simulation session is running");
  try {
    client_->bye();
  } catch (const TransportError&) {
  }
  client_.reset();
  transport_.reset();
  cache_.clear();
}

void Facade::require_active() const {
  if (!active()) throw NotStarted("no simulation session is running; call start() first");
}

const Facade::TsInfo& Facade::ts_info(std::string_view ts) const {
  require_active();
  auto it = ts_.find(std::string(ts));
  if (it == ts_.end()) throw UnknownIntersection(fmt::format("no intersection '{}'", ts));
  return it->second;
}

double Facade::clock() const {
  require_active();
  return clock_;
}

void Facade::after_step(double clock) {
  clock_ = clock;
  ++step_serial_;
  cache_.clear();
}

double Facade::step() {
  require_active();
  after_step(client_->step(1));
  return clock_;
}

double Facade::step_one_sec() {
  require_active();
  after_step(client_->step(sim_res_));
  return clock_;
}

double Facade::run_until(double t) {
  require_active();
  auto target = std::llround(t * sim_res_);
  auto now = std::llround(clock_ * sim_res_);
  if (target < now) throw BadValue(fmt::format("run_until({}) is before the current clock {}", t, clock_));
  if (t > sim_period_ + 1e-9) throw HorizonExceeded(fmt::format("run_until({}) is past the {} s horizon", t, sim_period_));
  while (now < target) {
    auto n = static_cast<int>(std::min<long long>(sim_res_, target - now));
    after_step(client_->step(n));
    now += n;
  }
  return clock_;
}

std::vector<json> Facade::read_paths(const std::vector<std::string>& paths) {
  std::vector<json> out;
  out.reserve(paths.size());
  bool all_cached = true;
  for (const auto& p : paths)
    if (!cache_.count(p)) {
      all_cached = false;
      break;
    }
  if (all_cached) {
    for (const auto& p : paths) out.push_back(cache_.at(p));
    return out;
  }
  std::vector<bus::BatchOp> ops;
  ops.reserve(paths.size());
  for (const auto& p : paths) ops.push_back(bus::BatchOp::get(p));
  out = client_->batch(ops);
  for (std::size_t i = 0; i < paths.size(); ++i) cache_[paths[i]] = out[i];
  return out;
}

std::string Facade::sc_get_ts_phase(std::string_view ts) {
  const TsInfo& info = ts_info(ts);
  std::vector<std::string> paths;
  for (int k = 0; k < info.groups; ++k) paths.push_back(fmt::format("ts.{}.sg.{}.state", ts, k));
  std::string s;
  for (const auto& v : read_paths(paths)) s += v.get<std::string>();
  return s;
}

void Facade::sc_set_ts_phase(std::string_view ts, std::string_view phase_state) {
  const TsInfo& info = ts_info(ts);
  if (static_cast<int>(phase_state.size()) != info.groups)
    throw LengthMismatch(fmt::format("intersection {} has {} signal groups, got '{}'", ts, info.groups, phase_state));
  for (char c : phase_state)
    if (c != 'G' && c != 'R') throw BadValue(fmt::format("phase state '{}' may only contain G and R", phase_state));
  std::vector<bus::BatchOp> ops;
  for (int k = 0; k < info.groups; ++k)
    ops.push_back(bus::BatchOp::set(fmt::format("ts.{}.sg.{}.state", ts, k), std::string(1, phase_state[k])));
  client_->batch(ops);
  for (const auto& op : ops) cache_[op.path] = op.value;
}

Totals Facade::eval_totals() {
  require_active();
  static const std::vector<std::string> paths = {
      "net.total_travel_time", "net.total_travel_distance", "net.total_delay", "net.total_iwaiting_time",
      "net.total_bwaiting_time", "net.total_arrived", "net.mean_speed"};
  auto v = read_paths(paths);
  return Totals{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>(),
                v[4].get<double>(), v[5].get<std::int64_t>(), v[6].get<double>()};
}

TsEval Facade::eval_ts(std::string_view ts) {
  const TsInfo& info = ts_info(ts);
  std::vector<std::string> paths;
  for (const auto& l : info.lanes) {
    paths.push_back(fmt::format("lane.{}.count", l));
    paths.push_back(fmt::format("lane.{}.queue", l));
  }
  paths.push_back(fmt::format("ts.{}.crossings", ts));
  auto v = read_paths(paths);
  TsEval e;
  e.lanes = info.lanes;
  for (std::size_t i = 0; i < info.lanes.size(); ++i) {
    e.num_vehicles.push_back(v[2 * i].get<int>());
    e.queue.push_back(v[2 * i + 1].get<int>());
  }
  e.crossings = v.back().get<std::int64_t>();
  return e;
}

ApproachDelay Facade::eval_approach_delay(std::string_view ts) {
  const TsInfo& info = ts_info(ts);
  std::vector<std::string> paths;
  for (const auto& l : info.links) paths.push_back(fmt::format("link.{}.delay", l));
  auto v = read_paths(paths);
  ApproachDelay d;
  d.links = info.links;
  for (const auto& x : v) d.delay.push_back(x.get<double>());
  return d;
}

BoundaryEval Facade::eval_boundary(std::string_view ts) {
  const TsInfo& info = ts_info(ts);
  std::vector<std::string> paths;
  for (const auto& e : info.entries) {
    paths.push_back(fmt::format("entry.{}.pending", e));
    paths.push_back(fmt::format("entry.{}.bwait", e));
  }
  BoundaryEval b;
  b.entries = info.entries;
  if (paths.empty()) return b;
  auto v = read_paths(paths);
  for (std::size_t i = 0; i < info.entries.size(); ++i) {
    b.pending.push_back(v[2 * i].get<std::int64_t>());
    b.bwait.push_back(v[2 * i + 1].get<double>());
  }
  return b;
}

std::vector<std::string> Facade::intersection_ids() const {
  require_active();
  return ts_order_;
}

const json& Facade::topology() const {
  require_active();
  return topology_;
}

const bus::CallCounter& Facade::counter() const {
  require_active();
  return client_->counter();
}

const bus::CallCounter& Facade::server_counter() const {
  require_active();
  return transport_->server().counter();
}

bus::BusClient& Facade::client() {
  require_active();
  return *client_;
}

}  // namespace tsc
