#include "tsc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

namespace tsc {

double longitudinal_update(double v, double gap, double v_obstacle, const CarFollowingParams& p) {
  double safe = std::sqrt(v_obstacle * v_obstacle + 2.0 * p.b_max * std::max(0.0, gap - p.s_min));
  double target = std::min(p.v_free, safe);
  double lo = std::max(0.0, v - p.b_max * p.dt);
  double hi = v + p.a_max * p.dt;
  return std::clamp(target, lo, hi);
}

double interarrival_from_uniform(double rate_vph, double u) {
  if (!(rate_vph > 0)) throw ZeroRate("arrival rate must be positive to sample a headway");
  return -std::log1p(-u) * 3600.0 / rate_vph;
}

double interarrival_sample(double rate_vph, SplitMix64& rng) { return interarrival_from_uniform(rate_vph, rng.uniform()); }

int lane_capacity(double length) { return std::max(1, static_cast<int>(std::floor(length / (kVehicleLength + 2.0)))); }

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Spawn: return "SPAWN";
    case EventKind::Enter: return "ENTER";
    case EventKind::Cross: return "CROSS";
    case EventKind::Arrive: return "ARRIVE";
  }
  return "?";
}

Simulation::Simulation(ScenarioConfig cfg) : Simulation(cfg, cfg.sim.seed) {}

Simulation::Simulation(ScenarioConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  require_valid(cfg_);
  cfg_.sim.seed = seed;
  dt_ = cfg_.sim.dt();
  total_steps_ = cfg_.sim.total_steps();
  compile();
}

void Simulation::compile() {
  std::unordered_map<std::string, int> link_idx;
  for (const auto& l : cfg_.network.links) {
    LinkInfo info;
    info.id = l.id;
    info.length = l.length;
    info.lanes = l.lanes;
    info.v_free = l.speed_limit / 3.6;
    info.first_lane = static_cast<int>(lane_info_.size());
    for (int k = 0; k < l.lanes; ++k)
      lane_info_.push_back(LaneInfo{l.id + "_" + std::to_string(k), static_cast<int>(links_.size()), k,
                                    lane_capacity(l.length)});
    link_idx[l.id] = static_cast<int>(links_.size());
    links_.push_back(std::move(info));
  }

  for (const auto& in : cfg_.network.intersections) {
    IntersectionInfo info;
    info.id = in.id;
    if (const Node* n = cfg_.find_node(in.node)) {
      info.x = n->x;
      info.y = n->y;
    }
    info.group_count = in.group_count();
    int idx = static_cast<int>(intersections_.size());
    for (const auto& m : in.movements) {
      MovementInfo mi{m.id, link_idx.at(m.approach_link), m.approach_lane, link_idx.at(m.exit_link), m.signal_group,
                      m.turn};
      if (std::find(info.approach_links.begin(), info.approach_links.end(), mi.approach_link) ==
          info.approach_links.end())
        info.approach_links.push_back(mi.approach_link);
      links_[mi.approach_link].to_intersection = idx;
      info.movements.push_back(std::move(mi));
    }
    for (int l : info.approach_links)
      for (int k = 0; k < links_[l].lanes; ++k) info.approach_lanes.push_back(links_[l].first_lane + k);
    intersections_.push_back(std::move(info));

    const SignalProgram* prog = cfg_.find_program(in.id);
    controllers_.emplace_back(in.id, prog->phases, cfg_.timing, cfg_.sim.sim_res);
  }

  // Links leaving the network are those whose end node hosts no intersection.
  std::unordered_map<std::string, bool> is_junction;
  for (const auto& in : cfg_.network.intersections) is_junction[in.node] = true;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const Link& l = cfg_.network.links[i];
    links_[i].exit = !is_junction.count(l.to_node);
    links_[i].entry = !is_junction.count(l.from_node);
  }

  for (const auto& d : cfg_.demands) {
    BoundaryQueue q;
    q.link = link_idx.at(d.entry_link);
    q.rate = d.arrival_rate;
    q.ratios = d.turn_ratios;
    q.rng = SplitMix64(cfg_.sim.seed ^ fnv1a64(d.entry_link));
    for (Turn t : {Turn::Left, Turn::Straight, Turn::Right})
      if (d.turn_ratios.of(t) > 0) q.route_by_turn[static_cast<int>(t)] = build_route(q.link, t);
    q.next_arrival = q.rate > 0 ? interarrival_sample(q.rate, q.rng) : kInfiniteGap;
    entries_.push_back(std::move(q));
  }

  lane_vehicles_.assign(lane_info_.size(), {});
  lane_iwait_.assign(lane_info_.size(), 0.0);
  link_delay_.assign(links_.size(), 0.0);
  crossings_.assign(intersections_.size(), 0);
  speed_integral_.assign(intersections_.size(), 0.0);
}

int Simulation::build_route(int entry_link, Turn first_turn) {
  Route r;
  r.entry_link = entry_link;
  int link = entry_link;
  Turn turn = first_turn;
  Turn last_turn = first_turn;
  const std::size_t max_hops = intersections_.size() * 4 + 1;
  while (links_[link].to_intersection >= 0 && r.hops.size() < max_hops) {
    int ii = links_[link].to_intersection;
    const auto& movs = intersections_[ii].movements;
    int chosen = -1;
    for (Turn t : r.hops.empty() ? std::vector<Turn>{turn}
                                 : std::vector<Turn>{Turn::Straight, Turn::Right, Turn::Left}) {
      for (std::size_t m = 0; m < movs.size() && chosen < 0; ++m)
        if (movs[m].approach_link == link && movs[m].turn == t) chosen = static_cast<int>(m);
      if (chosen >= 0) break;
    }
    if (chosen < 0) break;
    const MovementInfo& mv = movs[chosen];
    if (r.hops.empty()) {
      r.entry_lane = links_[link].first_lane + mv.approach_lane;
    } else {
      r.hops.back().next_lane = links_[link].first_lane + mv.approach_lane;
    }
    r.hops.push_back(Route::Hop{ii, chosen, -1});
    last_turn = mv.turn;
    link = mv.exit_link;
  }
  if (r.hops.empty()) {
    r.entry_lane = links_[link].first_lane;
  } else {
    const LinkInfo& out = links_[link];
    r.hops.back().next_lane = out.first_lane + (last_turn == Turn::Left ? 0 : out.lanes - 1);
  }
  routes_.push_back(std::move(r));
  return static_cast<int>(routes_.size()) - 1;
}

int Simulation::link_index(std::string_view id) const {
  for (std::size_t i = 0; i < links_.size(); ++i)
    if (links_[i].id == id) return static_cast<int>(i);
  return -1;
}

int Simulation::lane_index(std::string_view id) const {
  for (std::size_t i = 0; i < lane_info_.size(); ++i)
    if (lane_info_[i].id == id) return static_cast<int>(i);
  return -1;
}

int Simulation::intersection_index(std::string_view id) const {
  for (std::size_t i = 0; i < intersections_.size(); ++i)
    if (intersections_[i].id == id) return static_cast<int>(i);
  return -1;
}

int Simulation::entry_index(std::string_view link_id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (links_[entries_[i].link].id == link_id) return static_cast<int>(i);
  return -1;
}

int Simulation::lane_queue(int lane) const {
  int n = 0;
  for (const auto& v : lane_vehicles_[lane])
    if (v.speed < kQueueSpeed) ++n;
  return n;
}

int Simulation::lane_queue_length(int intersection, std::string_view lane_id) const {
  if (intersection < 0 || intersection >= static_cast<int>(intersections_.size()))
    throw UnknownIntersection("no intersection with index " + std::to_string(intersection));
  int lane = lane_index(lane_id);
  const auto& al = intersections_[intersection].approach_lanes;
  if (lane < 0 || std::find(al.begin(), al.end(), lane) == al.end())
    throw UnknownLane("lane '" + std::string(lane_id) + "' is not an approach lane of intersection " +
                      intersections_[intersection].id);
  return lane_queue(lane);
}

std::int64_t Simulation::boundary_pending() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::int64_t>(e.pending.size());
  return n;
}

void Simulation::log(double now, EventKind kind, std::uint64_t vehicle, std::string location) {
  if (log_events_) events_.push_back(Event{now, kind, vehicle, std::move(location)});
}

void Simulation::spawn_arrivals(BoundaryQueue& q, double now) {
  while (q.next_arrival <= now + 1e-9) {
    double u = q.rng.uniform();
    Turn turn = Turn::Right;
    if (u < q.ratios.left) {
      turn = Turn::Left;
    } else if (u < q.ratios.left + q.ratios.straight) {
      turn = Turn::Straight;
    }
    // guard against rounding past the last positive ratio
    if (q.route_by_turn[static_cast<int>(turn)] < 0) {
      for (Turn t : {Turn::Right, Turn::Straight, Turn::Left})
        if (q.route_by_turn[static_cast<int>(t)] >= 0) {
          turn = t;
          break;
        }
    }
    std::uint64_t id = next_vehicle_id_++;
    q.pending.push_back({id, q.route_by_turn[static_cast<int>(turn)], q.next_arrival});
    ++spawned_;
    log(now, EventKind::Spawn, id, links_[q.link].id);
    q.next_arrival += interarrival_sample(q.rate, q.rng);
  }
}

std::uint64_t Simulation::inject(std::string_view entry_link, Turn turn) {
  int e = entry_index(entry_link);
  if (e < 0) throw UnknownLane(fmt::format("'{}' is not a demand entry link", entry_link));
  BoundaryQueue& q = entries_[e];
  int route = q.route_by_turn[static_cast<int>(turn)];
  if (route < 0) {
    route = build_route(q.link, turn);
    if (routes_[route].hops.empty() && links_[q.link].to_intersection >= 0)
      throw UnknownLane(fmt::format("entry '{}' has no {} movement", entry_link, turn_letter(turn)));
    q.route_by_turn[static_cast<int>(turn)] = route;
  }
  std::uint64_t id = next_vehicle_id_++;
  q.pending.push_back({id, route, clock()});
  ++spawned_;
  log(clock(), EventKind::Spawn, id, links_[q.link].id);
  return id;
}

void Simulation::insert_from_boundary(BoundaryQueue& q, double now) {
  const LinkInfo& link = links_[q.link];
  for (int k = 0; k < link.lanes; ++k) {
    int gl = link.first_lane + k;
    auto& lane = lane_vehicles_[gl];
    if (!lane.empty() && lane.back().offset < kVehicleLength + 2.0) continue;
    auto it = std::find_if(q.pending.begin(), q.pending.end(),
                           [&](const BoundaryQueue::Pending& p) { return routes_[p.route].entry_lane == gl; });
    if (it == q.pending.end()) continue;
    Vehicle v;
    v.id = it->vehicle;
    v.route = it->route;
    v.link = q.link;
    v.lane = k;
    v.spawn_time = it->spawn_time;
    v.entered_time = now;
    v.speed = link.v_free;
    if (!lane.empty()) {
      const Vehicle& last = lane.back();
      double room = std::max(0.0, last.offset - kVehicleLength - 2.0);
      v.speed = std::min(link.v_free, std::sqrt(last.speed * last.speed + 2.0 * 4.5 * room));
    }
    v.min_speed = v.speed;
    q.pending.erase(it);
    ++entered_;
    log(now, EventKind::Enter, v.id, lane_info_[gl].id);
    lane.push_back(std::move(v));
  }
}

void Simulation::move_lane(int gl, double now) {
  auto& q = lane_vehicles_[gl];
  const int li = lane_info_[gl].link;
  const LinkInfo& link = links_[li];
  CarFollowingParams p;
  p.v_free = link.v_free;
  p.dt = dt_;

  std::size_t i = 0;
  while (i < q.size()) {
    Vehicle& v = q[i];
    if (v.stamp == step_index_) {  // already moved this step (arrived from upstream)
      ++i;
      continue;
    }
    v.stamp = step_index_;
    const double old = v.offset;
    double gap = kInfiniteGap;
    double v_obs = 0.0;
    bool must_stop = false;
    int next_lane = -1;
    char signal = 'G';
    const Route& route = routes_[v.route];

    if (i == 0) {
      const double to_line = link.length - old;
      if (link.to_intersection >= 0 && v.hop < static_cast<int>(route.hops.size())) {
        const auto& hop = route.hops[v.hop];
        const auto& mv = intersections_[hop.intersection].movements[hop.movement];
        signal = controllers_[hop.intersection].signal_string()[mv.group];
        bool go = signal == 'G';
        if (signal == 'Y') {
          // commit to yellow once stopping before the line is no longer possible
          if (!v.yellow_go && to_line < v.speed * v.speed / (2.0 * p.b_max)) v.yellow_go = true;
          go = v.yellow_go;
        }
        if (go) {
          next_lane = hop.next_lane;
          const auto& nq = lane_vehicles_[next_lane];
          if (!nq.empty()) {
            gap = to_line + nq.back().offset - kVehicleLength;
            v_obs = nq.back().speed;
          }
        } else {
          must_stop = true;
          gap = to_line;
        }
      }
    } else {
      const Vehicle& lead = q[i - 1];
      gap = lead.offset - kVehicleLength - old;
      v_obs = lead.speed;
    }

    double speed = longitudinal_update(v.speed, std::max(0.0, gap), v_obs, p);
    double pos = old + speed * dt_;
    if (i > 0) pos = std::min(pos, std::max(old, q[i - 1].offset - kVehicleLength));
    if (must_stop) pos = std::min(pos, std::max(old, link.length - kStopLineMargin));

    bool arrived = false;
    bool crossed = false;
    double overshoot = 0.0;
    if (i == 0 && pos >= link.length) {
      if (next_lane >= 0) {
        overshoot = pos - link.length;
        const auto& nq = lane_vehicles_[next_lane];
        double room = nq.empty() ? kInfiniteGap : nq.back().offset - kVehicleLength;
        if (overshoot <= room) {
          crossed = true;
        } else if (room >= 0) {
          overshoot = room;
          crossed = true;
        } else {
          pos = std::max(old, std::min(pos, link.length + room));
        }
      } else if (link.to_intersection < 0) {
        arrived = true;
      } else {
        pos = std::max(old, std::min(pos, link.length - kStopLineMargin));
      }
    }

    double moved;
    if (arrived) {
      moved = link.length - old;
    } else if (crossed) {
      moved = link.length - old + overshoot;
    } else {
      moved = pos - old;
    }
    if (!arrived && moved < speed * dt_) speed = moved / dt_;

    const double ff = moved / link.v_free;
    const double d = std::max(0.0, dt_ - ff);
    total_travel_time_ += dt_;
    total_distance_ += moved;
    total_delay_ += d;
    link_delay_[li] += d;
    v.distance += moved;
    v.delay += d;
    v.free_flow_time += ff;
    v.speed = speed;
    if (!arrived) v.min_speed = std::min(v.min_speed, speed);
    if (speed < kQueueSpeed) {
      total_iwait_ += dt_;
      lane_iwait_[gl] += dt_;
      v.waiting_internal += dt_;
    }

    if (arrived) {
      ++arrived_;
      trips_.push_back(Trip{v.id, route.entry_link, li, v.spawn_time, v.entered_time, now + dt_, v.distance, v.delay,
                            v.waiting_internal + (v.entered_time - v.spawn_time), v.min_speed});
      log(now + dt_, EventKind::Arrive, v.id, link.id);
      q.pop_front();
      continue;
    }
    if (crossed) {
      const auto& hop = route.hops[v.hop];
      ++crossings_[hop.intersection];
      if (signal == 'R') ++red_crossings_;
      log(now + dt_, EventKind::Cross, v.id,
          fmt::format("{}:{}:{}", intersections_[hop.intersection].id,
                      intersections_[hop.intersection].movements[hop.movement].id, signal));
      v.offset = overshoot;
      v.hop += 1;
      v.link = lane_info_[next_lane].link;
      v.lane = lane_info_[next_lane].lane;
      v.yellow_go = false;
      lane_vehicles_[next_lane].push_back(std::move(v));
      q.pop_front();
      continue;
    }
    v.offset = pos;
    ++i;
  }
}

void Simulation::step() {
  if (step_index_ >= total_steps_)
    throw HorizonExceeded(fmt::format("simulation horizon of {} s reached", cfg_.sim.sim_period));
  const double now = clock();

  for (auto& c : controllers_) c.tick();
  for (auto& e : entries_) spawn_arrivals(e, now);
  for (auto& e : entries_) insert_from_boundary(e, now);
  for (int gl = 0; gl < static_cast<int>(lane_vehicles_.size()); ++gl) move_lane(gl, now);

  for (auto& e : entries_) {
    double w = static_cast<double>(e.pending.size()) * dt_;
    e.waiting_boundary += w;
    total_bwait_ += w;
  }

  double speed_sum = 0.0;
  std::int64_t n = 0;
  for (const auto& lane : lane_vehicles_)
    for (const auto& v : lane) {
      speed_sum += v.speed;
      ++n;
    }
  mean_speed_ = n > 0 ? speed_sum / static_cast<double>(n) : 0.0;

  for (std::size_t ii = 0; ii < intersections_.size(); ++ii) {
    double s = 0.0;
    int k = 0;
    for (int gl : intersections_[ii].approach_lanes)
      for (const auto& v : lane_vehicles_[gl]) {
        s += v.speed;
        ++k;
      }
    if (k > 0) speed_integral_[ii] += s / k * dt_;
  }

  ++step_index_;
}

void Simulation::run_until(double t) {
  auto target = static_cast<std::int64_t>(std::llround(t * cfg_.sim.sim_res));
  while (step_index_ < target) step();
}

MetricsSnapshot Simulation::metrics_snapshot() const {
  MetricsSnapshot m;
  m.clock = clock();
  m.total_travel_time = total_travel_time_;
  m.total_travel_distance = total_distance_;
  m.total_delay = total_delay_;
  m.total_iwaiting_time = total_iwait_;
  m.total_bwaiting_time = total_bwait_;
  m.total_arrived = arrived_;
  m.spawned = spawned_;
  m.active = active();
  m.boundary_pending = boundary_pending();
  m.mean_speed = mean_speed_;
  for (std::size_t ii = 0; ii < intersections_.size(); ++ii) {
    MetricsSnapshot::PerIntersection pi;
    pi.id = intersections_[ii].id;
    for (int gl : intersections_[ii].approach_lanes) {
      pi.num_vehicles.push_back(lane_count(gl));
      pi.queue_length.push_back(lane_queue(gl));
    }
    pi.crossings = crossings_[ii];
    m.intersections.push_back(std::move(pi));
  }
  return m;
}

VehicleReport Simulation::per_vehicle_report() const {
  if (spawned_ == 0) throw NoVehicles("no vehicles have been spawned");
  VehicleReport r;
  const auto n = static_cast<double>(spawned_);
  r.mean_delay = total_delay_ / n;
  r.mean_waiting = (total_iwait_ + total_bwait_) / n;
  if (!trips_.empty()) {
    double tt = 0.0;
    for (const auto& t : trips_) tt += t.arrived_time - t.spawn_time;
    r.mean_travel_time = tt / static_cast<double>(trips_.size());
  }
  return r;
}

void Simulation::write_event_log(std::ostream& os) const {
  os << "clock,kind,vehicle_id,location\n";
  for (const auto& e : events_) os << fmt::format("{:.1f},{},{},{}\n", e.clock, event_kind_name(e.kind), e.vehicle, e.location);
}

}  // namespace tsc
