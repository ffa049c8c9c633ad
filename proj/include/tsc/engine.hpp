#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "tsc/rng.hpp"
#include "tsc/scenario.hpp"
#include "tsc/signals.hpp"

namespace tsc {

inline constexpr double kVehicleLength = 5.0;     // m, cars only
inline constexpr double kQueueSpeed = 5.0 / 3.6;  // m/s, "stopped" threshold
inline constexpr double kStopLineMargin = 0.5;    // m, hard clamp before a non-green stop line
inline constexpr double kInfiniteGap = std::numeric_limits<double>::infinity();

struct CarFollowingParams {
  double v_free = 50.0 / 3.6;  // m/s
  double a_max = 2.5;          // m/s^2
  double b_max = 4.5;          // m/s^2
  double s_min = 2.0;          // m, standstill gap
  double dt = 0.1;             // s
};

// Safe-speed car following: the fastest speed from which the vehicle can
// still stop behind an obstacle braking at b_max, limited by the free speed
// and by one step of acceleration/braking.
double longitudinal_update(double v, double gap, double v_obstacle, const CarFollowingParams& p);

// Inverse-CDF exponential headway for a Poisson stream of `rate_vph`.
double interarrival_from_uniform(double rate_vph, double u);
double interarrival_sample(double rate_vph, SplitMix64& rng);

// Lane capacity used for densities: vehicles that fit at standstill spacing.
int lane_capacity(double length);

struct MetricsSnapshot {
  struct PerIntersection {
    std::string id;
    std::vector<int> num_vehicles;  // per approach lane
    std::vector<int> queue_length;  // per approach lane
    std::int64_t crossings = 0;
    bool operator==(const PerIntersection&) const = default;
  };

  double clock = 0.0;
  double total_travel_time = 0.0;
  double total_travel_distance = 0.0;
  double total_delay = 0.0;
  double total_iwaiting_time = 0.0;
  double total_bwaiting_time = 0.0;
  std::int64_t total_arrived = 0;
  std::int64_t spawned = 0;
  std::int64_t active = 0;
  std::int64_t boundary_pending = 0;
  double mean_speed = 0.0;
  std::vector<PerIntersection> intersections;
  bool operator==(const MetricsSnapshot&) const = default;
};

struct VehicleReport {
  double mean_delay = 0.0;
  double mean_travel_time = 0.0;
  double mean_waiting = 0.0;
};

struct Trip {
  std::uint64_t vehicle = 0;
  int entry_link = -1;
  int exit_link = -1;
  double spawn_time = 0.0;
  double entered_time = 0.0;
  double arrived_time = 0.0;
  double distance = 0.0;
  double delay = 0.0;
  double waiting = 0.0;
  double min_speed = 0.0;
  bool operator==(const Trip&) const = default;
};

enum class EventKind { Spawn, Enter, Cross, Arrive };
const char* event_kind_name(EventKind k);

struct Event {
  double clock = 0.0;
  EventKind kind = EventKind::Spawn;
  std::uint64_t vehicle = 0;
  std::string location;  // entry link | link:lane | intersection:movement:signal | exit link
  bool operator==(const Event&) const = default;
};

struct Vehicle {
  std::uint64_t id = 0;
  int route = -1;
  int hop = 0;  // index of the next movement on the route
  int link = -1;
  int lane = 0;
  double offset = 0.0;  // m from link start
  double speed = 0.0;   // m/s
  double spawn_time = 0.0;
  double entered_time = 0.0;
  double distance = 0.0;
  double waiting_internal = 0.0;
  double free_flow_time = 0.0;
  double delay = 0.0;
  double min_speed = kInfiniteGap;
  bool yellow_go = false;
  std::int64_t stamp = -1;
};

// Compiled, index-based view of a scenario.
struct LinkInfo {
  std::string id;
  double length = 0.0;
  int lanes = 1;
  double v_free = 0.0;  // m/s
  int to_intersection = -1;
  int first_lane = 0;  // global lane index of lane 0
  bool entry = false;
  bool exit = false;
};

struct LaneInfo {
  std::string id;  // "<link>_<lane>"
  int link = -1;
  int lane = 0;
  int capacity = 0;
};

struct MovementInfo {
  std::string id;
  int approach_link = -1;
  int approach_lane = 0;
  int exit_link = -1;
  int group = 0;
  Turn turn = Turn::Straight;
};

struct IntersectionInfo {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::vector<MovementInfo> movements;
  std::vector<int> approach_links;  // in first-appearance order
  std::vector<int> approach_lanes;  // global lane indices, grouped by approach link
  int group_count = 0;
};

struct Route {
  struct Hop {
    int intersection = -1;
    int movement = -1;
    int next_lane = -1;  // global lane index entered after crossing
  };
  int entry_link = -1;
  int entry_lane = -1;  // global lane index
  std::vector<Hop> hops;
};

struct BoundaryQueue {
  int link = -1;
  double rate = 0.0;
  TurnRatios ratios;
  SplitMix64 rng;
  double next_arrival = 0.0;
  std::array<int, 3> route_by_turn{-1, -1, -1};
  struct Pending {
    std::uint64_t vehicle;
    int route;
    double spawn_time;
  };
  std::deque<Pending> pending;
  double waiting_boundary = 0.0;
};

// The engine's entire mutable world. Single mutator; copyable.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg);
  Simulation(ScenarioConfig cfg, std::uint64_t seed);

  void step();
  void run_until(double t);
  // Queues one extra vehicle at a demand entry right now (probe runs).
  // Returns its id; it is inserted by the next step like any arrival.
  std::uint64_t inject(std::string_view entry_link, Turn turn);

  double clock() const { return step_index_ * dt_; }
  std::int64_t step_index() const { return step_index_; }
  std::int64_t total_steps() const { return total_steps_; }
  double dt() const { return dt_; }
  const ScenarioConfig& config() const { return cfg_; }

  // topology
  const std::vector<LinkInfo>& links() const { return links_; }
  const std::vector<LaneInfo>& lanes() const { return lane_info_; }
  const std::vector<IntersectionInfo>& intersections() const { return intersections_; }
  const std::vector<BoundaryQueue>& boundary_queues() const { return entries_; }
  int link_index(std::string_view id) const;
  int lane_index(std::string_view id) const;
  int intersection_index(std::string_view id) const;
  int entry_index(std::string_view link_id) const;

  std::vector<Controller>& controllers() { return controllers_; }
  const std::vector<Controller>& controllers() const { return controllers_; }

  // per-lane / per-link state
  const std::deque<Vehicle>& lane_vehicles(int lane) const { return lane_vehicles_[lane]; }
  int lane_count(int lane) const { return static_cast<int>(lane_vehicles_[lane].size()); }
  int lane_queue(int lane) const;
  double lane_iwait(int lane) const { return lane_iwait_[lane]; }
  double link_delay(int link) const { return link_delay_[link]; }
  std::int64_t crossings(int intersection) const { return crossings_[intersection]; }
  std::int64_t red_crossings() const { return red_crossings_; }
  // Integral over time of the mean speed on the intersection's approach lanes.
  double approach_speed_integral(int intersection) const { return speed_integral_[intersection]; }
  // Queue on `lane_id`, which must be an approach lane of `intersection`.
  int lane_queue_length(int intersection, std::string_view lane_id) const;

  MetricsSnapshot metrics_snapshot() const;
  VehicleReport per_vehicle_report() const;
  const std::vector<Trip>& trips() const { return trips_; }

  double total_travel_time() const { return total_travel_time_; }
  double total_travel_distance() const { return total_distance_; }
  double total_delay() const { return total_delay_; }
  double total_iwaiting_time() const { return total_iwait_; }
  double total_bwaiting_time() const { return total_bwait_; }
  std::int64_t total_arrived() const { return arrived_; }
  std::int64_t spawned() const { return spawned_; }
  std::int64_t active() const { return entered_ - arrived_; }
  std::int64_t boundary_pending() const;
  double mean_speed() const { return mean_speed_; }

  void enable_event_log(bool on) { log_events_ = on; }
  const std::vector<Event>& events() const { return events_; }
  void write_event_log(std::ostream& os) const;

 private:
  void compile();
  int build_route(int entry_link, Turn turn);
  void spawn_arrivals(BoundaryQueue& q, double now);
  void insert_from_boundary(BoundaryQueue& q, double now);
  void move_lane(int lane, double now);
  void log(double now, EventKind kind, std::uint64_t vehicle, std::string location);

  ScenarioConfig cfg_;
  double dt_;
  std::int64_t total_steps_;
  std::int64_t step_index_ = 0;

  std::vector<LinkInfo> links_;
  std::vector<LaneInfo> lane_info_;
  std::vector<IntersectionInfo> intersections_;
  std::vector<Route> routes_;
  std::vector<Controller> controllers_;
  std::vector<BoundaryQueue> entries_;

  std::vector<std::deque<Vehicle>> lane_vehicles_;
  std::vector<double> lane_iwait_;
  std::vector<double> link_delay_;
  std::vector<std::int64_t> crossings_;
  std::vector<double> speed_integral_;

  std::uint64_t next_vehicle_id_ = 0;
  std::int64_t spawned_ = 0;
  std::int64_t entered_ = 0;
  std::int64_t arrived_ = 0;
  std::int64_t red_crossings_ = 0;
  double total_travel_time_ = 0.0;
  double total_distance_ = 0.0;
  double total_delay_ = 0.0;
  double total_iwait_ = 0.0;
  double total_bwait_ = 0.0;
  double mean_speed_ = 0.0;
  std::vector<Trip> trips_;

  bool log_events_ = false;
  std::vector<Event> events_;
};

}  // namespace tsc
