#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tsc/attrbus.hpp"

namespace tsc {

struct Totals {
  double travel_time = 0.0;
  double travel_distance = 0.0;
  double delay = 0.0;
  double iwaiting = 0.0;
  double bwaiting = 0.0;
  std::int64_t arrived = 0;
  double mean_speed = 0.0;
  bool operator==(const Totals&) const = default;
};

struct TsEval {
  std::vector<std::string> lanes;
  std::vector<int> num_vehicles;
  std::vector<int> queue;
  std::int64_t crossings = 0;
  bool operator==(const TsEval&) const = default;
};

struct ApproachDelay {
  std::vector<std::string> links;
  std::vector<double> delay;
};

struct BoundaryEval {
  std::vector<std::string> entries;
  std::vector<std::int64_t> pending;
  std::vector<double> bwait;
};

// High-level client: every method maps to at most one bus call, and reads are
// cached until the next STEP.
class Facade {
 public:
  explicit Facade(bus::TransportKind kind = bus::TransportKind::InProc);
  ~Facade();
  Facade(const Facade&) = delete;
  Facade& operator=(const Facade&) = delete;

  void start(const ScenarioConfig& cfg);
  void start(const ScenarioConfig& cfg, std::uint64_t seed);
  void stop();
  bool active() const { return client_ != nullptr; }

  double clock() const;
  double step();
  double step_one_sec();
  double run_until(double t);

  std::string sc_get_ts_phase(std::string_view ts);
  void sc_set_ts_phase(std::string_view ts, std::string_view phase_state);

  Totals eval_totals();
  TsEval eval_ts(std::string_view ts);
  ApproachDelay eval_approach_delay(std::string_view ts);
  BoundaryEval eval_boundary(std::string_view ts);

  std::vector<std::string> intersection_ids() const;
  const bus::json& topology() const;
  std::int64_t step_serial() const { return step_serial_; }
  const bus::CallCounter& counter() const;
  const bus::CallCounter& server_counter() const;
  bus::BusClient& client();

 private:
  struct TsInfo {
    int groups = 0;
    std::vector<std::string> lanes;
    std::vector<std::string> links;
    std::vector<std::string> entries;
  };
  void require_active() const;
  const TsInfo& ts_info(std::string_view ts) const;
  // One bus call for the whole list unless every path is already cached.
  std::vector<bus::json> read_paths(const std::vector<std::string>& paths);
  void after_step(double clock);

  bus::TransportKind kind_;
  std::unique_ptr<bus::Transport> transport_;
  std::unique_ptr<bus::BusClient> client_;
  bus::json topology_;
  std::unordered_map<std::string, TsInfo> ts_;
  std::vector<std::string> ts_order_;
  int sim_res_ = 10;
  double sim_period_ = 0.0;
  double clock_ = 0.0;
  std::int64_t step_serial_ = 0;
  std::unordered_map<std::string, bus::json> cache_;  // valid for step_serial_ only
};

}  // namespace tsc
