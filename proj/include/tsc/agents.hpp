#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsc/rlenv.hpp"

namespace tsc::agents {

// Per-intersection greens (program order) and plan offset.
struct FixedTimePlan {
  struct Entry {
    std::vector<double> greens;
    double offset = 0.0;
  };
  std::map<std::string, Entry> intersections;

  // Default greens of every program, zero offsets.
  static FixedTimePlan from_scenario(const ScenarioConfig& cfg);
  double cycle(const std::string& id, const Timing& t) const;
};

// Checks the plan against the scenario: coverage, phase counts, green bounds,
// non-negative offsets. Throws PlanMismatch.
void check_plan(const FixedTimePlan& plan, const ScenarioConfig& cfg);

// Switch-semantics action realising the plan: 1 while the controller shows
// a green the plan has already ended, 0 otherwise.
int fixed_time_action(const FixedTimePlan::Entry& plan, const Controller& c, double clock);

// Writes the plan into the controllers so they run it autonomously, phase
// boundaries landing exactly on (clock - offset) multiples of the cycle.
void install_plan(Simulation& sim, const FixedTimePlan& plan);

struct BaselineResult {
  rl::EpisodeMetrics metrics;
  double arterial_delay = 0.0;
};

// Mean delay of completed trips that entered after warm-up and both enter
// and leave on east-west links.
double arterial_delay(const Simulation& sim);

// Runs the full horizon under the plan; metrics use the same post-warm-up
// window as the environment.
BaselineResult run_fixed_time(const ScenarioConfig& cfg, const FixedTimePlan& plan, std::uint64_t seed,
                              Simulation* out = nullptr);

// For each phase, observation indices of the queue components of lanes that
// phase serves.
std::vector<std::vector<std::size_t>> greedy_layout(const rl::Env& env, const std::string& agent);

// Phase whose served lanes carry the largest summed queue; ties go to the
// lowest index.
int greedy_longest_queue(const std::vector<double>& obs, const std::vector<std::vector<std::size_t>>& layout);

// ---- tabular Q-learning

// Queue bins {0}, {1..3}, {4..8}, {>8}.
int queue_bin(int queue);
std::uint64_t discretize(const std::vector<int>& lane_queues, std::size_t phase);
std::uint64_t agent_state(const rl::Env& env, const rl::AgentView& agent);

class QTable {
 public:
  explicit QTable(int actions = 2) : actions_(actions) {}
  double value(std::uint64_t s, int a) const;
  std::vector<double>& row(std::uint64_t s);
  double max_value(std::uint64_t s) const;
  // Greedy action, ties to the lowest index.
  int best_action(std::uint64_t s) const;
  std::size_t size() const { return table_.size(); }
  int actions() const { return actions_; }
  const std::unordered_map<std::uint64_t, std::vector<double>>& entries() const { return table_; }

 private:
  int actions_;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
};

struct QParams {
  double alpha = 0.1;
  double gamma = 0.95;
  double eps_start = 1.0;
  double eps_end = 0.05;
};

void q_update(QTable& q, std::uint64_t s, int a, double r, std::uint64_t s_next, const QParams& p);

// Linear from eps_start at episode 0 to eps_end at the last episode.
double epsilon_at(const QParams& p, int episode, int episodes);

struct CurvePoint {
  int episode = 0;
  double mean_delay = 0.0;
  double mean_waiting = 0.0;
  double ret = 0.0;
};

struct TrainResult {
  QTable table;
  std::vector<CurvePoint> curve;
};

// Episode e resets the environment with seed traffic_seed + e; exploration
// draws come from a separate stream seeded by agent_seed.
TrainResult q_train(rl::Env& env, int episodes, const QParams& p, std::uint64_t traffic_seed,
                    std::uint64_t agent_seed);

std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace tsc::agents
