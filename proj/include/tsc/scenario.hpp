#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsc/errors.hpp"

namespace tsc {

enum class Turn { Left, Straight, Right };

char turn_letter(Turn t);
Turn turn_from_letter(char c);

struct SimParams {
  double start_time = 600.0;   // warm-up end (s)
  double sim_period = 4200.0;  // total horizon incl. warm-up (s)
  int sim_res = 10;            // steps per second
  std::uint64_t seed = 42;

  double dt() const { return 1.0 / sim_res; }
  std::int64_t total_steps() const;
  bool operator==(const SimParams&) const = default;
};

struct Node {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Node&) const = default;
};

struct Link {
  std::string id;
  std::string from_node;
  std::string to_node;
  double length = 0.0;       // m
  int lanes = 1;
  double speed_limit = 50.0;  // km/h
  bool operator==(const Link&) const = default;
};

// One turning movement from one approach lane. Movements sharing a signal
// group always show the same signal; phase strings carry one character per
// signal group (e.g. "GRRR" for the four groups of a protected-left
// four-leg intersection).
struct Movement {
  std::string id;
  std::string approach_link;
  int approach_lane = 0;  // 0 = innermost (left) lane
  Turn turn = Turn::Straight;
  std::string exit_link;
  int signal_group = 0;
  bool operator==(const Movement&) const = default;
};

struct Intersection {
  std::string id;
  std::string node;
  std::vector<Movement> movements;
  // Pairs of signal groups that must never be green together.
  std::vector<std::pair<int, int>> conflicts;

  int group_count() const;
  bool operator==(const Intersection&) const = default;
};

struct TurnRatios {
  double left = 0.0;
  double straight = 1.0;
  double right = 0.0;
  double of(Turn t) const;
  bool operator==(const TurnRatios&) const = default;
};

struct DemandSpec {
  std::string entry_link;
  double arrival_rate = 0.0;  // veh/h
  TurnRatios turn_ratios;
  bool operator==(const DemandSpec&) const = default;
};

struct PhaseDef {
  std::string id;
  std::string state;  // one of {G,R} per signal group
  double default_green = 10.0;
  bool operator==(const PhaseDef&) const = default;
};

struct SignalProgram {
  std::string intersection;
  std::vector<PhaseDef> phases;
  bool operator==(const SignalProgram&) const = default;
};

struct Timing {
  double yellow_time = 3.0;
  double allred_time = 2.0;
  double min_green = 8.0;
  double max_green = 120.0;
  bool operator==(const Timing&) const = default;
};

struct Network {
  std::vector<Node> nodes;
  std::vector<Link> links;
  std::vector<Intersection> intersections;
  bool operator==(const Network&) const = default;
};

struct ScenarioConfig {
  std::string name;
  Network network;
  std::vector<DemandSpec> demands;
  std::vector<SignalProgram> signals;
  Timing timing;
  SimParams sim;

  const Link* find_link(std::string_view id) const;
  const Node* find_node(std::string_view id) const;
  const Intersection* find_intersection(std::string_view id) const;
  const SignalProgram* find_program(std::string_view intersection) const;
  bool operator==(const ScenarioConfig&) const = default;
};

struct Violation {
  std::string code;     // e.g. "PhaseLengthMismatch"
  std::string path;     // e.g. "signals[0].phases[1].state"
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// Empty iff the configuration satisfies every structural invariant.
std::vector<Violation> validate_network(const ScenarioConfig& cfg);

// Parses without validating; throws ParseError on malformed input.
ScenarioConfig parse_scenario(std::string_view text);
// Parses and validates; throws ParseError or ValidationError.
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const ScenarioConfig& cfg);

// Throws ValidationError when validate_network reports anything.
void require_valid(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
ScenarioConfig build_preset(std::string_view name);
// Accepts a preset name or a path to a .scn file.
ScenarioConfig resolve_scenario(std::string_view name_or_path);

}  // namespace tsc
