#include <array>
#include <string>

#include "tsc/scenario.hpp"

namespace tsc {

namespace {

constexpr double kBoundaryLength = 150.0;
constexpr double kSpacing = 300.0;
constexpr double kDesiredSpeed = 50.0;

enum Side { West = 0, East = 1, North = 2, South = 3 };

// Exit side reached by a turn from the approach on `from`.
Side exit_side(Side from, Turn t) {
  switch (from) {
    case West: return t == Turn::Left ? North : t == Turn::Straight ? East : South;
    case East: return t == Turn::Left ? South : t == Turn::Straight ? West : North;
    case North: return t == Turn::Left ? East : t == Turn::Straight ? South : West;
    case South: return t == Turn::Left ? West : t == Turn::Straight ? North : East;
  }
  return East;
}

const char* side_tag(Side s) {
  static constexpr std::array<const char*, 4> tags = {"W", "E", "N", "S"};
  return tags[s];
}

enum class Layout { TwoPhase, ThreePhase, FourPhase };

int group_of(Layout layout, Side from, Turn t) {
  bool ew = from == West || from == East;
  bool left = t == Turn::Left;
  switch (layout) {
    case Layout::TwoPhase: return ew ? 0 : 1;
    case Layout::ThreePhase: return ew ? (left ? 1 : 0) : 2;
    case Layout::FourPhase: return ew ? (left ? 1 : 0) : (left ? 3 : 2);
  }
  return 0;
}

struct Leg {
  std::string in_link;   // approaches the intersection
  std::string out_link;  // leaves the intersection
  int lanes = 1;
};

void add_link(ScenarioConfig& cfg, const std::string& from, const std::string& to, double length, int lanes) {
  cfg.network.links.push_back(Link{from + "_" + to, from, to, length, lanes, kDesiredSpeed});
}

void add_intersection(ScenarioConfig& cfg, const std::string& id, const std::string& node, const std::array<Leg, 4>& legs,
                      bool through_only, Layout layout) {
  Intersection in;
  in.id = id;
  in.node = node;
  for (Side from : {West, East, North, South}) {
    const Leg& leg = legs[from];
    for (Turn t : {Turn::Left, Turn::Straight, Turn::Right}) {
      if (through_only && t != Turn::Straight) continue;
      int lane = (leg.lanes == 1 || t == Turn::Left) ? 0 : leg.lanes - 1;
      in.movements.push_back(Movement{std::string(side_tag(from)) + "_" + turn_letter(t), leg.in_link, lane, t,
                                      legs[exit_side(from, t)].out_link, group_of(layout, from, t)});
    }
  }
  int groups = in.group_count();
  for (int a = 0; a < groups; ++a)
    for (int b = a + 1; b < groups; ++b) in.conflicts.emplace_back(a, b);
  cfg.network.intersections.push_back(std::move(in));
}

SignalProgram program_for(const std::string& id, Layout layout, double ew, double ew_l, double ns, double ns_l) {
  SignalProgram p;
  p.intersection = id;
  switch (layout) {
    case Layout::TwoPhase:
      p.phases = {{"EW", "GR", ew}, {"NS", "RG", ns}};
      break;
    case Layout::ThreePhase:
      p.phases = {{"EW", "GRR", ew}, {"EW_L", "RGR", ew_l}, {"NS", "RRG", ns}};
      break;
    case Layout::FourPhase:
      p.phases = {{"EW", "GRRR", ew}, {"EW_L", "RGRR", ew_l}, {"NS", "RRGR", ns}, {"NS_L", "RRRG", ns_l}};
      break;
  }
  return p;
}

Timing experiment_timing() {
  Timing t;
  t.yellow_time = 3.0;
  t.allred_time = 2.0;
  t.min_green = 5.0;  // experiment setting; the environment default is 8
  t.max_green = 120.0;
  return t;
}

ScenarioConfig single() {
  ScenarioConfig cfg;
  cfg.name = "single";
  auto& nodes = cfg.network.nodes;
  nodes = {{"C", 0, 0},
           {"W", -kBoundaryLength, 0},
           {"E", kBoundaryLength, 0},
           {"N", 0, kBoundaryLength},
           {"S", 0, -kBoundaryLength}};
  for (const char* s : {"W", "E", "N", "S"}) {
    add_link(cfg, s, "C", kBoundaryLength, 2);
    add_link(cfg, "C", s, kBoundaryLength, 2);
  }
  std::array<Leg, 4> legs = {Leg{"W_C", "C_W", 2}, Leg{"E_C", "C_E", 2}, Leg{"N_C", "C_N", 2}, Leg{"S_C", "C_S", 2}};
  add_intersection(cfg, "1", "C", legs, false, Layout::FourPhase);

  TurnRatios ratios{0.1, 0.8, 0.1};
  cfg.demands = {{"W_C", 1200, ratios}, {"E_C", 1200, ratios}, {"N_C", 800, ratios}, {"S_C", 800, ratios}};
  // Fixed-time greens proportional to 1200:800 over an 80 s cycle.
  cfg.signals = {program_for("1", Layout::FourPhase, 27, 8, 17, 8)};
  cfg.timing = experiment_timing();
  return cfg;
}

// A straight east-west corridor of `count` intersections.
struct Corridor {
  std::vector<std::string> nodes;  // intersection node ids, west to east
};

Corridor build_corridor(ScenarioConfig& cfg, int count, int arterial_lanes, int side_lanes) {
  Corridor c;
  auto& nodes = cfg.network.nodes;
  nodes.push_back({"W", -kBoundaryLength, 0});
  for (int i = 1; i <= count; ++i) {
    double x = (i - 1) * kSpacing;
    std::string n = "n" + std::to_string(i);
    c.nodes.push_back(n);
    nodes.push_back({n, x, 0});
    nodes.push_back({"N" + std::to_string(i), x, kBoundaryLength});
    nodes.push_back({"S" + std::to_string(i), x, -kBoundaryLength});
  }
  nodes.push_back({"E", (count - 1) * kSpacing + kBoundaryLength, 0});

  std::vector<std::string> chain = {"W"};
  chain.insert(chain.end(), c.nodes.begin(), c.nodes.end());
  chain.push_back("E");
  for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
    bool boundary = k == 0 || k + 2 == chain.size();
    double len = boundary ? kBoundaryLength : kSpacing;
    add_link(cfg, chain[k], chain[k + 1], len, arterial_lanes);
    add_link(cfg, chain[k + 1], chain[k], len, arterial_lanes);
  }
  for (int i = 1; i <= count; ++i) {
    std::string n = c.nodes[i - 1];
    for (const std::string s : {"N", "S"}) {
      std::string side = s + std::to_string(i);
      add_link(cfg, side, n, kBoundaryLength, side_lanes);
      add_link(cfg, n, side, kBoundaryLength, side_lanes);
    }
  }
  return c;
}

std::array<Leg, 4> corridor_legs(const Corridor& c, int i, int arterial_lanes, int side_lanes) {
  // i is 1-based
  const std::string& n = c.nodes[i - 1];
  std::string west = i == 1 ? "W" : c.nodes[i - 2];
  std::string east = i == static_cast<int>(c.nodes.size()) ? "E" : c.nodes[i];
  std::string north = "N" + std::to_string(i);
  std::string south = "S" + std::to_string(i);
  return {Leg{west + "_" + n, n + "_" + west, arterial_lanes}, Leg{east + "_" + n, n + "_" + east, arterial_lanes},
          Leg{north + "_" + n, n + "_" + north, side_lanes}, Leg{south + "_" + n, n + "_" + south, side_lanes}};
}

ScenarioConfig arterial3() {
  ScenarioConfig cfg;
  cfg.name = "arterial3";
  Corridor c = build_corridor(cfg, 3, 1, 1);
  for (int i = 1; i <= 3; ++i) {
    add_intersection(cfg, std::to_string(i), c.nodes[i - 1], corridor_legs(c, i, 1, 1), true, Layout::TwoPhase);
    // 3:2 split of a 40 s cycle after two 5 s intergreens.
    cfg.signals.push_back(program_for(std::to_string(i), Layout::TwoPhase, 19, 0, 11, 0));
  }
  TurnRatios through{0.0, 1.0, 0.0};
  cfg.demands.push_back({"W_n1", 1200, through});
  cfg.demands.push_back({"E_n3", 1200, through});
  for (int i = 1; i <= 3; ++i) {
    std::string n = c.nodes[i - 1];
    cfg.demands.push_back({"N" + std::to_string(i) + "_" + n, 800, through});
    cfg.demands.push_back({"S" + std::to_string(i) + "_" + n, 800, through});
  }
  cfg.timing = experiment_timing();
  return cfg;
}

// Synthetic corridor geometry carrying the observed Dayuan inflows.
ScenarioConfig dayuan5() {
  ScenarioConfig cfg;
  cfg.name = "dayuan5";
  Corridor c = build_corridor(cfg, 5, 2, 1);
  const std::array<int, 5> phase_counts = {2, 2, 2, 3, 4};
  for (int i = 1; i <= 5; ++i) {
    Layout layout = phase_counts[i - 1] == 2   ? Layout::TwoPhase
                    : phase_counts[i - 1] == 3 ? Layout::ThreePhase
                                               : Layout::FourPhase;
    add_intersection(cfg, std::to_string(i), c.nodes[i - 1], corridor_legs(c, i, 2, 1), false, layout);
    cfg.signals.push_back(program_for(std::to_string(i), layout, 30, 10, 15, 8));
  }
  TurnRatios arterial{0.1, 0.8, 0.1};
  TurnRatios side{0.3, 0.4, 0.3};
  cfg.demands = {
      {"W_n1", 1623, arterial},  // Minsheng S Rd
      {"N1_n1", 869, side},      // Zhongzheng E Rd (side approach at intersection 1)
      {"N2_n2", 46, side},       // Minan Rd
      {"N3_n3", 498, side},      // Ping'an Rd
      {"N4_n4", 396, side},      // Hengnan Rd
      {"E_n5", 1950, arterial},  // Zhongzheng E Rd
      {"N5_n5", 412, side},      // interchange ramp
      {"S5_n5", 199, side},      // Lane 444
  };
  cfg.timing = experiment_timing();
  return cfg;
}

}  // namespace

std::vector<std::string> preset_names() { return {"single", "arterial3", "dayuan5"}; }

ScenarioConfig build_preset(std::string_view name) {
  if (name == "single") return single();
  if (name == "arterial3") return arterial3();
  if (name == "dayuan5") return dayuan5();
  throw UnknownPreset("unknown preset '" + std::string(name) + "' (expected single, arterial3 or dayuan5)");
}

}  // namespace tsc
