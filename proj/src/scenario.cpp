#include "tsc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tsc {

using nlohmann::json;
using nlohmann::ordered_json;

char turn_letter(Turn t) {
  switch (t) {
    case Turn::Left: return 'L';
    case Turn::Straight: return 'S';
    case Turn::Right: return 'R';
  }
  return '?';
}

Turn turn_from_letter(char c) {
  switch (c) {
    case 'L': return Turn::Left;
    case 'S': return Turn::Straight;
    case 'R': return Turn::Right;
    default: throw ParseError(std::string("unknown turn '") + c + "'");
  }
}

std::int64_t SimParams::total_steps() const {
  return std::llround(sim_period * sim_res);
}

int Intersection::group_count() const {
  int n = 0;
  for (const auto& m : movements) n = std::max(n, m.signal_group + 1);
  return n;
}

double TurnRatios::of(Turn t) const {
  switch (t) {
    case Turn::Left: return left;
    case Turn::Straight: return straight;
    case Turn::Right: return right;
  }
  return 0.0;
}

const Link* ScenarioConfig::find_link(std::string_view id) const {
  for (const auto& l : network.links)
    if (l.id == id) return &l;
  return nullptr;
}

const Node* ScenarioConfig::find_node(std::string_view id) const {
  for (const auto& n : network.nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const Intersection* ScenarioConfig::find_intersection(std::string_view id) const {
  for (const auto& i : network.intersections)
    if (i.id == id) return &i;
  return nullptr;
}

const SignalProgram* ScenarioConfig::find_program(std::string_view intersection) const {
  for (const auto& p : signals)
    if (p.intersection == intersection) return &p;
  return nullptr;
}

namespace {

std::string summarize(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << v.size() << " violation(s)";
  if (!v.empty()) os << "; first: " << v.front().code << " at " << v.front().path << ": " << v.front().message;
  return os.str();
}

// ---- parsing --------------------------------------------------------------

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& at(const std::string& key) const {
    if (!j_.is_object()) throw ParseError(path_ + ": expected object");
    auto it = j_.find(key);
    if (it == j_.end()) throw ParseError(path_ + "." + key + ": missing field");
    return *it;
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  std::string str(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw ParseError(path_ + "." + key + ": expected string");
    return v.get<std::string>();
  }
  double num(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw ParseError(path_ + "." + key + ": expected number");
    return v.get<double>();
  }
  double num_or(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }
  std::int64_t integer(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw ParseError(path_ + "." + key + ": expected integer");
    return v.get<std::int64_t>();
  }
  const json& array(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw ParseError(path_ + "." + key + ": expected array");
    return v;
  }
  std::string sub(const std::string& key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

Node parse_node(const json& j, const std::string& path) {
  Reader r(j, path);
  return Node{r.str("id"), r.num_or("x", 0.0), r.num_or("y", 0.0)};
}

Link parse_link(const json& j, const std::string& path) {
  Reader r(j, path);
  Link l;
  l.id = r.str("id");
  l.from_node = r.str("from");
  l.to_node = r.str("to");
  l.length = r.num("length");
  l.lanes = static_cast<int>(r.integer("lanes"));
  l.speed_limit = r.num("speed_limit");
  return l;
}

Movement parse_movement(const json& j, const std::string& path) {
  Reader r(j, path);
  Movement m;
  m.id = r.str("id");
  m.approach_link = r.str("approach_link");
  m.approach_lane = static_cast<int>(r.integer("lane"));
  auto t = r.str("turn");
  if (t.size() != 1) throw ParseError(r.sub("turn") + ": expected one of L, S, R");
  try {
    m.turn = turn_from_letter(t[0]);
  } catch (const ParseError&) {
    throw ParseError(r.sub("turn") + ": expected one of L, S, R");
  }
  m.exit_link = r.str("exit_link");
  m.signal_group = static_cast<int>(r.integer("signal_group"));
  return m;
}

Intersection parse_intersection(const json& j, const std::string& path) {
  Reader r(j, path);
  Intersection in;
  in.id = r.str("id");
  in.node = r.str("node");
  const auto& mv = r.array("movements");
  for (std::size_t i = 0; i < mv.size(); ++i) in.movements.push_back(parse_movement(mv[i], idx(r.sub("movements"), i)));
  if (r.has("conflicts")) {
    const auto& cf = r.array("conflicts");
    for (std::size_t i = 0; i < cf.size(); ++i) {
      const auto& c = cf[i];
      if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() || !c[1].is_number_integer())
        throw ParseError(idx(r.sub("conflicts"), i) + ": expected [group, group]");
      in.conflicts.emplace_back(c[0].get<int>(), c[1].get<int>());
    }
  }
  return in;
}

DemandSpec parse_demand(const json& j, const std::string& path) {
  Reader r(j, path);
  DemandSpec d;
  d.entry_link = r.str("entry_link");
  d.arrival_rate = r.num("arrival_rate");
  Reader tr(r.at("turn_ratios"), r.sub("turn_ratios"));
  d.turn_ratios.left = tr.num_or("L", 0.0);
  d.turn_ratios.straight = tr.num_or("S", 0.0);
  d.turn_ratios.right = tr.num_or("R", 0.0);
  for (const auto& [key, _] : r.at("turn_ratios").items())
    if (key != "L" && key != "S" && key != "R") throw ParseError(tr.sub(key) + ": unknown turn key");
  return d;
}

SignalProgram parse_program(const json& j, const std::string& path) {
  Reader r(j, path);
  SignalProgram p;
  p.intersection = r.str("intersection");
  const auto& ph = r.array("phases");
  for (std::size_t i = 0; i < ph.size(); ++i) {
    Reader pr(ph[i], idx(r.sub("phases"), i));
    p.phases.push_back(PhaseDef{pr.str("id"), pr.str("state"), pr.num("default_green")});
  }
  return p;
}

ScenarioConfig from_json(const json& root) {
  Reader r(root, "$");
  ScenarioConfig cfg;
  if (r.has("name")) cfg.name = r.str("name");

  Reader net(r.at("network"), "network");
  const auto& nodes = net.array("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) cfg.network.nodes.push_back(parse_node(nodes[i], idx("network.nodes", i)));
  const auto& links = net.array("links");
  for (std::size_t i = 0; i < links.size(); ++i) cfg.network.links.push_back(parse_link(links[i], idx("network.links", i)));
  const auto& ints = net.array("intersections");
  for (std::size_t i = 0; i < ints.size(); ++i)
    cfg.network.intersections.push_back(parse_intersection(ints[i], idx("network.intersections", i)));

  const auto& dem = r.array("demands");
  for (std::size_t i = 0; i < dem.size(); ++i) cfg.demands.push_back(parse_demand(dem[i], idx("demands", i)));
  const auto& sig = r.array("signals");
  for (std::size_t i = 0; i < sig.size(); ++i) cfg.signals.push_back(parse_program(sig[i], idx("signals", i)));

  if (r.has("timing")) {
    Reader t(r.at("timing"), "timing");
    cfg.timing.yellow_time = t.num_or("yellow_time", cfg.timing.yellow_time);
    cfg.timing.allred_time = t.num_or("allred_time", cfg.timing.allred_time);
    cfg.timing.min_green = t.num_or("min_green", cfg.timing.min_green);
    cfg.timing.max_green = t.num_or("max_green", cfg.timing.max_green);
  }
  if (r.has("sim")) {
    Reader s(r.at("sim"), "sim");
    cfg.sim.start_time = s.num_or("start_time", cfg.sim.start_time);
    cfg.sim.sim_period = s.num_or("sim_period", cfg.sim.sim_period);
    if (s.has("sim_res")) cfg.sim.sim_res = static_cast<int>(s.integer("sim_res"));
    if (s.has("seed")) cfg.sim.seed = static_cast<std::uint64_t>(s.integer("seed"));
  }
  return cfg;
}

ordered_json to_json(const ScenarioConfig& cfg) {
  ordered_json root;
  root["name"] = cfg.name;
  ordered_json net;
  net["nodes"] = ordered_json::array();
  for (const auto& n : cfg.network.nodes) net["nodes"].push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  net["links"] = ordered_json::array();
  for (const auto& l : cfg.network.links)
    net["links"].push_back({{"id", l.id},
                            {"from", l.from_node},
                            {"to", l.to_node},
                            {"length", l.length},
                            {"lanes", l.lanes},
                            {"speed_limit", l.speed_limit}});
  net["intersections"] = ordered_json::array();
  for (const auto& in : cfg.network.intersections) {
    ordered_json ij;
    ij["id"] = in.id;
    ij["node"] = in.node;
    ij["movements"] = ordered_json::array();
    for (const auto& m : in.movements)
      ij["movements"].push_back({{"id", m.id},
                                 {"approach_link", m.approach_link},
                                 {"lane", m.approach_lane},
                                 {"turn", std::string(1, turn_letter(m.turn))},
                                 {"exit_link", m.exit_link},
                                 {"signal_group", m.signal_group}});
    ij["conflicts"] = ordered_json::array();
    for (const auto& [a, b] : in.conflicts) ij["conflicts"].push_back({a, b});
    net["intersections"].push_back(std::move(ij));
  }
  root["network"] = std::move(net);

  root["demands"] = ordered_json::array();
  for (const auto& d : cfg.demands)
    root["demands"].push_back({{"entry_link", d.entry_link},
                               {"arrival_rate", d.arrival_rate},
                               {"turn_ratios",
                                {{"L", d.turn_ratios.left}, {"S", d.turn_ratios.straight}, {"R", d.turn_ratios.right}}}});
  root["signals"] = ordered_json::array();
  for (const auto& p : cfg.signals) {
    ordered_json pj;
    pj["intersection"] = p.intersection;
    pj["phases"] = ordered_json::array();
    for (const auto& ph : p.phases)
      pj["phases"].push_back({{"id", ph.id}, {"state", ph.state}, {"default_green", ph.default_green}});
    root["signals"].push_back(std::move(pj));
  }
  root["timing"] = {{"yellow_time", cfg.timing.yellow_time},
                    {"allred_time", cfg.timing.allred_time},
                    {"min_green", cfg.timing.min_green},
                    {"max_green", cfg.timing.max_green}};
  root["sim"] = {{"start_time", cfg.sim.start_time},
                 {"sim_period", cfg.sim.sim_period},
                 {"sim_res", cfg.sim.sim_res},
                 {"seed", cfg.sim.seed}};
  return root;
}

// ---- validation -----------------------------------------------------------

bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

class Collector {
 public:
  void add(std::string code, std::string path, std::string message) {
    out.push_back(Violation{std::move(code), std::move(path), std::move(message)});
  }
  std::vector<Violation> out;
};

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error("ValidationError", summarize(violations)), violations_(std::move(violations)) {}

std::vector<Violation> validate_network(const ScenarioConfig& cfg) {
  Collector v;
  const auto& net = cfg.network;

  std::set<std::string> node_ids;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    const auto& n = net.nodes[i];
    auto p = idx("network.nodes", i);
    if (!valid_id(n.id)) v.add("BadId", p + ".id", "ids must be non-empty [A-Za-z0-9_-]");
    if (!node_ids.insert(n.id).second) v.add("DuplicateId", p + ".id", "duplicate node id " + n.id);
  }

  std::set<std::string> link_ids;
  for (std::size_t i = 0; i < net.links.size(); ++i) {
    const auto& l = net.links[i];
    auto p = idx("network.links", i);
    if (!valid_id(l.id)) v.add("BadId", p + ".id", "ids must be non-empty [A-Za-z0-9_-]");
    if (!link_ids.insert(l.id).second) v.add("DuplicateId", p + ".id", "duplicate link id " + l.id);
    if (!(l.length > 0)) v.add("BadLength", p + ".length", "link length must be > 0");
    if (l.lanes < 1) v.add("BadLanes", p + ".lanes", "link needs at least one lane");
    if (!(l.speed_limit > 0)) v.add("BadSpeed", p + ".speed_limit", "speed limit must be > 0");
    if (!node_ids.count(l.from_node)) v.add("DanglingNode", p + ".from", "unknown node " + l.from_node);
    if (!node_ids.count(l.to_node)) v.add("DanglingNode", p + ".to", "unknown node " + l.to_node);
  }

  std::set<std::string> int_ids;
  std::set<std::string> int_nodes;
  for (std::size_t i = 0; i < net.intersections.size(); ++i) {
    const auto& in = net.intersections[i];
    auto p = idx("network.intersections", i);
    if (!valid_id(in.id)) v.add("BadId", p + ".id", "ids must be non-empty [A-Za-z0-9_-]");
    if (!int_ids.insert(in.id).second) v.add("DuplicateId", p + ".id", "duplicate intersection id " + in.id);
    if (!node_ids.count(in.node)) v.add("DanglingNode", p + ".node", "unknown node " + in.node);
    if (!int_nodes.insert(in.node).second) v.add("DuplicateId", p + ".node", "node already hosts an intersection");
    if (in.movements.empty()) v.add("NoMovements", p + ".movements", "intersection has no movements");

    std::set<std::tuple<std::string, int, Turn>> keys;
    std::set<std::string> mov_ids;
    std::set<int> groups;
    for (std::size_t k = 0; k < in.movements.size(); ++k) {
      const auto& m = in.movements[k];
      auto mp = idx(p + ".movements", k);
      if (!valid_id(m.id)) v.add("BadId", mp + ".id", "ids must be non-empty [A-Za-z0-9_-]");
      if (!mov_ids.insert(m.id).second) v.add("DuplicateId", mp + ".id", "duplicate movement id " + m.id);
      if (!keys.insert({m.approach_link, m.approach_lane, m.turn}).second)
        v.add("DuplicateMovement", mp, "(approach_link, lane, turn) must be unique");
      const Link* a = cfg.find_link(m.approach_link);
      const Link* e = cfg.find_link(m.exit_link);
      if (!a) {
        v.add("DanglingLink", mp + ".approach_link", "unknown link " + m.approach_link);
      } else {
        if (a->to_node != in.node) v.add("ApproachMismatch", mp + ".approach_link", "approach link does not end at the intersection");
        if (m.approach_lane < 0 || m.approach_lane >= a->lanes)
          v.add("LaneOutOfRange", mp + ".lane", "lane index outside the approach link");
      }
      if (!e) {
        v.add("DanglingLink", mp + ".exit_link", "unknown link " + m.exit_link);
      } else if (e->from_node != in.node) {
        v.add("ExitMismatch", mp + ".exit_link", "exit link does not start at the intersection");
      }
      if (m.signal_group < 0) v.add("BadGroup", mp + ".signal_group", "signal group must be >= 0");
      groups.insert(m.signal_group);
    }
    int gc = in.group_count();
    for (int g = 0; g < gc; ++g)
      if (!groups.count(g)) v.add("GroupGap", p + ".movements", "signal group " + std::to_string(g) + " has no movement");
    for (std::size_t k = 0; k < in.conflicts.size(); ++k) {
      auto [a, b] = in.conflicts[k];
      if (a < 0 || b < 0 || a >= gc || b >= gc || a == b)
        v.add("BadConflict", idx(p + ".conflicts", k), "conflict must name two distinct existing groups");
    }
  }

  // Every intersection needs exactly one program whose phases match it.
  std::set<std::string> programmed;
  for (std::size_t i = 0; i < cfg.signals.size(); ++i) {
    const auto& prog = cfg.signals[i];
    auto p = idx("signals", i);
    const Intersection* in = cfg.find_intersection(prog.intersection);
    if (!in) {
      v.add("UnknownIntersection", p + ".intersection", "unknown intersection " + prog.intersection);
      continue;
    }
    if (!programmed.insert(prog.intersection).second)
      v.add("DuplicateProgram", p + ".intersection", "intersection already has a program");
    if (prog.phases.empty()) v.add("EmptyProgram", p + ".phases", "program has no phases");
    std::size_t gc = static_cast<std::size_t>(in->group_count());
    std::set<std::string> phase_ids;
    for (std::size_t k = 0; k < prog.phases.size(); ++k) {
      const auto& ph = prog.phases[k];
      auto pp = idx(p + ".phases", k);
      if (!phase_ids.insert(ph.id).second) v.add("DuplicateId", pp + ".id", "duplicate phase id " + ph.id);
      if (ph.state.size() != gc) {
        v.add("PhaseLengthMismatch", pp + ".state",
              "phase string has " + std::to_string(ph.state.size()) + " characters, intersection has " +
                  std::to_string(gc) + " signal groups");
        continue;
      }
      if (ph.state.find_first_not_of("GR") != std::string::npos)
        v.add("BadSignalChar", pp + ".state", "phase strings use only G and R");
      if (ph.state.find('G') == std::string::npos) v.add("NoGreen", pp + ".state", "phase has no green group");
      for (auto [a, b] : in->conflicts) {
        if (a >= 0 && b >= 0 && static_cast<std::size_t>(a) < gc && static_cast<std::size_t>(b) < gc &&
            ph.state[a] == 'G' && ph.state[b] == 'G')
          v.add("ConflictingGreen", pp + ".state",
                "groups " + std::to_string(a) + " and " + std::to_string(b) + " conflict");
      }
      if (!(ph.default_green > 0)) v.add("BadGreen", pp + ".default_green", "default green must be > 0");
    }
  }
  for (std::size_t i = 0; i < net.intersections.size(); ++i)
    if (!programmed.count(net.intersections[i].id))
      v.add("MissingProgram", idx("network.intersections", i), "intersection has no signal program");

  std::set<std::string> entries;
  for (std::size_t i = 0; i < cfg.demands.size(); ++i) {
    const auto& d = cfg.demands[i];
    auto p = idx("demands", i);
    const Link* l = cfg.find_link(d.entry_link);
    if (!l) {
      v.add("DanglingLink", p + ".entry_link", "unknown link " + d.entry_link);
    } else {
      if (int_nodes.count(l->from_node)) v.add("EntryNotBoundary", p + ".entry_link", "entry link must start at a boundary node");
      const Intersection* in = nullptr;
      for (const auto& cand : net.intersections)
        if (cand.node == l->to_node) in = &cand;
      if (!in) {
        v.add("EntryNotApproach", p + ".entry_link", "entry link must feed an intersection");
      } else {
        for (Turn t : {Turn::Left, Turn::Straight, Turn::Right}) {
          if (d.turn_ratios.of(t) <= 0) continue;
          bool found = std::any_of(in->movements.begin(), in->movements.end(), [&](const Movement& m) {
            return m.approach_link == d.entry_link && m.turn == t;
          });
          if (!found)
            v.add("MissingTurnMovement", p + ".turn_ratios." + std::string(1, turn_letter(t)),
                  "positive ratio for a turn with no movement");
        }
      }
    }
    if (!entries.insert(d.entry_link).second) v.add("DuplicateDemand", p + ".entry_link", "entry link has two demands");
    if (!(d.arrival_rate >= 0) || !std::isfinite(d.arrival_rate))
      v.add("NegativeRate", p + ".arrival_rate", "arrival rate must be >= 0");
    const auto& tr = d.turn_ratios;
    if (tr.left < 0 || tr.straight < 0 || tr.right < 0)
      v.add("NegativeRatio", p + ".turn_ratios", "turn ratios must be >= 0");
    double sum = tr.left + tr.straight + tr.right;
    if (std::abs(sum - 1.0) > 1e-9)
      v.add("TurnRatioSum", p + ".turn_ratios", "turn ratios of demand " + d.entry_link + " sum to " + std::to_string(sum));
  }

  const auto& t = cfg.timing;
  if (t.yellow_time < 0) v.add("BadTiming", "timing.yellow_time", "yellow_time must be >= 0");
  if (t.allred_time < 0) v.add("BadTiming", "timing.allred_time", "allred_time must be >= 0");
  if (!(t.min_green > 0) || t.min_green > t.max_green)
    v.add("BadTiming", "timing.min_green", "need 0 < min_green <= max_green");

  const auto& s = cfg.sim;
  if (s.sim_res < 1) v.add("BadSim", "sim.sim_res", "sim_res must be >= 1");
  if (!(s.start_time >= 0)) v.add("BadSim", "sim.start_time", "start_time must be >= 0");
  if (!(s.sim_period > s.start_time)) v.add("BadSim", "sim.sim_period", "sim_period must exceed start_time");
  return v.out;
}

ScenarioConfig parse_scenario(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }
  try {
    return from_json(root);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad scenario field: ") + e.what());
  }
}

void require_valid(const ScenarioConfig& cfg) {
  auto violations = validate_network(cfg);
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse_scenario(ss.str());
  require_valid(cfg);
  return cfg;
}

std::string serialize_scenario(const ScenarioConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ScenarioConfig resolve_scenario(std::string_view name_or_path) {
  for (const auto& p : preset_names())
    if (p == name_or_path) return build_preset(name_or_path);
  return load_scenario(std::filesystem::path(std::string(name_or_path)));
}

}  // namespace tsc
