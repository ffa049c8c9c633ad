#include "tsc/attrbus.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace tsc::bus {

namespace {

struct CatalogEntry {
  const char* path;
  const char* type;
  const char* access;
  const char* meaning;
};

constexpr CatalogEntry kCatalog[] = {
    {"sim.clock", "float", "R", "simulation time in seconds"},
    {"sim.step", "int", "R", "engine steps taken so far"},
    {"sim.res", "int", "R", "steps per simulated second"},
    {"sim.period", "float", "R", "horizon in seconds"},
    {"ts.<id>.phase", "string", "R", "live signal string, one char per signal group (G/Y/R)"},
    {"ts.<id>.phase_index", "int", "R", "active program phase (outgoing phase during a transition)"},
    {"ts.<id>.stage", "string", "R", "GREEN, YELLOW or ALLRED"},
    {"ts.<id>.green_elapsed", "float", "R", "seconds since the current green began"},
    {"ts.<id>.committed_duration", "float", "RW", "total length of the current green; writes outside [min_green, max_green] fail"},
    {"ts.<id>.pending_phase", "int", "RW", "requested next phase, -1 if none; writing requests that phase"},
    {"ts.<id>.crossings", "int", "R", "stop-line crossings since clock 0"},
    {"ts.<id>.delay", "float", "R", "delay accrued on the approach links"},
    {"ts.<id>.ignored_writes", "int", "R", "group-state write sets that matched no program phase"},
    {"ts.<id>.sg.<k>.state", "string", "RW", "state of signal group k; writes accept G or R and are staged until the next STEP"},
    {"lane.<id>.count", "int", "R", "vehicles on the lane"},
    {"lane.<id>.queue", "int", "R", "vehicles on the lane slower than 5 km/h"},
    {"lane.<id>.iwait", "float", "R", "internal waiting time accrued on the lane"},
    {"link.<id>.delay", "float", "R", "delay accrued on the link"},
    {"entry.<link>.pending", "int", "R", "vehicles waiting to enter at this boundary link"},
    {"entry.<link>.bwait", "float", "R", "boundary waiting time accrued at this entry"},
    {"net.total_travel_time", "float", "R", "seconds spent in the network by all vehicles"},
    {"net.total_travel_distance", "float", "R", "metres driven by all vehicles"},
    {"net.total_delay", "float", "R", "travel time minus free-flow time, summed"},
    {"net.total_iwaiting_time", "float", "R", "internal waiting time, summed"},
    {"net.total_bwaiting_time", "float", "R", "boundary waiting time, summed"},
    {"net.total_arrived", "int", "R", "vehicles that left the network"},
    {"net.mean_speed", "float", "R", "instantaneous mean speed in m/s, 0 when empty"},
    {"net.spawned", "int", "R", "vehicles generated"},
    {"net.active", "int", "R", "vehicles inside the network"},
    {"net.pending", "int", "R", "vehicles waiting at all entries"},
};

std::string build_catalog() {
  std::string out =
      "# Attribute paths\n\n"
      "`<id>` is an intersection id, `<k>` a signal-group index, lane ids are `<link>_<lane>`.\n\n"
      "| path | type | access | meaning |\n"
      "|---|---|---|---|\n";
  for (const auto& e : kCatalog) out += fmt::format("| `{}` | {} | {} | {} |\n", e.path, e.type, e.access, e.meaning);
  return out;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

[[noreturn]] void unknown(std::string_view path) { throw UnknownPath(fmt::format("unknown attribute path '{}'", path)); }

json error_reply(const json& id, std::string_view code, std::string_view message) {
  return json{{"id", id}, {"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

}  // namespace

const std::string& catalog_text() {
  static const std::string text = build_catalog();
  return text;
}

std::string catalog_hash() { return fmt::format("{:016x}", fnv1a64(catalog_text())); }

AttrServer::AttrServer(Simulation sim) : sim_(std::move(sim)) {
  staged_.resize(sim_.intersections().size());
  ignored_.assign(sim_.intersections().size(), 0);
}

Target AttrServer::resolve(std::string_view path) const {
  using K = Target::Kind;
  auto parts = split_path(path);
  const auto n = parts.size();
  const std::string_view head = parts[0];
  if (head == "sim" && n == 2) {
    if (parts[1] == "clock") return {K::SimClock};
    if (parts[1] == "step") return {K::SimStep};
    if (parts[1] == "res") return {K::SimRes};
    if (parts[1] == "period") return {K::SimPeriod};
  } else if (head == "net" && n == 2) {
    static const std::pair<const char*, K> names[] = {
        {"total_travel_time", K::NetTravelTime}, {"total_travel_distance", K::NetDistance},
        {"total_delay", K::NetDelay},            {"total_iwaiting_time", K::NetIwait},
        {"total_bwaiting_time", K::NetBwait},    {"total_arrived", K::NetArrived},
        {"mean_speed", K::NetMeanSpeed},         {"spawned", K::NetSpawned},
        {"active", K::NetActive},                {"pending", K::NetPending}};
    for (const auto& [name, kind] : names)
      if (parts[1] == name) return {kind};
  } else if (head == "ts" && n >= 3) {
    int ts = sim_.intersection_index(parts[1]);
    if (ts < 0) unknown(path);
    if (n == 3) {
      static const std::pair<const char*, K> names[] = {
          {"phase", K::TsPhase},         {"phase_index", K::TsPhaseIndex},
          {"stage", K::TsStage},         {"green_elapsed", K::TsGreenElapsed},
          {"committed_duration", K::TsCommitted}, {"pending_phase", K::TsPending},
          {"crossings", K::TsCrossings}, {"delay", K::TsDelay},
          {"ignored_writes", K::TsIgnored}};
      for (const auto& [name, kind] : names)
        if (parts[2] == name) return {kind, ts};
    } else if (n == 5 && parts[2] == "sg" && parts[4] == "state") {
      int k = -1;
      std::string digits(parts[3]);
      if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit) && digits.size() < 6)
        k = std::stoi(digits);
      if (k < 0 || k >= sim_.intersections()[ts].group_count) unknown(path);
      return {K::TsGroupState, ts, k};
    }
  } else if (head == "lane" && n == 3) {
    int lane = sim_.lane_index(parts[1]);
    if (lane < 0) unknown(path);
    if (parts[2] == "count") return {K::LaneCount, lane};
    if (parts[2] == "queue") return {K::LaneQueue, lane};
    if (parts[2] == "iwait") return {K::LaneIwait, lane};
  } else if (head == "link" && n == 3) {
    int link = sim_.link_index(parts[1]);
    if (link < 0) unknown(path);
    if (parts[2] == "delay") return {K::LinkDelay, link};
  } else if (head == "entry" && n == 3) {
    int e = sim_.entry_index(parts[1]);
    if (e < 0) unknown(path);
    if (parts[2] == "pending") return {K::EntryPending, e};
    if (parts[2] == "bwait") return {K::EntryBwait, e};
  }
  unknown(path);
}

std::string AttrServer::staged_or_live(int ts) const {
  if (staged_[ts]) return *staged_[ts];
  return sim_.controllers()[ts].signal_string();
}

json AttrServer::read(const Target& t) const {
  using K = Target::Kind;
  const auto& c = t.index >= 0 && t.kind >= K::TsPhase && t.kind <= K::TsGroupState ? &sim_.controllers()[t.index]
                                                                                    : nullptr;
  switch (t.kind) {
    case K::SimClock: return sim_.clock();
    case K::SimStep: return sim_.step_index();
    case K::SimRes: return sim_.config().sim.sim_res;
    case K::SimPeriod: return sim_.config().sim.sim_period;
    case K::TsPhase: return c->signal_string();
    case K::TsPhaseIndex: return c->current_phase();
    case K::TsStage: return stage_name(c->stage());
    case K::TsGreenElapsed: return c->green_elapsed();
    case K::TsCommitted: return c->committed_duration();
    case K::TsPending: return c->pending_next() ? static_cast<int>(*c->pending_next()) : -1;
    case K::TsCrossings: return sim_.crossings(t.index);
    case K::TsDelay: {
      double d = 0.0;
      for (int l : sim_.intersections()[t.index].approach_links) d += sim_.link_delay(l);
      return d;
    }
    case K::TsIgnored: return ignored_[t.index];
    case K::TsGroupState: return std::string(1, staged_or_live(t.index)[t.sub]);
    case K::LaneCount: return sim_.lane_count(t.index);
    case K::LaneQueue: return sim_.lane_queue(t.index);
    case K::LaneIwait: return sim_.lane_iwait(t.index);
    case K::LinkDelay: return sim_.link_delay(t.index);
    case K::EntryPending: return sim_.boundary_queues()[t.index].pending.size();
    case K::EntryBwait: return sim_.boundary_queues()[t.index].waiting_boundary;
    case K::NetTravelTime: return sim_.total_travel_time();
    case K::NetDistance: return sim_.total_travel_distance();
    case K::NetDelay: return sim_.total_delay();
    case K::NetIwait: return sim_.total_iwaiting_time();
    case K::NetBwait: return sim_.total_bwaiting_time();
    case K::NetArrived: return sim_.total_arrived();
    case K::NetMeanSpeed: return sim_.mean_speed();
    case K::NetSpawned: return sim_.spawned();
    case K::NetActive: return sim_.active();
    case K::NetPending: return sim_.boundary_pending();
  }
  return nullptr;
}

void AttrServer::check_write(const Target& t, const json& value, std::string_view path) const {
  using K = Target::Kind;
  switch (t.kind) {
    case K::TsGroupState:
      if (!value.is_string() || (value != "G" && value != "R"))
        throw BadValue(fmt::format("{} accepts \"G\" or \"R\", got {}", path, value.dump()));
      return;
    case K::TsCommitted: {
      const Timing& tm = sim_.controllers()[t.index].timing();
      if (!value.is_number() || value.get<double>() < tm.min_green || value.get<double>() > tm.max_green)
        throw BadValue(fmt::format("{} must be a number in [{}, {}], got {}", path, tm.min_green, tm.max_green,
                                   value.dump()));
      return;
    }
    case K::TsPending: {
      auto n = static_cast<std::int64_t>(sim_.controllers()[t.index].phase_count());
      if (!value.is_number_integer() || value.get<std::int64_t>() < 0 || value.get<std::int64_t>() >= n)
        throw BadValue(fmt::format("{} must be a phase index in [0, {}), got {}", path, n, value.dump()));
      return;
    }
    default:
      throw ReadOnlyPath(fmt::format("{} is read-only", path));
  }
}

void AttrServer::write(const Target& t, const json& value) {
  using K = Target::Kind;
  auto& c = sim_.controllers()[t.index];
  switch (t.kind) {
    case K::TsGroupState: {
      std::string s = staged_or_live(t.index);
      s[t.sub] = value.get<std::string>()[0];
      staged_[t.index] = std::move(s);
      return;
    }
    case K::TsCommitted:
      c.set_committed_duration(value.get<double>());
      return;
    case K::TsPending: {
      auto p = value.get<std::size_t>();
      c.set_next_phase(p, c.program()[p].default_green);
      return;
    }
    default:
      return;
  }
}

void AttrServer::commit_staged() {
  auto& ctrls = sim_.controllers();
  for (std::size_t i = 0; i < staged_.size(); ++i) {
    if (!staged_[i]) continue;
    const auto& prog = ctrls[i].program();
    auto it = std::find_if(prog.begin(), prog.end(), [&](const PhaseDef& p) { return p.state == *staged_[i]; });
    if (it == prog.end()) {
      ++ignored_[i];
    } else {
      auto p = static_cast<std::size_t>(it - prog.begin());
      ctrls[i].set_next_phase(p, it->default_green);
    }
    staged_[i].reset();
  }
}

json AttrServer::hello_value() const {
  json inter = json::array();
  for (std::size_t i = 0; i < sim_.intersections().size(); ++i) {
    const auto& in = sim_.intersections()[i];
    const auto& ctrl = sim_.controllers()[i];
    json phases = json::array();
    for (const auto& p : ctrl.program()) phases.push_back({{"id", p.id}, {"state", p.state}, {"default_green", p.default_green}});
    json lanes = json::array();
    for (int gl : in.approach_lanes) lanes.push_back(sim_.lanes()[gl].id);
    json links = json::array();
    json entries = json::array();
    for (int l : in.approach_links) {
      links.push_back(sim_.links()[l].id);
      if (sim_.entry_index(sim_.links()[l].id) >= 0) entries.push_back(sim_.links()[l].id);
    }
    inter.push_back({{"id", in.id},
                     {"groups", in.group_count},
                     {"phases", phases},
                     {"approach_lanes", lanes},
                     {"approach_links", links},
                     {"entries", entries},
                     {"min_green", ctrl.timing().min_green},
                     {"max_green", ctrl.timing().max_green}});
  }
  return {{"version", kProtocolVersion},
          {"catalog_hash", catalog_hash()},
          {"scenario", sim_.config().name},
          {"sim_res", sim_.config().sim.sim_res},
          {"sim_period", sim_.config().sim.sim_period},
          {"intersections", inter}};
}

json AttrServer::dispatch(const std::string& kind, const json& req) {
  if (kind == "HELLO") return hello_value();
  if (kind == "BYE") {
    closed_ = true;
    return nullptr;
  }
  if (kind == "GET") {
    std::string path = req.at("path").get<std::string>();
    return read(resolve(path));
  }
  if (kind == "SET") {
    std::string path = req.at("path").get<std::string>();
    Target t = resolve(path);
    const json& v = req.contains("value") ? req.at("value") : json();
    check_write(t, v, path);
    write(t, v);
    return nullptr;
  }
  if (kind == "STEP") {
    std::int64_t count = req.value("count", 1);
    if (count < 0) throw BadValue("STEP count must be >= 0");
    if (sim_.step_index() + count > sim_.total_steps())
      throw HorizonExceeded(fmt::format("{} steps from clock {:.1f} would pass the {} s horizon", count, sim_.clock(),
                                        sim_.config().sim.sim_period));
    for (std::int64_t i = 0; i < count; ++i) {
      commit_staged();
      sim_.step();
    }
    return sim_.clock();
  }
  if (kind == "BATCH") {
    const json& ops = req.at("ops");
    if (!ops.is_array()) throw BadValue("BATCH ops must be an array");
    // Everything is checked before anything is applied.
    std::vector<Target> targets;
    targets.reserve(ops.size());
    for (const auto& op : ops) {
      std::string path = op.at("path").get<std::string>();
      std::string what = op.value("op", "get");
      targets.push_back(resolve(path));
      if (what == "set") {
        check_write(targets.back(), op.contains("value") ? op.at("value") : json(), path);
      } else if (what != "get") {
        throw BadValue(fmt::format("unknown batch op '{}'", what));
      }
    }
    json out = json::array();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (ops[i].value("op", "get") == "set") {
        write(targets[i], ops[i].at("value"));
        out.push_back(nullptr);
      } else {
        out.push_back(read(targets[i]));
      }
    }
    return out;
  }
  throw BadValue(fmt::format("unknown message kind '{}'", kind));
}

json AttrServer::handle(const json& request) {
  json id = request.is_object() && request.contains("id") ? request["id"] : json();
  if (!request.is_object() || !request.contains("kind") || !request["kind"].is_string())
    return error_reply(id, "BadValue", "request must be an object with a string 'kind'");
  const std::string kind = request["kind"].get<std::string>();
  ++counter_.calls_by_kind[kind];
  if (kind != "HELLO" && kind != "BYE") ++counter_.total_calls;
  if (closed_ && kind != "BYE") return error_reply(id, "NotStarted", "session closed by BYE");
  try {
    return json{{"id", id}, {"ok", true}, {"value", dispatch(kind, request)}};
  } catch (const Error& e) {
    return error_reply(id, e.code(), e.what());
  } catch (const json::exception& e) {
    return error_reply(id, "BadValue", e.what());
  }
}

const char* transport_name(TransportKind k) { return k == TransportKind::InProc ? "inproc" : "socket"; }

TransportKind transport_from_name(std::string_view s) {
  if (s == "inproc") return TransportKind::InProc;
  if (s == "socket") return TransportKind::Socket;
  throw BadValue(fmt::format("unknown transport '{}' (expected inproc or socket)", s));
}

std::unique_ptr<Transport> make_transport(TransportKind kind, Simulation sim) {
  if (kind == TransportKind::InProc) return std::make_unique<InProcTransport>(std::move(sim));
  return std::make_unique<SocketTransport>(std::move(sim));
}

json BusClient::call(json request, const char* kind) {
  request["id"] = next_id_++;
  request["kind"] = kind;
  ++counter_.calls_by_kind[kind];
  if (std::string_view(kind) != "HELLO" && std::string_view(kind) != "BYE") ++counter_.total_calls;
  json reply = transport_->roundtrip(request);
  if (!reply.value("ok", false)) {
    const json& err = reply.at("error");
    throw_error(err.value("code", "Error"), err.value("message", ""));
  }
  return reply.contains("value") ? reply["value"] : json();
}

json BusClient::hello() { return call(json::object(), "HELLO"); }

void BusClient::bye() { call(json::object(), "BYE"); }

json BusClient::get(std::string_view path) { return call({{"path", path}}, "GET"); }

void BusClient::set(std::string_view path, json value) { call({{"path", path}, {"value", std::move(value)}}, "SET"); }

std::vector<json> BusClient::batch(const std::vector<BatchOp>& ops) {
  json arr = json::array();
  for (const auto& op : ops) {
    if (op.op == BatchOp::Op::Get)
      arr.push_back({{"op", "get"}, {"path", op.path}});
    else
      arr.push_back({{"op", "set"}, {"path", op.path}, {"value", op.value}});
  }
  json reply = call({{"ops", std::move(arr)}}, "BATCH");
  return reply.get<std::vector<json>>();
}

double BusClient::step(int count) { return call({{"count", count}}, "STEP").get<double>(); }

}  // namespace tsc::bus
