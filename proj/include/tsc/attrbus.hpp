#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsc/engine.hpp"

namespace tsc::bus {

using json = nlohmann::json;

inline constexpr const char* kProtocolVersion = "tsc-attrbus/1";

struct CallCounter {
  std::int64_t total_calls = 0;  // GET, SET, BATCH and STEP; HELLO/BYE are session plumbing
  std::map<std::string, std::int64_t> calls_by_kind;
  bool operator==(const CallCounter&) const = default;
};

// Markdown table of every attribute path; docs/paths.md is generated from it.
const std::string& catalog_text();
std::string catalog_hash();

// A path resolved against one simulation instance.
struct Target {
  enum class Kind {
    SimClock, SimStep, SimRes, SimPeriod,
    TsPhase, TsPhaseIndex, TsStage, TsGreenElapsed, TsCommitted, TsPending, TsCrossings, TsDelay, TsIgnored,
    TsGroupState,
    LaneCount, LaneQueue, LaneIwait,
    LinkDelay,
    EntryPending, EntryBwait,
    NetTravelTime, NetDistance, NetDelay, NetIwait, NetBwait, NetArrived, NetMeanSpeed, NetSpawned, NetActive,
    NetPending,
  };
  Kind kind;
  int index = -1;  // intersection / lane / link / entry
  int sub = -1;    // signal group
};

// Serves one Simulation. handle() is the whole protocol: one request object
// in, one reply object out.
class AttrServer {
 public:
  explicit AttrServer(Simulation sim);

  json handle(const json& request);

  const CallCounter& counter() const { return counter_; }
  const Simulation& sim() const { return sim_; }
  bool closed() const { return closed_; }
  json hello_value() const;

  Target resolve(std::string_view path) const;
  json read(const Target& t) const;
  void check_write(const Target& t, const json& value, std::string_view path) const;
  void write(const Target& t, const json& value);

 private:
  json dispatch(const std::string& kind, const json& request);
  void commit_staged();
  std::string staged_or_live(int ts) const;

  Simulation sim_;
  CallCounter counter_;
  bool closed_ = false;
  std::vector<std::optional<std::string>> staged_;  // per intersection, pending group writes
  std::vector<std::int64_t> ignored_;
};

enum class TransportKind { InProc, Socket };
const char* transport_name(TransportKind k);
TransportKind transport_from_name(std::string_view s);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual json roundtrip(const json& request) = 0;
  virtual const AttrServer& server() const = 0;
  virtual TransportKind kind() const = 0;
};

// Direct function-call transport.
class InProcTransport : public Transport {
 public:
  explicit InProcTransport(Simulation sim) : server_(std::move(sim)) {}
  json roundtrip(const json& request) override { return server_.handle(request); }
  const AttrServer& server() const override { return server_; }
  TransportKind kind() const override { return TransportKind::InProc; }

 private:
  AttrServer server_;
};

// Loopback TCP: frames are a 4-byte big-endian length followed by one JSON
// document. The server runs on its own thread for the lifetime of the object.
class SocketTransport : public Transport {
 public:
  explicit SocketTransport(Simulation sim);
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  json roundtrip(const json& request) override;
  const AttrServer& server() const override { return *server_; }
  TransportKind kind() const override { return TransportKind::Socket; }
  int port() const { return port_; }

  // Writes arbitrary bytes to the connection (protocol tests).
  void send_raw(std::string_view bytes);

 private:
  void serve();

  std::unique_ptr<AttrServer> server_;
  int listen_fd_ = -1;
  int client_fd_ = -1;
  int port_ = 0;
  struct Thread;
  std::unique_ptr<Thread> thread_;
};

std::unique_ptr<Transport> make_transport(TransportKind kind, Simulation sim);

// Frame helpers shared by both ends of the socket transport.
std::string encode_frame(std::string_view payload);

struct BatchOp {
  enum class Op { Get, Set } op = Op::Get;
  std::string path;
  json value;
  static BatchOp get(std::string p) { return {Op::Get, std::move(p), nullptr}; }
  static BatchOp set(std::string p, json v) { return {Op::Set, std::move(p), std::move(v)}; }
};

// Typed client over a transport. Keeps its own count of the calls it issued,
// which must agree with the server's counter.
class BusClient {
 public:
  explicit BusClient(Transport& t) : transport_(&t) {}

  json hello();
  void bye();
  json get(std::string_view path);
  void set(std::string_view path, json value);
  std::vector<json> batch(const std::vector<BatchOp>& ops);
  double step(int count = 1);

  const CallCounter& counter() const { return counter_; }
  Transport& transport() { return *transport_; }

 private:
  json call(json request, const char* kind);

  Transport* transport_;
  std::int64_t next_id_ = 1;
  CallCounter counter_;
};

}  // namespace tsc::bus
