#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tsc/attrbus.hpp"

namespace tsc {

enum class Workload { W0, W1, W2 };
enum class BusMode { Raw, Facade };

const char* workload_name(Workload w);
Workload workload_from_name(std::string_view s);
const char* mode_name(BusMode m);
BusMode mode_from_name(std::string_view s);

struct WorkloadSpec {
  Workload id = Workload::W0;
  BusMode mode = BusMode::Raw;
  bus::TransportKind transport = bus::TransportKind::InProc;
  std::string scenario = "single";
  double horizon = 3600.0;
  int sim_res = 10;
  double decision_every = 5.0;  // s
  std::uint64_t seed = 42;      // run r uses seed + r
};

struct BenchReport {
  WorkloadSpec spec;
  std::vector<double> run_seconds;
  std::vector<std::int64_t> run_calls;
  std::int64_t steps = 0;
  double latency_ms_mean = 0.0;
  double latency_ms_sd = 0.0;
  double steps_per_s = 0.0;
  std::int64_t bus_calls = 0;
};

struct Comparison {
  double overhead_pct = 0.0;
  double throughput_ratio = 1.0;
  double call_reduction_pct = 0.0;
};

// Bus calls the scripted loop issues (HELLO/BYE excluded).
std::int64_t expected_calls(const WorkloadSpec& spec);

BenchReport run_workload(const WorkloadSpec& spec, int runs = 5);
Comparison compare(const BenchReport& raw, const BenchReport& facade);

std::string bench_csv_header();
std::string bench_csv_row(const BenchReport& r);

}  // namespace tsc
