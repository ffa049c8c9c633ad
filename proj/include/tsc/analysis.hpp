#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tsc/engine.hpp"

namespace tsc::analysis {

// spacing / (speed / 3.6). Throws NonPositiveInput.
double ideal_offset(double spacing_m, double speed_kmh);
// flow_a / (flow_a + flow_b). Throws BothZero (or NonPositiveInput on negative flows).
double ideal_split(double flow_a, double flow_b);

// Signal history of one controller; the log covers [0, end_clock).
struct ControllerLog {
  std::string intersection;
  std::vector<SignalRecord> records;
  double end_clock = 0.0;
};

std::vector<ControllerLog> controller_logs(const Simulation& sim);
// CSV: clock,intersection_id,stage,phase,signal plus a trailing END row per
// intersection carrying end_clock.
void write_controller_logs(const std::filesystem::path& path, const std::vector<ControllerLog>& logs);
std::vector<ControllerLog> read_controller_logs(const std::filesystem::path& path);

// Signal shown by one log at time t (last record at or before t).
const SignalRecord& record_at(const ControllerLog& log, double t);

// One band row: the arterial movement sampled at one intersection.
struct ArterialRow {
  std::string intersection;
  std::string movement;
  double position_m = 0.0;
};

// Rows for `movement` (e.g. "W_S", eastbound through) at every intersection
// having it, ordered by position along the arterial (distance from the
// first intersection).
std::vector<ArterialRow> arterial_rows(const ScenarioConfig& cfg, const std::string& movement = "W_S");

struct BandMatrix {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<ArterialRow> rows;
  std::vector<std::string> cells;  // per row, one of G/Y/R per sample

  std::size_t samples() const { return cells.empty() ? 0 : cells.front().size(); }
  double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
};

// Samples the rows at t0, t0+dt, ... (< t1). Throws WindowOutOfRange when the
// window is empty or not covered by the logs.
BandMatrix extract_band(const std::vector<ControllerLog>& logs, const ScenarioConfig& cfg,
                        const std::vector<ArterialRow>& rows, double t0, double t1, double dt = 1.0);

// Dominant period of a row's green indicator in samples (autocorrelation
// peak). Throws Aperiodic.
int detect_period(const std::string& row);

// Lag of row j behind row i (samples, in [0, period)) maximising green
// overlap. Throws Aperiodic when either row lacks a period or the periods
// differ by more than one sample.
int measure_offset(const BandMatrix& band, std::size_t row_i, std::size_t row_j);

std::string band_csv(const BandMatrix& band);
std::string render_band_svg(const BandMatrix& band, double guide_speed_kmh = 50.0);
// Throws WindowOutOfRange on an empty band, IoError when the file cannot be written.
void render_band(const BandMatrix& band, const std::filesystem::path& out_path, double guide_speed_kmh = 50.0);

}  // namespace tsc::analysis
