#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsc/scenario.hpp"

namespace tsc {

enum class Stage { Green, Yellow, AllRed };

const char* stage_name(Stage s);

enum class RequestResult { Accepted, Deferred, Rejected };

// Signal shown while leaving `from` for `to`: groups green in both phases
// stay green, groups losing green show yellow, everything else is red.
std::string yellow_mask(std::string_view from, std::string_view to);

struct SignalRecord {
  double clock = 0.0;  // time from which the state applies
  Stage stage = Stage::Green;
  std::string signal;
  std::size_t phase = 0;  // active phase (outgoing phase during transitions)
};

// Per-intersection phase state machine. Time is kept in integer steps of
// 1/sim_res seconds so stage boundaries land exactly on step edges.
//
// tick() models one simulation step. A green is ended at the start of the
// step (pending request past min green, committed duration reached, or max
// green reached); yellow and all-red end as soon as their full duration has
// elapsed. Consequently a stage change made at step k takes effect for the
// interval starting at k, and the state visible between steps is the one
// that governs the next step.
class Controller {
 public:
  Controller(std::string intersection_id, std::vector<PhaseDef> program, const Timing& timing, int sim_res);

  RequestResult set_next_phase(std::size_t phase, double duration_s);
  // Sets how long the current green lasts in total, clamped to [min, max].
  void set_committed_duration(double seconds);
  void tick();

  // Places the controller at `plan_time` seconds into its own fixed-time
  // cycle (default greens with full intergreens). Only valid before the
  // first tick.
  void align_to_cycle(double plan_time);
  void set_default_green(std::size_t phase, double seconds);

  const std::string& id() const { return id_; }
  const std::vector<PhaseDef>& program() const { return program_; }
  std::size_t phase_count() const { return program_.size(); }
  const std::string& signal_string() const { return signal_; }
  Stage stage() const { return stage_; }
  std::size_t current_phase() const { return current_; }
  std::optional<std::size_t> transition_target() const;
  std::optional<std::size_t> pending_next() const { return pending_; }
  double green_elapsed() const { return green_elapsed_ * dt_; }
  double stage_elapsed() const { return stage_elapsed_ * dt_; }
  double committed_duration() const { return committed_ * dt_; }
  double last_change_time() const { return last_change_step_ * dt_; }
  double clock() const { return steps_ * dt_; }
  bool min_green_met() const { return stage_ == Stage::Green && green_elapsed_ >= min_green_; }
  // True exactly on the step edge where a new green has just started.
  bool at_green_onset() const { return stage_ == Stage::Green && green_elapsed_ == 0; }
  const Timing& timing() const { return timing_; }
  int sim_res() const { return sim_res_; }
  const std::vector<SignalRecord>& history() const { return history_; }

 private:
  std::int64_t to_steps(double seconds) const;
  std::int64_t clamp_duration(double seconds) const;
  void begin_transition(std::size_t target, std::int64_t target_duration);
  void enter_allred();
  void enter_green();
  void record();

  std::string id_;
  std::vector<PhaseDef> program_;
  Timing timing_;
  int sim_res_;
  double dt_;
  std::int64_t yellow_, allred_, min_green_, max_green_;

  std::int64_t steps_ = 0;
  Stage stage_ = Stage::Green;
  std::size_t current_ = 0;
  std::size_t target_ = 0;
  std::int64_t target_duration_ = 0;
  std::optional<std::size_t> pending_;
  std::int64_t pending_duration_ = 0;
  std::int64_t green_elapsed_ = 0;
  std::int64_t stage_elapsed_ = 0;
  std::int64_t committed_ = 0;
  std::int64_t last_change_step_ = 0;
  std::string signal_;
  std::vector<SignalRecord> history_;
};

}  // namespace tsc
