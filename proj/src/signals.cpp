#include "tsc/signals.hpp"

#include <algorithm>
#include <cmath>

namespace tsc {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Green: return "GREEN";
    case Stage::Yellow: return "YELLOW";
    case Stage::AllRed: return "ALLRED";
  }
  return "?";
}

std::string yellow_mask(std::string_view from, std::string_view to) {
  if (from.size() != to.size())
    throw LengthMismatch("phase strings differ in length (" + std::to_string(from.size()) + " vs " +
                         std::to_string(to.size()) + ")");
  std::string out(from.size(), 'R');
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i] == 'G') out[i] = to[i] == 'G' ? 'G' : 'Y';
  }
  return out;
}

Controller::Controller(std::string intersection_id, std::vector<PhaseDef> program, const Timing& timing, int sim_res)
    : id_(std::move(intersection_id)), program_(std::move(program)), timing_(timing), sim_res_(sim_res) {
  if (program_.empty()) throw EmptyProgram("intersection " + id_ + " has an empty signal program");
  if (sim_res_ < 1) throw TimingError("sim_res must be >= 1");
  if (!(timing_.min_green > 0) || timing_.min_green > timing_.max_green)
    throw TimingError("need 0 < min_green <= max_green (got " + std::to_string(timing_.min_green) + ", " +
                      std::to_string(timing_.max_green) + ")");
  if (timing_.yellow_time < 0 || timing_.allred_time < 0) throw TimingError("yellow and all-red must be >= 0");
  for (const auto& p : program_)
    if (p.state.size() != program_.front().state.size())
      throw LengthMismatch("phase " + p.id + " of " + id_ + " has a different signal-group count");
  dt_ = 1.0 / sim_res_;
  yellow_ = to_steps(timing_.yellow_time);
  allred_ = to_steps(timing_.allred_time);
  min_green_ = to_steps(timing_.min_green);
  max_green_ = to_steps(timing_.max_green);
  committed_ = clamp_duration(program_[0].default_green);
  signal_ = program_[0].state;
  record();
}

std::int64_t Controller::to_steps(double seconds) const { return std::llround(seconds * sim_res_); }

std::int64_t Controller::clamp_duration(double seconds) const {
  return std::clamp(to_steps(seconds), min_green_, max_green_);
}

std::optional<std::size_t> Controller::transition_target() const {
  if (stage_ == Stage::Green) return std::nullopt;
  return target_;
}

RequestResult Controller::set_next_phase(std::size_t phase, double duration_s) {
  if (phase >= program_.size())
    throw UnknownPhase("phase " + std::to_string(phase) + " not in the program of " + id_ + " (" +
                       std::to_string(program_.size()) + " phases)");
  std::int64_t d = clamp_duration(duration_s);
  if (stage_ == Stage::Green) {
    if (phase == current_) {
      committed_ = std::min(green_elapsed_ + d, max_green_);
      pending_.reset();
      return RequestResult::Accepted;
    }
    pending_ = phase;
    pending_duration_ = d;
    return green_elapsed_ >= min_green_ ? RequestResult::Accepted : RequestResult::Deferred;
  }
  if (phase == target_) {
    target_duration_ = d;
    pending_.reset();
    return RequestResult::Accepted;
  }
  if (phase == current_) return RequestResult::Rejected;  // outgoing green cannot be kept
  pending_ = phase;
  pending_duration_ = d;
  return RequestResult::Deferred;
}

void Controller::set_committed_duration(double seconds) { committed_ = clamp_duration(seconds); }

void Controller::set_default_green(std::size_t phase, double seconds) {
  if (phase >= program_.size()) throw UnknownPhase("phase " + std::to_string(phase) + " not in program of " + id_);
  program_[phase].default_green = seconds;
  if (steps_ == 0 && stage_ == Stage::Green && phase == current_) committed_ = clamp_duration(seconds);
}

void Controller::tick() {
  if (stage_ == Stage::Green) {
    bool requested = pending_.has_value() && green_elapsed_ >= min_green_;
    if (requested || green_elapsed_ >= committed_ || green_elapsed_ >= max_green_) {
      std::size_t target = pending_ ? *pending_ : (current_ + 1) % program_.size();
      std::int64_t duration = pending_ ? pending_duration_ : clamp_duration(program_[target].default_green);
      pending_.reset();
      if (target == current_) {
        // single-phase program: restart the same green without a signal change
        green_elapsed_ = 0;
        committed_ = duration;
        last_change_step_ = steps_;
      } else {
        begin_transition(target, duration);
      }
    }
  }

  ++steps_;
  if (stage_ == Stage::Green) {
    ++green_elapsed_;
  } else {
    ++stage_elapsed_;
  }
  if (stage_ == Stage::Yellow && stage_elapsed_ >= yellow_) enter_allred();
  if (stage_ == Stage::AllRed && stage_elapsed_ >= allred_) enter_green();
}

void Controller::begin_transition(std::size_t target, std::int64_t target_duration) {
  target_ = target;
  target_duration_ = target_duration;
  stage_ = Stage::Yellow;
  stage_elapsed_ = 0;
  signal_ = yellow_mask(program_[current_].state, program_[target_].state);
  record();
  if (yellow_ == 0) enter_allred();
}

void Controller::enter_allred() {
  stage_ = Stage::AllRed;
  stage_elapsed_ = 0;
  signal_.assign(signal_.size(), 'R');
  record();
  if (allred_ == 0) enter_green();
}

void Controller::enter_green() {
  stage_ = Stage::Green;
  stage_elapsed_ = 0;
  current_ = target_;
  green_elapsed_ = 0;
  committed_ = target_duration_;
  last_change_step_ = steps_;
  signal_ = program_[current_].state;
  record();
}

void Controller::record() {
  double now = steps_ * dt_;
  SignalRecord r{now, stage_, signal_, current_};
  if (!history_.empty() && history_.back().clock == now)
    history_.back() = std::move(r);
  else
    history_.push_back(std::move(r));
}

void Controller::align_to_cycle(double plan_time) {
  if (steps_ != 0) throw TimingError("align_to_cycle is only valid before the first tick");
  const std::size_t n = program_.size();
  std::vector<std::int64_t> greens(n);
  std::int64_t cycle = 0;
  for (std::size_t i = 0; i < n; ++i) {
    greens[i] = clamp_duration(program_[i].default_green);
    cycle += greens[i] + (n > 1 ? yellow_ + allred_ : 0);
  }
  std::int64_t tau = to_steps(plan_time) % cycle;
  if (tau < 0) tau += cycle;

  pending_.reset();
  stage_elapsed_ = 0;
  green_elapsed_ = 0;
  const std::int64_t tau0 = tau;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t next = (i + 1) % n;
    last_change_step_ = tau - tau0;  // onset of phase i relative to clock 0
    if (tau < greens[i]) {
      stage_ = Stage::Green;
      current_ = i;
      green_elapsed_ = tau;
      committed_ = greens[i];
      signal_ = program_[i].state;
      break;
    }
    tau -= greens[i];
    current_ = i;
    target_ = next;
    target_duration_ = greens[next];
    if (tau < yellow_) {
      stage_ = Stage::Yellow;
      stage_elapsed_ = tau;
      signal_ = yellow_mask(program_[i].state, program_[next].state);
      break;
    }
    tau -= yellow_;
    if (tau < allred_) {
      stage_ = Stage::AllRed;
      stage_elapsed_ = tau;
      signal_.assign(signal_.size(), 'R');
      break;
    }
    tau -= allred_;
  }
  history_.clear();
  record();
}

}  // namespace tsc
