#include <gtest/gtest.h>

#include <random>

#include "tsc/signals.hpp"

using namespace tsc;

namespace {

std::vector<PhaseDef> single_program() { return build_preset("single").signals[0].phases; }

Timing preset_timing() { return build_preset("single").timing; }

void tick_for(Controller& c, double seconds) {
  long n = std::lround(seconds * c.sim_res());
  for (long i = 0; i < n; ++i) c.tick();
}

// Exhaustive scan of one controller log.
void check_history(const Controller& c) {
  const auto& h = c.history();
  const Timing& t = c.timing();
  const auto& prog = c.program();
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& r = h[i];
    if (r.stage == Stage::Green) {
      ASSERT_EQ(r.signal, prog[r.phase].state);
      if (i > 0 && h[i - 1].stage == Stage::Green) FAIL() << "green followed green at " << r.clock;
    }
    if (r.stage == Stage::Yellow) {
      ASSERT_GT(i, 0u);
      ASSERT_EQ(h[i - 1].stage, Stage::Green);
      if (i + 2 >= h.size()) break;  // log ends mid-transition
      const auto& ar = h[i + 1];
      ASSERT_EQ(ar.stage, Stage::AllRed);
      EXPECT_NEAR(ar.clock - r.clock, t.yellow_time, 1e-9);
      const auto& g = h[i + 2];
      ASSERT_EQ(g.stage, Stage::Green);
      EXPECT_NEAR(g.clock - ar.clock, t.allred_time, 1e-9);
      EXPECT_NE(g.phase, h[i - 1].phase);
      EXPECT_EQ(r.signal, yellow_mask(prog[h[i - 1].phase].state, prog[g.phase].state));
      EXPECT_EQ(ar.signal, std::string(r.signal.size(), 'R'));
      double green_len = r.clock - h[i - 1].clock;
      EXPECT_GE(green_len, t.min_green - 1e-9);
      EXPECT_LE(green_len, t.max_green + 1.0 / c.sim_res() + 1e-9);
    }
  }
}

}  // namespace

TEST(Signals, YellowMask) {
  EXPECT_EQ(yellow_mask("GGRR", "RRGG"), "YYRR");
  EXPECT_EQ(yellow_mask("GGRR", "GGRR"), "GGRR");
  EXPECT_EQ(yellow_mask("GRGR", "RRGG"), "YRGR");
  EXPECT_THROW(yellow_mask("GRG", "RRGG"), LengthMismatch);
}

TEST(Signals, YellowMaskBruteForce) {
  const char gr[2] = {'G', 'R'};
  for (int a = 0; a < 16; ++a)
    for (int b = 0; b < 16; ++b) {
      std::string from, to;
      for (int k = 0; k < 4; ++k) {
        from += gr[(a >> k) & 1];
        to += gr[(b >> k) & 1];
      }
      auto m = yellow_mask(from, to);
      for (int k = 0; k < 4; ++k) {
        char expect = from[k] == 'G' ? (to[k] == 'G' ? 'G' : 'Y') : 'R';
        EXPECT_EQ(m[k], expect);
      }
    }
}

TEST(Signals, Construction) {
  Controller c("1", single_program(), preset_timing(), 10);
  EXPECT_EQ(c.signal_string(), "GRRR");
  EXPECT_EQ(c.stage(), Stage::Green);
  EXPECT_EQ(c.current_phase(), 0u);
  EXPECT_EQ(c.green_elapsed(), 0.0);
  EXPECT_DOUBLE_EQ(c.committed_duration(), 27.0);

  EXPECT_THROW(Controller("1", {}, preset_timing(), 10), EmptyProgram);
  Timing bad = preset_timing();
  bad.min_green = 30;
  bad.max_green = 20;
  EXPECT_THROW(Controller("1", single_program(), bad, 10), TimingError);
}

TEST(Signals, AcceptedSwitchEntersYellowNextTick) {
  Controller c("1", single_program(), preset_timing(), 10);
  tick_for(c, 10.0);
  EXPECT_DOUBLE_EQ(c.green_elapsed(), 10.0);
  EXPECT_EQ(c.set_next_phase(2, 17.0), RequestResult::Accepted);
  EXPECT_EQ(c.stage(), Stage::Green);
  c.tick();
  EXPECT_EQ(c.stage(), Stage::Yellow);
  EXPECT_EQ(c.history().back().clock, 10.0);
  EXPECT_EQ(c.signal_string(), yellow_mask("GRRR", "RRGR"));
  EXPECT_EQ(c.transition_target(), 2u);
}

TEST(Signals, EarlyRequestIsDeferredUntilMinGreen) {
  Controller c("1", single_program(), preset_timing(), 10);
  tick_for(c, 2.0);
  EXPECT_EQ(c.set_next_phase(2, 17.0), RequestResult::Deferred);
  while (c.stage() == Stage::Green) c.tick();
  EXPECT_DOUBLE_EQ(c.history().back().clock, 5.0);
  EXPECT_EQ(c.history().back().stage, Stage::Yellow);
  tick_for(c, 5.0);
  EXPECT_EQ(c.stage(), Stage::Green);
  EXPECT_EQ(c.current_phase(), 2u);
  EXPECT_DOUBLE_EQ(c.committed_duration(), 17.0);
}

TEST(Signals, SamePhaseExtends) {
  Controller c("1", single_program(), preset_timing(), 10);
  tick_for(c, 10.0);
  EXPECT_EQ(c.set_next_phase(0, 20.0), RequestResult::Accepted);
  EXPECT_DOUBLE_EQ(c.committed_duration(), 30.0);
  tick_for(c, 100.0);
  EXPECT_EQ(c.set_next_phase(c.current_phase(), 100.0), RequestResult::Accepted);
  EXPECT_LE(c.committed_duration(), 120.0);
}

TEST(Signals, ExtensionCappedAtMaxGreen) {
  Controller d("1", single_program(), preset_timing(), 10);
  tick_for(d, 20.0);
  d.set_next_phase(0, 120.0);
  EXPECT_DOUBLE_EQ(d.committed_duration(), 120.0);
}

TEST(Signals, UnknownPhase) {
  Controller c("1", single_program(), preset_timing(), 10);
  EXPECT_THROW(c.set_next_phase(4, 10.0), UnknownPhase);
}

TEST(Signals, MaxGreenForcesCyclicAdvance) {
  auto prog = single_program();
  prog[0].default_green = 120.0;
  Controller c("1", prog, preset_timing(), 10);
  tick_for(c, 120.0);
  EXPECT_EQ(c.stage(), Stage::Green);
  c.tick();
  EXPECT_EQ(c.stage(), Stage::Yellow);
  EXPECT_EQ(c.transition_target(), 1u);
  EXPECT_DOUBLE_EQ(c.history().back().clock, 120.0);
}

TEST(Signals, TransitionTakesFiveSeconds) {
  Controller c("1", single_program(), preset_timing(), 10);
  tick_for(c, 27.0);
  EXPECT_EQ(c.stage(), Stage::Green);
  c.tick();
  EXPECT_EQ(c.stage(), Stage::Yellow);
  tick_for(c, 2.8);
  EXPECT_EQ(c.stage(), Stage::Yellow);
  c.tick();
  EXPECT_EQ(c.stage(), Stage::AllRed);
  EXPECT_EQ(c.signal_string(), "RRRR");
  tick_for(c, 1.9);
  EXPECT_EQ(c.stage(), Stage::AllRed);
  c.tick();
  EXPECT_EQ(c.stage(), Stage::Green);
  EXPECT_EQ(c.signal_string(), "RGRR");
  EXPECT_DOUBLE_EQ(c.last_change_time(), 32.0);
  EXPECT_TRUE(c.at_green_onset());
}

TEST(Signals, OnePhaseProgramNeverLeavesGreen) {
  std::vector<PhaseDef> prog{{"ALL", "G", 10.0}};
  Controller c("x", prog, preset_timing(), 10);
  for (int i = 0; i < 5000; ++i) {
    c.tick();
    ASSERT_EQ(c.stage(), Stage::Green);
    ASSERT_EQ(c.signal_string(), "G");
  }
  EXPECT_EQ(c.set_next_phase(0, 30.0), RequestResult::Accepted);
}

TEST(Signals, CyclicDefault) {
  Controller c("1", single_program(), preset_timing(), 10);
  tick_for(c, 3 * (27 + 8 + 17 + 8 + 4 * 5));
  std::vector<std::size_t> seq;
  for (auto& r : c.history())
    if (r.stage == Stage::Green) seq.push_back(r.phase);
  ASSERT_GE(seq.size(), 12u);
  for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_EQ(seq[i], i % 4);
  check_history(c);
  // fixed-time cycle of 80 s
  EXPECT_DOUBLE_EQ(c.history()[4 * 3].clock, 80.0);
}

TEST(Signals, RandomRequestsKeepInvariants) {
  std::mt19937 gen(5);
  auto prog = single_program();
  Controller c("1", prog, preset_timing(), 10);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> dur(0, 150);
  std::bernoulli_distribution ask(0.02);
  for (int k = 0; k < 100000; ++k) {
    if (ask(gen)) c.set_next_phase(pick(gen), dur(gen));
    c.tick();
    // state visible between steps matches the stage
    switch (c.stage()) {
      case Stage::Green:
        ASSERT_EQ(c.signal_string(), prog[c.current_phase()].state);
        ASSERT_LE(c.green_elapsed(), preset_timing().max_green + 0.1 + 1e-9);
        break;
      case Stage::Yellow:
        ASSERT_LT(c.stage_elapsed(), preset_timing().yellow_time);
        ASSERT_EQ(c.signal_string(), yellow_mask(prog[c.current_phase()].state, prog[*c.transition_target()].state));
        break;
      case Stage::AllRed:
        ASSERT_LT(c.stage_elapsed(), preset_timing().allred_time);
        ASSERT_EQ(c.signal_string(), "RRRR");
        break;
    }
  }
  check_history(c);
}

TEST(Signals, AlignToCycle) {
  auto prog = build_preset("arterial3").signals[0].phases;  // 19 + 5 + 11 + 5 = 40
  Controller c("1", prog, preset_timing(), 10);
  c.align_to_cycle(40.0 - 21.6);
  // 18.4 s into the cycle: still green EW with 0.6 s left
  EXPECT_EQ(c.stage(), Stage::Green);
  EXPECT_NEAR(c.green_elapsed(), 18.4, 1e-9);
  tick_for(c, 0.6);
  c.tick();
  EXPECT_EQ(c.stage(), Stage::Yellow);
  c.tick();
  EXPECT_THROW(c.align_to_cycle(0), TimingError);
}
