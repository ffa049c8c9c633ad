#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsc {

// Every error carries a stable machine-readable code; the attribute bus sends
// the code over the wire and the client rethrows the matching type.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define TSC_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

// scenario
TSC_DEFINE_ERROR(ParseError);
TSC_DEFINE_ERROR(UnknownPreset);
// engine
TSC_DEFINE_ERROR(ZeroRate);
TSC_DEFINE_ERROR(HorizonExceeded);
TSC_DEFINE_ERROR(UnknownLane);
TSC_DEFINE_ERROR(NoVehicles);
// signals
TSC_DEFINE_ERROR(EmptyProgram);
TSC_DEFINE_ERROR(TimingError);
TSC_DEFINE_ERROR(LengthMismatch);
TSC_DEFINE_ERROR(UnknownPhase);
// attribute bus / facade
TSC_DEFINE_ERROR(UnknownPath);
TSC_DEFINE_ERROR(ReadOnlyPath);
TSC_DEFINE_ERROR(BadValue);
TSC_DEFINE_ERROR(TransportError);
TSC_DEFINE_ERROR(AlreadyStarted);
TSC_DEFINE_ERROR(NotStarted);
TSC_DEFINE_ERROR(UnknownIntersection);
// environment / agents / bench
TSC_DEFINE_ERROR(ConfigError);
TSC_DEFINE_ERROR(MissingAgentAction);
TSC_DEFINE_ERROR(OutOfSpaceAction);
TSC_DEFINE_ERROR(EpisodeOver);
TSC_DEFINE_ERROR(PlanMismatch);
TSC_DEFINE_ERROR(WorkloadMismatch);
// analysis
TSC_DEFINE_ERROR(NonPositiveInput);
TSC_DEFINE_ERROR(BothZero);
TSC_DEFINE_ERROR(WindowOutOfRange);
TSC_DEFINE_ERROR(Aperiodic);
TSC_DEFINE_ERROR(IoError);

#undef TSC_DEFINE_ERROR

// Rethrows an error received by code (used on the client side of the bus).
[[noreturn]] void throw_error(std::string_view code, const std::string& message);

}  // namespace tsc
