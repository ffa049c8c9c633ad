#include "tsc/errors.hpp"

#include <functional>
#include <string>
#include <unordered_map>

namespace tsc {

namespace {

template <class E>
[[noreturn]] void raise(const std::string& message) {
  throw E(message);
}

}  // namespace

void throw_error(std::string_view code, const std::string& message) {
  using Thrower = void (*)(const std::string&);
  static const std::unordered_map<std::string_view, Thrower> table = {
      {"ParseError", &raise<ParseError>},
      {"UnknownPreset", &raise<UnknownPreset>},
      {"ZeroRate", &raise<ZeroRate>},
      {"HorizonExceeded", &raise<HorizonExceeded>},
      {"UnknownLane", &raise<UnknownLane>},
      {"NoVehicles", &raise<NoVehicles>},
      {"EmptyProgram", &raise<EmptyProgram>},
      {"TimingError", &raise<TimingError>},
      {"LengthMismatch", &raise<LengthMismatch>},
      {"UnknownPhase", &raise<UnknownPhase>},
      {"UnknownPath", &raise<UnknownPath>},
      {"ReadOnlyPath", &raise<ReadOnlyPath>},
      {"BadValue", &raise<BadValue>},
      {"TransportError", &raise<TransportError>},
      {"AlreadyStarted", &raise<AlreadyStarted>},
      {"NotStarted", &raise<NotStarted>},
      {"UnknownIntersection", &raise<UnknownIntersection>},
      {"ConfigError", &raise<ConfigError>},
      {"MissingAgentAction", &raise<MissingAgentAction>},
      {"OutOfSpaceAction", &raise<OutOfSpaceAction>},
      {"EpisodeOver", &raise<EpisodeOver>},
      {"PlanMismatch", &raise<PlanMismatch>},
      {"WorkloadMismatch", &raise<WorkloadMismatch>},
      {"NonPositiveInput", &raise<NonPositiveInput>},
      {"BothZero", &raise<BothZero>},
      {"WindowOutOfRange", &raise<WindowOutOfRange>},
      {"Aperiodic", &raise<Aperiodic>},
      {"IoError", &raise<IoError>},
  };
  if (auto it = table.find(code); it != table.end()) it->second(message);
  throw Error(std::string(code), message);
}

}  // namespace tsc
