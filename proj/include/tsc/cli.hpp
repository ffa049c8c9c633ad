#pragma once

#include <iosfwd>

namespace tsc::cli {

// Exit codes: 0 ok, 1 validation or usage error, 2 runtime error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tsc::cli
