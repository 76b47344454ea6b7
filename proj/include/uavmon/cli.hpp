#pragma once

#include <istream>
#include <ostream>

namespace uavmon {

inline constexpr const char* kToolVersion = "0.1.0";

// Entry point of the `uavmon` tool. Exit codes: 0 success, 1 when some
// per-flight item failed, 2 on a fatal error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace uavmon
