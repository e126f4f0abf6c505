#pragma once

#include <ostream>

namespace kpgen::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 bad usage or configuration.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kpgen::cli
