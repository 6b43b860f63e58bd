#pragma once

#include <iosfwd>

namespace nld::cli {

// Entry point shared by the executable and the tests. Returns the process
// exit code; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nld::cli
