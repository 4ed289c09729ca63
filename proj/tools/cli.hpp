#pragma once

#include <iostream>

namespace matshrink {

// Entry point of the `matshrink` command. Returns the process exit code:
// 0 success (certify: CERTIFIED_NSD), 1 usage or runtime error,
// 2 VIOLATION_FOUND, 3 INCONCLUSIVE.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace matshrink
