#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfl::cli {

// Full command-line entry point (argv without the program name). Writes the
// one-line report to `out` and machine-readable error JSON to `err`; returns
// the process exit code: 0 success, 2 config error, 3 divergence,
// 4 validation failure.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace mfl::cli
