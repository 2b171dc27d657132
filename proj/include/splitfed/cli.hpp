#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace splitfed::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kDomainError = 3,
    kVerificationMismatch = 4,
};

/// Entry point for the `splitfed` tool: analyze, simulate, breakeven, sweep.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with arguments excluding the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace splitfed::cli
