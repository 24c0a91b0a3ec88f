#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmiq::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs one command line (without the program name). Payloads without
/// --out go to `out`; diagnostics and the resolved configuration go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmiq::cli
