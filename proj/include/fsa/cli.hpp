#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fsa {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2 };

/// Parses "0.03137" or "8/255".
std::optional<double> parse_real_or_fraction(std::string_view text);

/// Entry point of the `fsa` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fsa
