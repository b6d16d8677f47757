#pragma once

#include <chrono>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace coldl {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_input = 1, exit_timeout = 2, exit_resource = 3 };

/// Parses `500ms`, `2s`, `1.5m`, `1h`; a bare number means seconds. Throws InputError.
std::chrono::milliseconds parse_duration(std::string_view text);

/// Entry point of the `coldl` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coldl
