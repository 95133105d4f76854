#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sfm {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_usage = 2 };

/// Environment variable that overrides the configured output directory;
/// `--out` still wins over it.
inline constexpr const char* kOutDirEnv = "SFM_OUT_DIR";

/// Runs one command. `args` excludes the program name. Failures print a
/// single line `error[<category>]: <message>` to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sfm
