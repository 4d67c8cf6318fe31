// Command-line front end: synth, pseudo-gt, train, infer, fuse, eval, report.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rgbdsal {

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInvariant = 3 };

/// Environment variable naming a default JSON config for `train`.
inline constexpr const char* kConfigEnv = "RGBDSAL_CONFIG";

/// Runs one invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rgbdsal
