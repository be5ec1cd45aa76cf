#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace polyhaz {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInput = 2, kExitNumerical = 3 };

/// Entry point for `polyhaz fit|simulate|summarize ...`; args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polyhaz
