#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bevlink {

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "BEVLINK_OUT_ROOT";

/// Runs one command line (without the program name), e.g. {"dataset", "synth", "--out", "d"}.
/// Returns 0 on success; failures print a one-line diagnostic to `err` and return nonzero
/// (2 for usage errors, 1 for everything else).
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bevlink
