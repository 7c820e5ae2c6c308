#pragma once

#include <string>
#include <vector>

namespace mptx {

/// Parses argv, runs one subcommand and returns the process exit code.
/// Failures print a single line "error code=<name> message=\"...\"" on stderr.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace mptx
