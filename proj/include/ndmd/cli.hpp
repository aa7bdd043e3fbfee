#pragma once

#include <string>
#include <vector>

namespace ndmd {

/// Runs the command-line tool on already-split arguments (program name
/// excluded). Returns the process exit code: 0 success, 1 user error
/// (flags, files, shapes), 2 internal failure (numerics, bugs).
int run_cli(std::vector<std::string> args);

}  // namespace ndmd
