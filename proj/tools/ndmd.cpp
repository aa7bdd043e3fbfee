// Command-line entry point. Subcommands are registered in cli.cpp; this file
// only owns main().

#include <vector>

#include "ndmd/cli.hpp"

int main(int argc, char** argv) {
  return ndmd::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
