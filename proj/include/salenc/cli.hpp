#pragma once

#include <string>
#include <vector>

namespace salenc {

// full command-line entry point; args exclude the program name.
// exit codes: 0 success, 1 usage/config error, 2 runtime error
int run_cli(const std::vector<std::string>& args);

}  // namespace salenc
