#pragma once

#include "cli/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace semcom::cli {

// Entry point shared by the executable and the tests. Returns the process exit
// code: 0 on success, 1 on runtime/data errors, 2 on usage or configuration errors.
int run_cli(int argc, const char* const* argv, char** envp, std::ostream& out, std::ostream& err);

// Creates <base>/<timestamp>-<config hash>[-N] and writes config.yaml into it.
std::filesystem::path make_run_dir(const std::filesystem::path& base, const RunConfig& cfg);

// Table 2 depth combinations.
std::vector<std::vector<int>> stb_combinations();

}  // namespace semcom::cli
