#include "cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv, char** envp) { return semcom::cli::run_cli(argc, argv, envp, std::cout, std::cerr); }
