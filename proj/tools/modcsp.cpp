// SPDX-License-Identifier: Apache-2.0
/**
 * @file modcsp.cpp
 * @brief Entry point of the `modcsp` command-line tool.
 */
#include <iostream>
#include <string>
#include <vector>

#include "modcsp/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return modcsp::cli::run(args, std::cout, std::cerr);
}
