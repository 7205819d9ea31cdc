// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return cdc::cli::run_cli(argc, argv, std::cout, std::cerr); }
