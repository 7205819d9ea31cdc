// SPDX-License-Identifier: Apache-2.0
//
// `cdc` command-line entry point, callable in-process for tests.

#pragma once

#include <ostream>

namespace cdc::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUnsuitable = 2,
  kTimeout = 3,
  kBadInput = 4,
  kExplosion = 5,
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdc::cli
