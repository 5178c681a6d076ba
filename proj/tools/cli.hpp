// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace a1o::cli {

constexpr int kOk = 0;
constexpr int kFailure = 1;  // runtime error or failed check
constexpr int kUsage = 2;    // bad flags, unknown names, invalid config

/// Runs one command line (without the program name). Machine-readable
/// results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace a1o::cli
